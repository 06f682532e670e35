"""Event containers, linear warping and images of warped events."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError


@dataclass(frozen=True)
class Event:
    x: float
    y: float
    t: float
    p: int


@dataclass(frozen=True)
class SensorGeometry:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise InvalidInputError(f"sensor must be at least 2x2, got {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True, eq=False)
class EventSet:
    """Struct-of-arrays event window, sorted by timestamp.

    ``p`` holds +1/-1. The window bounds ``t0``/``t1`` are the min/max
    timestamps.
    """

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=np.float64) for a in (self.x, self.y, self.t)]
        p = np.asarray(self.p, dtype=np.int8)
        n = arrs[0].shape[0]
        if any(a.ndim != 1 or a.shape[0] != n for a in arrs) or p.shape != (n,):
            raise InvalidInputError("event arrays must be 1-D and of equal length")
        if n and np.any(np.diff(arrs[2]) < 0):
            raise InvalidInputError("event timestamps must be non-decreasing")
        if n and not np.all(np.isin(p, (-1, 1))):
            raise InvalidInputError("polarity must be +1 or -1")
        for name, a in zip("xyt", arrs):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_events(cls, events) -> "EventSet":
        events = list(events)
        return cls(
            np.array([e.x for e in events], dtype=np.float64),
            np.array([e.y for e in events], dtype=np.float64),
            np.array([e.t for e in events], dtype=np.float64),
            np.array([e.p for e in events], dtype=np.int8),
        )

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, k) -> Event:
        return Event(float(self.x[k]), float(self.y[k]), float(self.t[k]), int(self.p[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def slice(self, start: int, stop: int) -> "EventSet":
        return EventSet(self.x[start:stop], self.y[start:stop], self.t[start:stop], self.p[start:stop])

    def check_geometry(self, geometry: SensorGeometry) -> None:
        if len(self) == 0:
            return
        if (self.x.min() < 0 or self.y.min() < 0 or self.x.max() >= geometry.width
                or self.y.max() >= geometry.height):
            raise InvalidInputError("event coordinates outside the sensor")


@dataclass(eq=False)
class FlowField:
    """Velocity grid in px/s, ``vx`` and ``vy`` of shape (height_cells, width_cells)."""

    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        self.vx = np.asarray(self.vx, dtype=np.float64)
        self.vy = np.asarray(self.vy, dtype=np.float64)
        if self.vx.ndim != 2 or self.vx.shape != self.vy.shape:
            raise InvalidInputError("flow channels must be 2-D arrays of equal shape")

    @classmethod
    def zeros(cls, height_cells: int, width_cells: int) -> "FlowField":
        return cls(np.zeros((height_cells, width_cells)), np.zeros((height_cells, width_cells)))

    @classmethod
    def constant(cls, vx: float, vy: float, height_cells: int, width_cells: int) -> "FlowField":
        shape = (height_cells, width_cells)
        return cls(np.full(shape, float(vx)), np.full(shape, float(vy)))

    @classmethod
    def from_vector(cls, vec: np.ndarray, height_cells: int, width_cells: int) -> "FlowField":
        vec = np.asarray(vec, dtype=np.float64)
        n = height_cells * width_cells
        return cls(vec[:n].reshape(height_cells, width_cells).copy(),
                   vec[n:].reshape(height_cells, width_cells).copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.vx.ravel(), self.vy.ravel()])

    @property
    def shape(self) -> tuple[int, int]:
        return self.vx.shape

    @property
    def height_cells(self) -> int:
        return self.vx.shape[0]

    @property
    def width_cells(self) -> int:
        return self.vx.shape[1]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.vx)) and np.all(np.isfinite(self.vy)))

    def copy(self) -> "FlowField":
        return FlowField(self.vx.copy(), self.vy.copy())


@dataclass(frozen=True)
class IweConfig:
    sigma: float = 1.0
    support_radius: float = 3.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInputError("sigma must be positive")
        if self.support_radius < 3.0 * self.sigma:
            raise InvalidInputError("support_radius must be at least 3 sigma")

    @property
    def kernel_radius(self) -> float:
        # Taper reaches zero half a pixel past the last stamped pixel, so
        # an event at a pixel centre touches a (2r+1)^2 stamp.
        return self.support_radius + 0.5


@dataclass(eq=False)
class IweImage:
    pixels: np.ndarray
    t_ref: float = 0.0


@dataclass
class EventSampler:
    """Sparse map from a flow grid's cells to per-event velocities.

    The grid is tiled to sensor resolution by repetition and then read
    bilinearly at each event's original coordinate, so every event reads
    at most four cells. ``cells``/``weights`` have shape (N, 4).
    """

    cells: np.ndarray
    weights: np.ndarray
    grid_shape: tuple[int, int]

    @classmethod
    def build(cls, events: EventSet, grid_shape: tuple[int, int],
              geometry: SensorGeometry) -> "EventSampler":
        gh, gw = grid_shape
        height, width = geometry.shape
        x = np.clip(events.x, 0.0, width - 1.0)
        y = np.clip(events.y, 0.0, height - 1.0)
        x0 = np.floor(x).astype(np.int64)
        y0 = np.floor(y).astype(np.int64)
        fx = x - x0
        fy = y - y0
        x1 = np.minimum(x0 + 1, width - 1)
        y1 = np.minimum(y0 + 1, height - 1)
        cx0, cx1 = (x0 * gw) // width, (x1 * gw) // width
        cy0, cy1 = (y0 * gh) // height, (y1 * gh) // height
        cells = np.stack([cy0 * gw + cx0, cy0 * gw + cx1, cy1 * gw + cx0, cy1 * gw + cx1], axis=1)
        weights = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy], axis=1)
        return cls(cells, weights, (gh, gw))

    def velocities(self, flow: FlowField) -> tuple[np.ndarray, np.ndarray]:
        if flow.shape != self.grid_shape:
            raise InvalidInputError(f"flow grid {flow.shape} does not match sampler {self.grid_shape}")
        vx = np.sum(flow.vx.ravel()[self.cells] * self.weights, axis=1)
        vy = np.sum(flow.vy.ravel()[self.cells] * self.weights, axis=1)
        return vx, vy

    def scatter(self, gx: np.ndarray, gy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Adjoint of :meth:`velocities`: per-event gradients to per-cell gradients."""
        n = self.grid_shape[0] * self.grid_shape[1]
        cx = np.bincount(self.cells.ravel(), weights=(self.weights * gx[:, None]).ravel(), minlength=n)
        cy = np.bincount(self.cells.ravel(), weights=(self.weights * gy[:, None]).ravel(), minlength=n)
        return cx.reshape(self.grid_shape), cy.reshape(self.grid_shape)


def warp_coords(events: EventSet, vx: np.ndarray, vy: np.ndarray, t_ref: float):
    dt = t_ref - events.t
    return events.x + vx * dt, events.y + vy * dt


def warp_events(events: EventSet, flow: FlowField, t_ref: float,
                geometry: SensorGeometry | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Transport events to ``t_ref`` along straight lines.

    ``flow`` is a sensor-resolution field; each event reads its velocity
    bilinearly at its original coordinate. Warped coordinates may leave
    the sensor.
    """
    if not flow.is_finite():
        raise InvalidInputError("flow contains non-finite entries")
    if geometry is None:
        geometry = SensorGeometry(flow.width_cells, flow.height_cells)
    elif flow.shape != geometry.shape:
        raise InvalidInputError("warp_events expects a sensor-resolution flow")
    vx, vy = EventSampler.build(events, flow.shape, geometry).velocities(flow)
    return warp_coords(events, vx, vy, t_ref)


def build_iwe(warped, geometry: SensorGeometry, cfg: IweConfig = IweConfig(),
              t_ref: float = 0.0) -> IweImage:
    xs, ys = warped
    img = kernels.splat(xs, ys, geometry.height, geometry.width, cfg.sigma, cfg.kernel_radius)
    return IweImage(img, t_ref)


def build_iue(events: EventSet, geometry: SensorGeometry, cfg: IweConfig = IweConfig()) -> IweImage:
    """Image of unwarped events (the zero-flow IWE)."""
    return build_iwe((events.x, events.y), geometry, cfg, events.t0 if len(events) else 0.0)
