"""Synthetic translating scenes with exact ground truth.

A pattern is rendered analytically (so sub-pixel shifts are exact) and
moved at constant velocity. Each pixel keeps the log intensity at its
last event and fires whenever the current log intensity moves at least
one contrast threshold away, with timestamps interpolated inside the
rendering step.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .edges import EdgeConfig, GrayImage, extract_edges
from .errors import InvalidInputError
from .events import EventSet, SensorGeometry
from .data import Sample

PATTERNS = ("bar", "checkerboard", "texture")


class NoEventsError(InvalidInputError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    pattern: str = "texture"
    velocity: tuple[float, float] = (30.0, -20.0)  # px/s
    duration: float = 0.1
    contrast_threshold: float = 0.05
    width: int = 64
    height: int = 64
    seed: int = 0
    n_shapes: int = 40
    edge_softness: float = 0.35  # px, logistic scale of shape boundaries
    noise_rate: float = 0.0  # spurious events per pixel per second
    max_step_px: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        if self.pattern not in PATTERNS:
            raise InvalidInputError(f"unknown pattern {self.pattern!r}")
        if not self.contrast_threshold > 0:
            raise InvalidInputError("contrast threshold must be positive")
        if not self.duration > 0:
            raise InvalidInputError("duration must be positive")
        SensorGeometry(self.width, self.height)
        travel = float(np.hypot(*self.velocity)) * self.duration
        if travel >= min(self.width, self.height) / 2:
            raise InvalidInputError("pattern would travel more than half the sensor")

    @property
    def geometry(self) -> SensorGeometry:
        return SensorGeometry(self.width, self.height)

    @property
    def displacement(self) -> tuple[float, float]:
        return (self.velocity[0] * self.duration, self.velocity[1] * self.duration)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["velocity"] = list(self.velocity)
        return d


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class _Pattern:
    """Analytic intensity I(X, Y) in scene coordinates, values in (0, 1]."""

    def __init__(self, spec: SceneSpec):
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        w, h = spec.width, spec.height
        dx, dy = spec.displacement
        # cover everything the sensor sees over the window
        self.x_lo, self.x_hi = min(0.0, -dx) - 8, w + max(0.0, -dx) + 8
        self.y_lo, self.y_hi = min(0.0, -dy) - 8, h + max(0.0, -dy) + 8
        if spec.pattern == "texture":
            n = spec.n_shapes
            self.cx = rng.uniform(self.x_lo, self.x_hi, n)
            self.cy = rng.uniform(self.y_lo, self.y_hi, n)
            self.r = rng.uniform(3.0, 9.0, n)
            self.square = rng.random(n) < 0.5
            self.level = rng.uniform(0.15, 1.0, n)

    def __call__(self, X, Y):
        s = self.spec
        soft = s.edge_softness
        if s.pattern == "bar":
            cx = 0.5 * s.width
            m = _sigmoid((4.0 - np.abs(X - cx)) / soft)
            return 0.2 + 0.6 * m
        if s.pattern == "checkerboard":
            period = 8.0
            # smooth square wave via products of soft steps
            sx = np.sin(np.pi * X / period)
            sy = np.sin(np.pi * Y / period)
            z = sx * sy * period / (np.pi * soft)
            return 0.2 + 0.6 * _sigmoid(z)
        img = np.full(np.broadcast(X, Y).shape, 0.3)
        for k in range(len(self.r)):
            ddx, ddy = X - self.cx[k], Y - self.cy[k]
            if self.square[k]:
                d = np.maximum(np.abs(ddx), np.abs(ddy))
            else:
                d = np.hypot(ddx, ddy)
            m = _sigmoid((self.r[k] - d) / soft)
            img = img * (1.0 - m) + self.level[k] * m
        return img


def render_frame(spec: SceneSpec, t: float, pattern: _Pattern | None = None) -> np.ndarray:
    """Intensity image (H, W) in (0, 1] at time ``t``."""
    pattern = pattern or _Pattern(spec)
    ys, xs = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    vx, vy = spec.velocity
    return pattern(xs - vx * t, ys - vy * t)


def generate_events(spec: SceneSpec) -> EventSet:
    pattern = _Pattern(spec)
    speed = float(np.hypot(*spec.velocity))
    n_steps = max(1, int(np.ceil(speed * spec.duration / spec.max_step_px)))
    times = np.linspace(0.0, spec.duration, n_steps + 1)
    c = spec.contrast_threshold
    log_prev = np.log(render_frame(spec, 0.0, pattern))
    log_ref = log_prev.copy()
    chunks = []
    for k in range(1, n_steps + 1):
        t_a, t_b = times[k - 1], times[k]
        log_cur = np.log(render_frame(spec, t_b, pattern))
        diff = log_cur - log_ref
        n_cross = np.floor(np.abs(diff) / c).astype(np.int64)
        iy, ix = np.nonzero(n_cross)
        if iy.size:
            sign = np.sign(diff[iy, ix])
            counts = n_cross[iy, ix]
            rep = np.repeat(np.arange(iy.size), counts)
            j = np.concatenate([np.arange(1, m + 1) for m in counts])
            levels = log_ref[iy, ix][rep] + sign[rep] * j * c
            a = log_prev[iy, ix][rep]
            b = log_cur[iy, ix][rep]
            frac = np.clip((levels - a) / (b - a), 0.0, 1.0)
            chunks.append((t_a + frac * (t_b - t_a), ix[rep], iy[rep], sign[rep]))
            log_ref[iy, ix] += sign * counts * c
        log_prev = log_cur
    if spec.noise_rate > 0:
        rng = np.random.default_rng(spec.seed + 1)
        n_noise = rng.poisson(spec.noise_rate * spec.width * spec.height * spec.duration)
        chunks.append((rng.uniform(0, spec.duration, n_noise),
                       rng.integers(0, spec.width, n_noise), rng.integers(0, spec.height, n_noise),
                       rng.choice([-1.0, 1.0], n_noise)))
    if not chunks:
        return EventSet(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int8))
    t = np.concatenate([ch[0] for ch in chunks])
    x = np.concatenate([ch[1] for ch in chunks]).astype(np.float64)
    y = np.concatenate([ch[2] for ch in chunks]).astype(np.float64)
    p = np.concatenate([ch[3] for ch in chunks]).astype(np.int8)
    order = np.lexsort((x, y, t))
    return EventSet(x[order], y[order], t[order], p[order])


def generate_scene(spec: SceneSpec, edge_cfg: EdgeConfig | None = EdgeConfig(),
                   n_frames: int = 3) -> Sample:
    """Render events, frames (and their edges) and exact ground truth.

    Ground truth is the window displacement ``velocity * duration``, valid
    at pixels that fired at least one event.
    """
    events = generate_events(spec)
    if len(events) == 0:
        raise NoEventsError("scene produced no events (static or textureless)")
    pattern = _Pattern(spec)
    frame_times = np.linspace(0.0, spec.duration, n_frames)
    frames = [GrayImage(255.0 * render_frame(spec, float(t), pattern), float(t)) for t in frame_times]
    edges = [extract_edges(f, edge_cfg) for f in frames] if edge_cfg is not None else []
    geo = spec.geometry
    mask = np.zeros(geo.shape, dtype=bool)
    mask[events.y.astype(int), events.x.astype(int)] = True
    gt = np.zeros(geo.shape + (2,))
    gt[..., 0], gt[..., 1] = spec.displacement
    return Sample(events, geo, frames, edges, gt, mask, 0.0, spec.duration)
