"""Contrast, correlation and smoothness objectives over a flow grid.

All objectives are maximized. Relative forms are normalized by the same
quantity evaluated on the image of unwarped events, so the zero flow
scores ``f_rel = 1`` and ``g_rel = -1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .edges import EdgeImage
from .errors import DegenerateDenominatorError, InvalidInputError
from .events import (EventSampler, EventSet, FlowField, IweConfig, IweImage,
                     SensorGeometry, build_iue, warp_coords)


@dataclass
class ReferenceTimes:
    contrast_refs: list[float]
    correlation_refs: list[tuple[float, EdgeImage]] = field(default_factory=list)

    @classmethod
    def for_window(cls, events: EventSet, edges: list[EdgeImage] | None = None,
                   t0: float | None = None, t1: float | None = None) -> "ReferenceTimes":
        """Frame timestamps inside the window when present, else t0/t_mid/t1.

        The window defaults to the span of ``events``.
        """
        edges = list(edges or [])
        t0 = events.t0 if t0 is None else t0
        t1 = events.t1 if t1 is None else t1
        inside = [e.t for e in edges if t0 <= e.t <= t1]
        contrast = inside if inside else [t0, 0.5 * (t0 + t1), t1]
        return cls(contrast, [(e.t, e) for e in edges])


@dataclass(frozen=True)
class ObjectiveConfig:
    alpha: float = 20.0
    beta: float = 35.0
    gamma: float = 0.0025
    iwe: IweConfig = IweConfig()

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise InvalidInputError("objective weights must be non-negative")
        if not self.alpha + self.beta > 0:
            raise InvalidInputError("alpha + beta must be positive")


def _pixels(img) -> np.ndarray:
    return np.asarray(getattr(img, "pixels", img), dtype=np.float64)


def variance_contrast(iwe) -> float:
    p = _pixels(iwe)
    return float(np.mean((p - p.mean()) ** 2))


def _image_gradient(p: np.ndarray):
    # central differences with replicated borders
    q = np.pad(p, 1, mode="edge")
    gx = 0.5 * (q[1:-1, 2:] - q[1:-1, :-2])
    gy = 0.5 * (q[2:, 1:-1] - q[:-2, 1:-1])
    return gx, gy


def _image_gradient_adjoint(rx: np.ndarray, ry: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rx)
    out[:, 1:] += 0.5 * rx[:, :-1]
    out[:, -1] += 0.5 * rx[:, -1]
    out[:, :-1] -= 0.5 * rx[:, 1:]
    out[:, 0] -= 0.5 * rx[:, 0]
    out[1:, :] += 0.5 * ry[:-1, :]
    out[-1, :] += 0.5 * ry[-1, :]
    out[:-1, :] -= 0.5 * ry[1:, :]
    out[0, :] -= 0.5 * ry[0, :]
    return out


def gradient_magnitude_contrast(iwe) -> float:
    """Mean squared magnitude of the image gradient."""
    p = _pixels(iwe)
    if p.ndim != 2 or p.shape[0] < 3 or p.shape[1] < 3:
        raise InvalidInputError("gradient magnitude needs an image of at least 3x3")
    gx, gy = _image_gradient(p)
    return float(np.mean(gx * gx + gy * gy))


def _gradient_magnitude_and_adjoint(p: np.ndarray):
    gx, gy = _image_gradient(p)
    value = float(np.mean(gx * gx + gy * gy))
    return value, _image_gradient_adjoint(gx, gy) * (2.0 / p.size)


def _max_normalize(p: np.ndarray):
    m = p.max() if p.size else 0.0
    if m > 0:
        return p / m, m
    return p, 0.0


def mse_correlation(iwe, edge) -> float:
    """MSE between max-normalized images; lower means better agreement."""
    a, b = _pixels(iwe), _pixels(edge)
    if a.shape != b.shape:
        raise InvalidInputError(f"image shapes differ: {a.shape} vs {b.shape}")
    na, _ = _max_normalize(a)
    nb, _ = _max_normalize(b)
    return float(np.mean((na - nb) ** 2))


def _mse_and_adjoint(p: np.ndarray, edge_norm: np.ndarray):
    """MSE against a pre-normalized edge image and dMSE/dp."""
    n, m = _max_normalize(p)
    r = n - edge_norm
    value = float(np.mean(r * r))
    scale = 2.0 / p.size
    if m == 0:
        return value, scale * r
    adj = scale * r / m
    # the maximum pixel also sets the normalization
    k = int(np.argmax(p))
    adj.flat[k] -= scale * float(np.sum(r * p)) / (m * m)
    return value, adj


def tv_regularizer(flow: FlowField) -> float:
    """Negative anisotropic L1 total variation of both channels."""
    total = 0.0
    for c in (flow.vx, flow.vy):
        total += np.abs(np.diff(c, axis=1)).sum() + np.abs(np.diff(c, axis=0)).sum()
    return -float(total)


def _tv_gradient(c: np.ndarray) -> np.ndarray:
    g = np.zeros_like(c)
    sx = np.sign(np.diff(c, axis=1))
    sy = np.sign(np.diff(c, axis=0))
    g[:, 1:] -= sx
    g[:, :-1] += sx
    g[1:, :] -= sy
    g[:-1, :] += sy
    return g


class Problem:
    """One event window with its references, ready for repeated evaluation.

    Caches the zero-flow denominators, normalized edge images and the
    per-grid event samplers so each objective call only warps, splats
    and reduces.
    """

    def __init__(self, events: EventSet, refs: ReferenceTimes, geometry: SensorGeometry,
                 cfg: ObjectiveConfig = ObjectiveConfig()):
        if len(events) == 0:
            raise InvalidInputError("objective needs at least one event")
        if not refs.contrast_refs and cfg.alpha > 0:
            raise InvalidInputError("at least one contrast reference time is required")
        if cfg.beta > 0 and not refs.correlation_refs:
            raise InvalidInputError("beta > 0 requires correlation reference edge images")
        self.events = events
        self.refs = refs
        self.geometry = geometry
        self.cfg = cfg
        self._samplers: dict[tuple[int, int], EventSampler] = {}
        self._iue = build_iue(events, geometry, cfg.iwe).pixels
        self._g0 = None
        self._edges = None
        self._mse0 = None

    # lazily computed denominators, so an events-only problem never
    # touches correlation terms
    @property
    def g0(self) -> float:
        if self._g0 is None:
            g0 = gradient_magnitude_contrast(self._iue)
            if g0 == 0:
                raise DegenerateDenominatorError("contrast of the unwarped image is zero")
            self._g0 = g0
        return self._g0

    @property
    def mse0(self) -> list[float]:
        if self._mse0 is None:
            self._edges = []
            self._mse0 = []
            for t, edge in self.refs.correlation_refs:
                e = _pixels(edge)
                if e.shape != self._iue.shape:
                    raise InvalidInputError("edge image does not match the sensor geometry")
                en, _ = _max_normalize(e)
                m0 = _mse_and_adjoint(self._iue, en)[0]
                if m0 == 0:
                    raise DegenerateDenominatorError(f"zero-flow correlation at t={t} is zero")
                self._edges.append(en)
                self._mse0.append(m0)
        return self._mse0

    def sampler(self, shape: tuple[int, int]) -> EventSampler:
        s = self._samplers.get(shape)
        if s is None:
            s = self._samplers[shape] = EventSampler.build(self.events, shape, self.geometry)
        return s

    def iwe(self, flow: FlowField, t_ref: float) -> IweImage:
        vx, vy = self.sampler(flow.shape).velocities(flow)
        xs, ys = warp_coords(self.events, vx, vy, t_ref)
        img = kernels.splat(xs, ys, self.geometry.height, self.geometry.width,
                            self.cfg.iwe.sigma, self.cfg.iwe.kernel_radius)
        return IweImage(img, t_ref)

    def _terms(self, flow: FlowField, need_grad: bool, alpha: float, beta: float):
        """Weighted sum of contrast and correlation terms, optionally with gradient.

        Returns (f_rel, g_rel, weighted value, grad_vx, grad_vy); the
        gradient is of ``alpha * f_rel + beta * g_rel``.
        """
        if not flow.is_finite():
            raise InvalidInputError("flow contains non-finite entries")
        sampler = self.sampler(flow.shape)
        vx, vy = sampler.velocities(flow)
        ev = self.events
        height, width = self.geometry.shape
        sigma, radius = self.cfg.iwe.sigma, self.cfg.iwe.kernel_radius

        # group terms sharing a reference time so each IWE is splatted once
        plan: dict[float, list] = {}
        if alpha > 0:
            for t in self.refs.contrast_refs:
                plan.setdefault(float(t), []).append(("c", None))
        if beta > 0:
            self.mse0  # validates and caches edges
            for j, (t, _) in enumerate(self.refs.correlation_refs):
                plan.setdefault(float(t), []).append(("m", j))

        n_c = len(self.refs.contrast_refs)
        n_m = len(self.refs.correlation_refs)
        f_sum = 0.0
        g_sum = 0.0
        gx_ev = np.zeros(len(ev)) if need_grad else None
        gy_ev = np.zeros(len(ev)) if need_grad else None
        for t_ref, terms in plan.items():
            xs, ys = warp_coords(ev, vx, vy, t_ref)
            img = kernels.splat(xs, ys, height, width, sigma, radius)
            adj = np.zeros_like(img) if need_grad else None
            for kind, j in terms:
                if kind == "c":
                    g, a = _gradient_magnitude_and_adjoint(img)
                    f_sum += g / self.g0
                    if need_grad:
                        adj += (alpha / (n_c * self.g0)) * a
                else:
                    m, a = _mse_and_adjoint(img, self._edges[j])
                    g_sum += m / self._mse0[j]
                    if need_grad:
                        adj -= (beta / (n_m * self._mse0[j])) * a
            if need_grad:
                dx, dy = kernels.splat_adjoint(xs, ys, adj, sigma, radius)
                dt = t_ref - ev.t
                gx_ev += dx * dt
                gy_ev += dy * dt

        f_rel = f_sum / n_c if alpha > 0 else 0.0
        g_rel = -g_sum / n_m if beta > 0 else 0.0
        value = alpha * f_rel + beta * g_rel
        if not need_grad:
            return f_rel, g_rel, value, None, None
        cx, cy = sampler.scatter(gx_ev, gy_ev)
        return f_rel, g_rel, value, cx, cy

    def relative_contrast(self, flow: FlowField) -> float:
        return self._terms(flow, False, 1.0, 0.0)[0]

    def relative_correlation(self, flow: FlowField) -> float:
        if not self.refs.correlation_refs:
            raise InvalidInputError("no correlation reference edge images")
        return self._terms(flow, False, 0.0, 1.0)[1]

    def value(self, flow: FlowField) -> float:
        cfg = self.cfg
        v = self._terms(flow, False, cfg.alpha, cfg.beta)[2]
        if cfg.gamma > 0:
            v += cfg.gamma * tv_regularizer(flow)
        return v

    def value_and_grad(self, flow: FlowField) -> tuple[float, FlowField]:
        cfg = self.cfg
        _, _, v, cx, cy = self._terms(flow, True, cfg.alpha, cfg.beta)
        if cfg.gamma > 0:
            v += cfg.gamma * tv_regularizer(flow)
            cx = cx + cfg.gamma * _tv_gradient(flow.vx)
            cy = cy + cfg.gamma * _tv_gradient(flow.vy)
        return v, FlowField(cx, cy)

    def vector_objective(self, shape: tuple[int, int]):
        """``fun(vec) -> (value, grad_vec)`` over flattened flows of ``shape``."""
        h, w = shape

        def fun(vec):
            v, g = self.value_and_grad(FlowField.from_vector(vec, h, w))
            return v, g.to_vector()

        return fun


def relative_contrast(events, flow, refs, geometry, cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    return Problem(events, refs, geometry, _only(cfg, beta=0.0)).relative_contrast(flow)


def relative_correlation(events, flow, refs, geometry, cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    return Problem(events, refs, geometry, cfg).relative_correlation(flow)


def hybrid_objective(events, flow, refs, geometry, cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    return Problem(events, refs, geometry, cfg).value(flow)


def objective_gradient(events, flow, refs, geometry, cfg: ObjectiveConfig = ObjectiveConfig()) -> FlowField:
    return Problem(events, refs, geometry, cfg).value_and_grad(flow)[1]


def _only(cfg: ObjectiveConfig, **kw) -> ObjectiveConfig:
    d = dict(alpha=cfg.alpha, beta=cfg.beta, gamma=cfg.gamma, iwe=cfg.iwe)
    d.update(kw)
    if d["alpha"] + d["beta"] <= 0:
        d["alpha"] = 1.0
    return ObjectiveConfig(**d)
