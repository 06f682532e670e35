"""BFGS maximizer with a strong-Wolfe line search."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, SolverFailure


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    gradient_tolerance: float = 1e-6
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search: int = 30

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")
        if not self.gradient_tolerance > 0:
            raise InvalidInputError("gradient_tolerance must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise InvalidInputError("line search requires 0 < c1 < c2 < 1")


@dataclass
class BfgsResult:
    x: np.ndarray
    value: float
    iterations: int
    evaluations: int
    converged: bool
    message: str


class _Counter:
    """Wraps the objective, tracks the best finite point and raises on non-finite values."""

    def __init__(self, fun, x0, v0):
        self.fun = fun
        self.n = 0
        self.last_x = x0
        self.last_v = v0

    def __call__(self, x):
        self.n += 1
        v, g = self.fun(x)
        v = float(v)
        g = np.asarray(g, dtype=np.float64)
        if not (np.isfinite(v) and np.all(np.isfinite(g))):
            raise SolverFailure("objective became non-finite", self.last_x, self.last_v)
        return v, g


def _line_search(fun, x, v, g, p, a_init, cfg: SolverConfig):
    """Strong-Wolfe search along ascent direction ``p``.

    Returns (step, (x_new, v_new, g_new)) or (None, None).
    """
    d0 = -float(g @ p)  # derivative of -f along p
    if d0 >= 0:
        return None, None
    cache = {}

    def phi(a):
        xa = x + a * p
        va, ga = fun(xa)
        cache[a] = (xa, va, ga)
        return -va, -float(ga @ p), (xa, va, ga)

    p0 = -v
    a_prev, p_prev, d_prev = 0.0, p0, d0
    a = a_init
    budget = cfg.max_line_search
    for i in range(budget):
        pa, da, out = phi(a)
        if pa > p0 + cfg.c1 * a * d0 or (i > 0 and pa >= p_prev):
            return _finish(phi, cache, a_prev, a, p_prev, d_prev, pa, p0, d0, cfg, budget - i - 1)
        if abs(da) <= -cfg.c2 * d0:
            return a, out
        if da >= 0:
            return _finish(phi, cache, a, a_prev, pa, da, p_prev, p0, d0, cfg, budget - i - 1)
        a_prev, p_prev, d_prev = a, pa, da
        a = 2.0 * a
    # ran out of expansions: accept the last point, it satisfies sufficient increase
    return a_prev, cache.get(a_prev)


def _finish(phi, cache, a_lo, a_hi, p_lo, d_lo, p_hi, p0, d0, cfg, budget):
    a_best = a_lo
    for _ in range(max(budget, 1)):
        da_span = a_hi - a_lo
        denom = 2.0 * (p_hi - p_lo - d_lo * da_span)
        a = a_lo - d_lo * da_span * da_span / denom if denom > 0 else a_lo + 0.5 * da_span
        lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
        margin = 0.1 * (hi - lo)
        if not (lo + margin <= a <= hi - margin):
            a = 0.5 * (a_lo + a_hi)
        pa, da, out = phi(a)
        if pa > p0 + cfg.c1 * a * d0 or pa >= p_lo:
            a_hi, p_hi = a, pa
        else:
            if abs(da) <= -cfg.c2 * d0:
                return a, out
            if da * (a_hi - a_lo) >= 0:
                a_hi, p_hi = a_lo, p_lo
            a_lo, p_lo, d_lo = a, pa, da
            a_best = a_lo
        if abs(a_hi - a_lo) <= 1e-14 * max(1.0, abs(a_lo)):
            break
    if a_best > 0 and a_best in cache:
        # sufficient increase holds even though curvature was not met
        return a_best, cache[a_best]
    return None, None


def bfgs_maximize(fun, x0, cfg: SolverConfig = SolverConfig()) -> BfgsResult:
    """Maximize ``fun`` where ``fun(x) -> (value, gradient)``.

    Every accepted step satisfies sufficient increase, so the returned
    value is never below the initial one. Raises :class:`SolverFailure`
    when the objective turns non-finite; ``last_x`` is the last good iterate.
    """
    x = np.array(x0, dtype=np.float64, copy=True).ravel()
    v, g = fun(x)
    v = float(v)
    g = np.asarray(g, dtype=np.float64)
    if not (np.isfinite(v) and np.all(np.isfinite(g))):
        raise SolverFailure("objective is non-finite at the initial point", None, None)
    counter = _Counter(fun, x, v)
    n = x.size
    hinv = np.eye(n)
    first = True
    it = 0
    message = "maximum iterations reached"
    converged = False
    while True:
        if np.max(np.abs(g)) <= cfg.gradient_tolerance:
            converged = True
            message = "gradient tolerance reached"
            break
        if it >= cfg.max_iterations:
            break
        p = hinv @ g
        if float(g @ p) <= 0:
            # lost ascent direction, restart from steepest ascent
            hinv = np.eye(n)
            first = True
            p = g.copy()
        a_init = min(1.0, 1.0 / np.linalg.norm(p)) if first else 1.0
        step, out = _line_search(counter, x, v, g, p, a_init, cfg)
        it += 1
        if step is None:
            message = "line search failed to increase the objective"
            converged = bool(np.max(np.abs(g)) <= 10 * cfg.gradient_tolerance)
            break
        x_new, v_new, g_new = out
        s = x_new - x
        y = g - g_new  # gradient change of the minimized function -f
        x, v, g = x_new, v_new, g_new
        counter.last_x, counter.last_v = x, v
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                hinv = np.eye(n) * (sy / float(y @ y))
                first = False
            rho = 1.0 / sy
            hy = hinv @ y
            hinv = (hinv - rho * (np.outer(s, hy) + np.outer(hy, s))
                    + (rho * rho * float(y @ hy) + rho) * np.outer(s, s))
    return BfgsResult(x, v, it, counter.n + 1, converged, message)
