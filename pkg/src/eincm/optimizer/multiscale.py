"""Coarse-to-fine estimation with pre-handover blending.

Each pyramid level runs optimize -> handover -> upsample. The handover
blends the level's optimized grid with the previous sample's finest
solution, downscaled to the level's resolution, using a fixed or solved
weight.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidInputError, SolverFailure
from ..events import FlowField
from ..objectives import Problem
from . import resample
from .bfgs import SolverConfig, bfgs_maximize

log = logging.getLogger(__name__)

STRATEGIES = ("FHO", "SHO", "FSHO")


@dataclass(frozen=True)
class PyramidSpec:
    levels: tuple[tuple[int, int], ...] = ((1, 1), (2, 2), (4, 4), (8, 8), (16, 16))

    def __post_init__(self):
        levels = tuple(tuple(int(v) for v in lv) for lv in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise InvalidInputError("pyramid needs at least one level")
        for (h0, w0), (h1, w1) in zip(levels, levels[1:]):
            if not (h1 > h0 and w1 > w0):
                raise InvalidInputError("pyramid resolutions must strictly increase")
            if h1 % h0 or w1 % w0 or h1 // h0 != w1 // w0:
                raise InvalidInputError("consecutive levels must differ by one integer factor")

    def __len__(self):
        return len(self.levels)

    def index(self, position: int) -> int:
        """Level index (finest = 0) of the ``position``-th level, coarse to fine."""
        return len(self.levels) - 1 - position


@dataclass(frozen=True)
class HandoverConfig:
    strategy: str = "FSHO"
    fixed_weight: float = 0.5
    solve_levels: frozenset = frozenset({1, 0})
    clamp_solved: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidInputError(f"unknown handover strategy {self.strategy!r}")
        if not 0.0 <= self.fixed_weight <= 1.0:
            raise InvalidInputError("fixed handover weight must lie in [0, 1]")
        object.__setattr__(self, "solve_levels", frozenset(int(v) for v in self.solve_levels))

    def solves(self, level: int) -> bool:
        if self.strategy == "FHO":
            return False
        if self.strategy == "SHO":
            return True
        return level in self.solve_levels


@dataclass
class LevelDiagnostics:
    level: int
    resolution: tuple[int, int]
    iterations: int
    objective_before: float
    objective_after: float
    objective_final: float
    w_ho: float | None
    solved: bool
    converged: bool
    message: str

    def to_json(self) -> str:
        d = asdict(self)
        d["resolution"] = list(self.resolution)
        return json.dumps(d, sort_keys=True)


@dataclass
class MultiscaleResult:
    flow: FlowField
    levels: list[LevelDiagnostics] = field(default_factory=list)
    failed: bool = False

    def diagnostics_lines(self) -> str:
        return "".join(d.to_json() + "\n" for d in self.levels)


def handover(theta_current: FlowField, theta_prev_down: FlowField, w_ho: float) -> FlowField:
    """``w_ho * theta_prev_down + (1 - w_ho) * theta_current``."""
    if theta_current.shape != theta_prev_down.shape:
        raise InvalidInputError(
            f"handover resolution mismatch: {theta_current.shape} vs {theta_prev_down.shape}")
    if w_ho == 0:
        return theta_current.copy()
    if w_ho == 1:
        return theta_prev_down.copy()
    return FlowField(w_ho * theta_prev_down.vx + (1 - w_ho) * theta_current.vx,
                     w_ho * theta_prev_down.vy + (1 - w_ho) * theta_current.vy)


def solve_handover_weight(theta_current: FlowField, theta_prev_down: FlowField, problem: Problem,
                          solver: SolverConfig = SolverConfig(), clamp: bool = False,
                          w_init: float = 0.5) -> tuple[float, bool]:
    """Maximize the objective over the blending weight, starting at ``w_init``.

    Returns ``(w, converged)``. On solver failure the weight falls back to
    ``w_init`` and ``converged`` is False.
    """
    if theta_current.shape != theta_prev_down.shape:
        raise InvalidInputError("handover resolution mismatch")
    direction = theta_prev_down.to_vector() - theta_current.to_vector()

    def fun(w):
        blend = handover(theta_current, theta_prev_down, float(w[0]))
        v, g = problem.value_and_grad(blend)
        return v, np.array([g.to_vector() @ direction])

    try:
        res = bfgs_maximize(fun, np.array([w_init]), solver)
    except (SolverFailure, ArithmeticError) as exc:
        log.warning("handover weight solve failed (%s); using %.2f", exc, w_init)
        return w_init, False
    w = float(res.x[0])
    if clamp:
        w = min(1.0, max(0.0, w))
    return w, res.converged


def _optimize_level(problem: Problem, init: FlowField, solver: SolverConfig):
    h, w = init.shape
    fun = problem.vector_objective((h, w))
    res = bfgs_maximize(fun, init.to_vector(), solver)
    return FlowField.from_vector(res.x, h, w), res


def multiscale_estimate(problem: Problem, theta_prev: FlowField | None = None,
                        pyramid: PyramidSpec = PyramidSpec(),
                        ho: HandoverConfig = HandoverConfig(),
                        solver: SolverConfig = SolverConfig()) -> MultiscaleResult:
    """Estimate the finest-level flow grid for one sample.

    ``theta_prev`` is the previous sample's finest solution; when given,
    it initializes the coarsest level and drives the handover at every level.
    """
    levels = pyramid.levels
    if theta_prev is not None and theta_prev.shape != levels[-1]:
        raise InvalidInputError("previous solution must be at the finest pyramid resolution")
    if theta_prev is not None:
        theta = resample.downscale_lanczos3(theta_prev, levels[0])
    else:
        theta = FlowField.zeros(*levels[0])

    result = MultiscaleResult(theta)
    for pos, shape in enumerate(levels):
        level = pyramid.index(pos)
        before = problem.value(theta)
        try:
            optimized, res = _optimize_level(problem, theta, solver)
            iterations, converged, message = res.iterations, res.converged, res.message
        except SolverFailure as exc:
            log.error("solver failed at level %d: %s", level, exc)
            if exc.last_x is not None:
                theta = FlowField.from_vector(exc.last_x, *shape)
            result.failed = True
            result.flow = theta
            result.levels.append(LevelDiagnostics(level, shape, 0, before, before, before, None,
                                                  False, False, str(exc)))
            return result
        after = problem.value(optimized)

        w_ho = None
        solved = False
        if theta_prev is not None:
            prev_down = resample.downscale_lanczos3(theta_prev, shape)
            if ho.solves(level):
                w_ho, _ = solve_handover_weight(optimized, prev_down, problem, solver,
                                                ho.clamp_solved)
                solved = True
            else:
                w_ho = ho.fixed_weight
            optimized = handover(optimized, prev_down, w_ho)
        final = problem.value(optimized) if w_ho is not None else after

        diag = LevelDiagnostics(level, shape, iterations, before, after, final, w_ho, solved,
                                converged, message)
        result.levels.append(diag)
        log.debug(diag.to_json())

        theta = optimized
        if pos + 1 < len(levels):
            theta = resample.upscale_repeat(theta, levels[pos + 1][0] // shape[0])
    result.flow = theta
    return result
