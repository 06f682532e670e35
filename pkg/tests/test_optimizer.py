import numpy as np
import pytest
from scipy.optimize import minimize

from eincm.errors import InvalidInputError, SolverFailure
from eincm.optimizer.resample import lanczos3_matrix
from eincm.events import FlowField, SensorGeometry
from eincm.objectives import ObjectiveConfig, Problem, ReferenceTimes
from eincm.optimizer import (HandoverConfig, PyramidSpec, SolverConfig, bfgs_maximize,
                             downscale_lanczos3, handover, multiscale,
                             multiscale_estimate, solve_handover_weight,
                             upscale_bilinear_to_sensor, upscale_repeat)

SMALL_PYRAMID = PyramidSpec(((1, 1), (2, 2), (4, 4)))
FAST = SolverConfig(max_iterations=30)


def _neg_rosen(x):
    a, b = x
    v = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return -v, -g


def test_bfgs_quadratic():
    res = bfgs_maximize(lambda x: (-(x[0] - 3) ** 2, np.array([-2 * (x[0] - 3)])), [0.0])
    assert res.converged and res.x[0] == pytest.approx(3.0, abs=1e-6)


def test_bfgs_rosenbrock_matches_reference():
    res = bfgs_maximize(_neg_rosen, [-1.2, 1.0], SolverConfig(max_iterations=200))
    ref = minimize(lambda x: -_neg_rosen(x)[0], [-1.2, 1.0], jac=lambda x: -_neg_rosen(x)[1],
                   method="BFGS", options={"gtol": 1e-8})
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-4)
    np.testing.assert_allclose(res.x, ref.x, atol=1e-4)


def test_bfgs_stationary_start():
    res = bfgs_maximize(lambda x: (-float(x @ x), -2 * x), np.zeros(3))
    assert res.iterations <= 1 and np.array_equal(res.x, np.zeros(3))


def test_bfgs_is_monotone_and_reports_failure():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6))
    q = a @ a.T + np.eye(6)
    x0 = rng.normal(size=6)
    res = bfgs_maximize(lambda x: (-x @ q @ x, -2 * q @ x), x0, SolverConfig(max_iterations=2))
    assert res.value >= -x0 @ q @ x0

    def bad(x):
        return (np.nan if x[0] > 1 else -(x[0] - 5) ** 2), np.array([-2 * (x[0] - 5)])

    with pytest.raises(SolverFailure) as info:
        bfgs_maximize(bad, [0.0])
    assert info.value.last_x is not None and info.value.last_x[0] <= 1


def test_lanczos_examples():
    c = FlowField.constant(5.0, 5.0, 16, 16)
    for t in [(1, 1), (3, 3), (8, 8)]:
        np.testing.assert_allclose(downscale_lanczos3(c, t).vx, 5.0, atol=1e-6)
    rng = np.random.default_rng(1)
    f = FlowField(rng.normal(size=(16, 16)), rng.normal(size=(16, 16)))
    np.testing.assert_allclose(downscale_lanczos3(f, (16, 16)).vx, f.vx, atol=1e-9)
    two = FlowField(np.array([[0.0, 0.0], [10.0, 10.0]]), np.zeros((2, 2)))
    assert downscale_lanczos3(two, (1, 1)).vx[0, 0] == pytest.approx(5.0, abs=1e-6)
    with pytest.raises(InvalidInputError):
        downscale_lanczos3(two, (4, 4))
    m = lanczos3_matrix(16, 4)
    np.testing.assert_allclose(m.sum(axis=1), 1.0)
    np.testing.assert_allclose(m, m[::-1, ::-1], atol=1e-12)


def test_repeat_examples():
    f = FlowField(np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros((2, 2)))
    up = upscale_repeat(f, 2)
    assert up.vx.tolist() == [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]]
    assert np.array_equal(upscale_repeat(f, 1).vx, f.vx)
    for bad in (1.5, 2.0, True, 0):
        with pytest.raises(InvalidInputError):
            upscale_repeat(f, bad)


def test_bilinear_upscale():
    geo = SensorGeometry(64, 48)
    np.testing.assert_allclose(upscale_bilinear_to_sensor(FlowField.constant(2.0, -1.0, 16, 16),
                                                          geo).vy, -1.0, atol=1e-12)
    # a linear field is reproduced exactly away from the clamped border
    yy, xx = np.mgrid[:16, :16].astype(float)
    up = upscale_bilinear_to_sensor(FlowField(xx, yy), SensorGeometry(64, 64))
    inner = slice(2, 62)
    px = np.arange(64.0)
    np.testing.assert_allclose(up.vx[inner, inner], ((px + 0.5) / 4 - 0.5)[None, inner].repeat(60, 0))
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 16, 16))
    fa, fb = FlowField(a, b), FlowField(b, a)
    s = upscale_bilinear_to_sensor(FlowField(a + 2 * b, b + 2 * a), geo)
    np.testing.assert_allclose(s.vx, upscale_bilinear_to_sensor(fa, geo).vx
                               + 2 * upscale_bilinear_to_sensor(fb, geo).vx, atol=1e-12)


def test_handover_examples():
    cur = FlowField.constant(2.0, 2.0, 2, 2)
    prev = FlowField.constant(4.0, 4.0, 2, 2)
    assert handover(cur, prev, 0.5).vx.tolist() == [[3.0, 3.0], [3.0, 3.0]]
    assert handover(cur, prev, 0.0).vx is not cur.vx
    with pytest.raises(InvalidInputError):
        handover(cur, FlowField.zeros(4, 4), 0.5)


@pytest.fixture(scope="module")
def small_problem(small_scene):
    s = small_scene
    refs = ReferenceTimes.for_window(s.events, s.edges, s.t_start, s.t_end)
    return Problem(s.events, refs, s.geometry, ObjectiveConfig())


def test_solve_weight_equal_inputs_returns_init(small_problem):
    f = FlowField.constant(3.0, 1.0, 2, 2)
    w, _ = solve_handover_weight(f, f.copy(), small_problem)
    assert w == 0.5


def test_solve_weight_prefers_true_previous(small_problem):
    true = FlowField.constant(20.0, 10.0, 2, 2)
    w, _ = solve_handover_weight(FlowField.zeros(2, 2), true, small_problem)
    assert w >= 0.5


def test_handover_config():
    assert not HandoverConfig("FHO").solves(0)
    assert HandoverConfig("SHO").solves(4)
    assert HandoverConfig().solves(1) and not HandoverConfig().solves(2)
    with pytest.raises(InvalidInputError):
        HandoverConfig("XHO")
    with pytest.raises(InvalidInputError):
        PyramidSpec(((1, 1), (3, 3), (4, 4)))


def test_no_previous_starts_from_zero(small_problem):
    res = multiscale_estimate(small_problem, None, SMALL_PYRAMID, HandoverConfig(), FAST)
    assert res.levels[0].objective_before == small_problem.value(FlowField.zeros(1, 1))
    assert all(d.w_ho is None for d in res.levels)
    assert [d.level for d in res.levels] == [2, 1, 0]
    assert res.flow.shape == (4, 4)
    assert all(d.objective_after >= d.objective_before for d in res.levels)


def test_call_order(small_problem, monkeypatch):
    calls = []
    real_opt, real_ho = multiscale._optimize_level, multiscale.handover

    def opt(problem, init, solver):
        calls.append(("optimize", init.shape))
        return real_opt(problem, init, solver)

    def ho(cur, prev, w):
        calls.append(("handover", cur.shape))
        return real_ho(cur, prev, w)

    monkeypatch.setattr(multiscale, "_optimize_level", opt)
    monkeypatch.setattr(multiscale, "handover", ho)
    prev = FlowField.constant(20.0, 10.0, 4, 4)
    multiscale_estimate(small_problem, prev, SMALL_PYRAMID, HandoverConfig("FHO"), FAST)
    assert calls == [("optimize", (1, 1)), ("handover", (1, 1)), ("optimize", (2, 2)),
                     ("handover", (2, 2)), ("optimize", (4, 4)), ("handover", (4, 4))]


def test_strategy_equivalences(small_problem):
    prev = FlowField.constant(18.0, 11.0, 4, 4)

    def run(ho):
        return multiscale_estimate(small_problem, prev, SMALL_PYRAMID, ho, FAST)

    fho = run(HandoverConfig("FHO"))
    fsho_none = run(HandoverConfig("FSHO", solve_levels=frozenset()))
    sho = run(HandoverConfig("SHO"))
    fsho_all = run(HandoverConfig("FSHO", solve_levels=frozenset({0, 1, 2})))
    fsho = run(HandoverConfig())
    assert np.array_equal(fho.flow.vx, fsho_none.flow.vx)
    assert np.array_equal(sho.flow.vx, fsho_all.flow.vx)
    assert [d.w_ho for d in fho.levels] == [0.5, 0.5, 0.5]
    assert [d.solved for d in fsho.levels] == [False, True, True]
    assert [d.solved for d in sho.levels] == [True, True, True]


def test_multiscale_is_deterministic(small_problem):
    a = multiscale_estimate(small_problem, None, SMALL_PYRAMID, HandoverConfig(), FAST)
    b = multiscale_estimate(small_problem, None, SMALL_PYRAMID, HandoverConfig(), FAST)
    assert np.array_equal(a.flow.vx, b.flow.vx) and a.diagnostics_lines() == b.diagnostics_lines()


def test_previous_solution_must_be_finest(small_problem):
    with pytest.raises(InvalidInputError):
        multiscale_estimate(small_problem, FlowField.zeros(2, 2), SMALL_PYRAMID)


def test_downscale_then_repeat_round_trip():
    c = FlowField.constant(-4.25, 7.0, 16, 16)
    for k in (1, 2, 4, 8, 16):
        back = upscale_repeat(downscale_lanczos3(c, (16 // k, 16 // k)), k)
        np.testing.assert_allclose(back.vx, -4.25, atol=1e-6)
        np.testing.assert_allclose(back.vy, 7.0, atol=1e-6)
