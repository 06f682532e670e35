import numpy as np
import pytest

from eincm.edges import EdgeImage
from eincm.errors import DegenerateDenominatorError, InvalidInputError
from eincm.events import EventSet, FlowField, SensorGeometry, build_iue
from eincm.objectives import (ObjectiveConfig, Problem, ReferenceTimes, gradient_magnitude_contrast,
                              hybrid_objective, mse_correlation, objective_gradient,
                              relative_contrast, relative_correlation, tv_regularizer,
                              variance_contrast)
from eincm.synth import SceneSpec, generate_scene

from conftest import random_events


def _gm_oracle(p):
    # explicit loops with edge replication
    h, w = p.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            gx = (p[i, min(j + 1, w - 1)] - p[i, max(j - 1, 0)]) / 2
            gy = (p[min(i + 1, h - 1), j] - p[max(i - 1, 0), j]) / 2
            total += gx * gx + gy * gy
    return total / (h * w)


def test_variance_examples():
    assert variance_contrast(np.full((5, 5), 3.0)) == 0.0
    assert variance_contrast(np.array([[0.0, 1.0], [1.0, 0.0]])) == 0.25


def test_gradient_magnitude_examples():
    assert gradient_magnitude_contrast(np.full((6, 6), 2.0)) == 0.0
    ramp = np.tile(np.arange(8.0), (8, 1))
    interior = ramp[:, 1:-1]
    assert gradient_magnitude_contrast(interior[1:-1]) == pytest.approx(_gm_oracle(interior[1:-1]))
    # interior columns see a unit central difference
    assert _gm_oracle(ramp) == pytest.approx((8 * 6 * 1.0 + 8 * 2 * 0.25) / 64)
    assert gradient_magnitude_contrast(ramp) == pytest.approx(_gm_oracle(ramp))
    with pytest.raises(InvalidInputError):
        gradient_magnitude_contrast(np.ones((2, 5)))


def test_gradient_magnitude_matches_loop_oracle_on_random_images():
    rng = np.random.default_rng(0)
    for shape in [(3, 3), (7, 11), (16, 9)]:
        p = rng.normal(size=shape)
        assert gradient_magnitude_contrast(p) == pytest.approx(_gm_oracle(p), rel=1e-12)


def test_sharp_bar_beats_blurred_bar():
    sharp = np.zeros((20, 20))
    sharp[:, 9:11] = 1.0
    blurred = np.zeros((20, 20))
    blurred[:, 6:14] = 0.25
    assert gradient_magnitude_contrast(sharp) > gradient_magnitude_contrast(blurred)
    assert variance_contrast(sharp) > variance_contrast(blurred)


def test_mse_examples():
    rng = np.random.default_rng(1)
    img = rng.uniform(0, 3, (6, 6))
    assert mse_correlation(img, EdgeImage(img * 0.5)) == 0.0
    assert mse_correlation(img, EdgeImage(img * 0.4)) == pytest.approx(0.0, abs=1e-30)
    assert mse_correlation(np.ones((4, 4)), np.zeros((4, 4))) == 1.0
    assert mse_correlation(np.array([[2.0, 0], [0, 0]]), np.array([[0.0, 1], [0, 0]])) == 0.5
    with pytest.raises(InvalidInputError):
        mse_correlation(np.ones((4, 4)), np.ones((4, 5)))


def test_tv_examples():
    assert tv_regularizer(FlowField.constant(3.0, -1.0, 5, 4)) == 0.0
    assert tv_regularizer(FlowField(np.array([[0.0, 3.0]]), np.zeros((1, 2)))) == -3.0


def _window(events, geo, rng):
    edges = [EdgeImage(rng.uniform(0, 1, geo.shape), t) for t in (0.0, 0.05, 0.1)]
    return ReferenceTimes.for_window(events, edges, 0.0, 0.1)


def test_zero_flow_identities():
    rng = np.random.default_rng(2)
    ev, geo = random_events(rng, 400)
    refs = _window(ev, geo, rng)
    zero = FlowField.zeros(4, 4)
    cfg = ObjectiveConfig(20.0, 35.0, 0.0)
    assert relative_contrast(ev, zero, refs, geo, cfg) == 1.0
    assert relative_correlation(ev, zero, refs, geo, cfg) == -1.0
    assert hybrid_objective(ev, zero, refs, geo, cfg) == -15.0
    assert hybrid_objective(ev, zero, refs, geo, ObjectiveConfig(7.0, 3.0, 0.0)) == 4.0


def test_degenerate_denominators():
    geo = SensorGeometry(16, 16)
    far = EventSet(np.array([-10.0]), np.array([5.0]), np.array([0.0]), np.array([1], dtype=np.int8))
    refs = ReferenceTimes([0.0])
    with pytest.raises(DegenerateDenominatorError):
        relative_contrast(far, FlowField.zeros(1, 1), refs, geo, ObjectiveConfig(1.0, 0.0, 0.0))
    rng = np.random.default_rng(3)
    ev, geo = random_events(rng, 50, 16, 16)
    iue = build_iue(ev, geo).pixels
    pr = Problem(ev, ReferenceTimes([0.0], [(0.0, EdgeImage(iue, 0.0))]), geo)
    # edges identical to the unwarped image leave nothing to improve on
    with pytest.raises(DegenerateDenominatorError):
        pr.value(FlowField.zeros(2, 2))


def test_problem_input_checks():
    rng = np.random.default_rng(4)
    ev, geo = random_events(rng, 50)
    with pytest.raises(InvalidInputError):
        Problem(ev, ReferenceTimes([0.0]), geo, ObjectiveConfig(1.0, 1.0, 0.0))
    with pytest.raises(InvalidInputError):
        Problem(EventSet.from_events([]), ReferenceTimes([0.0]), geo)
    with pytest.raises(InvalidInputError):
        ObjectiveConfig(-1.0, 1.0, 0.0)


def test_true_flow_improves_each_term():
    s = generate_scene(SceneSpec(pattern="bar", velocity=(30.0, 0.0), width=48, height=32))
    refs = ReferenceTimes.for_window(s.events, s.edges, s.t_start, s.t_end)
    cfg = ObjectiveConfig()
    pr = Problem(s.events, refs, s.geometry, cfg)
    true = FlowField.constant(30.0, 0.0, 4, 4)
    assert pr.relative_contrast(true) > 1.0
    assert pr.relative_correlation(true) > -1.0


def test_gradient_points_towards_truth(scene):
    refs = ReferenceTimes.for_window(scene.events, scene.edges, scene.t_start, scene.t_end)
    g = objective_gradient(scene.events, FlowField.zeros(4, 4), refs, scene.geometry)
    assert np.sum(g.vx * 30.0 + g.vy * -20.0) > 0


def test_cells_without_events_get_zero_gradient():
    geo = SensorGeometry(32, 32)
    rng = np.random.default_rng(5)
    n = 300
    # all events in the left half, far from the right-hand cells
    ev = EventSet(rng.integers(0, 12, n).astype(float), rng.integers(0, 32, n).astype(float),
                  np.sort(rng.uniform(0, 0.1, n)), np.ones(n, dtype=np.int8))
    pr = Problem(ev, ReferenceTimes([0.0, 0.05, 0.1]), geo, ObjectiveConfig(1.0, 0.0, 0.0))
    _, g = pr.value_and_grad(FlowField(rng.normal(size=(4, 4)), rng.normal(size=(4, 4))))
    assert not g.vx[:, 2:].any() and not g.vy[:, 2:].any()
    assert g.vx[:, :2].any()


def test_gradient_matches_finite_differences_without_tv(small_scene):
    s = small_scene
    refs = ReferenceTimes.for_window(s.events, s.edges, s.t_start, s.t_end)
    fun = Problem(s.events, refs, s.geometry, ObjectiveConfig(gamma=0.0)).vector_objective((4, 4))
    x = np.random.default_rng(6).normal(0, 10, 32)
    _, g = fun(x)
    h = 1e-4
    fd = np.array([(fun(x + h * e)[0] - fun(x - h * e)[0]) / (2 * h) for e in np.eye(32)])
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)


def test_reference_times_rule():
    rng = np.random.default_rng(7)
    ev, geo = random_events(rng, 20)
    refs = ReferenceTimes.for_window(ev, None, 0.0, 0.1)
    assert refs.contrast_refs == [0.0, 0.05, 0.1] and refs.correlation_refs == []
    edges = [EdgeImage(np.ones(geo.shape), 0.02), EdgeImage(np.ones(geo.shape), 0.08)]
    assert ReferenceTimes.for_window(ev, edges, 0.0, 0.1).contrast_refs == [0.02, 0.08]


def test_scale_properties():
    rng = np.random.default_rng(8)
    a, b = rng.uniform(0, 4, (2, 9, 9))
    assert gradient_magnitude_contrast(3.0 * a) == pytest.approx(9.0 * gradient_magnitude_contrast(a))
    assert mse_correlation(a, b) == pytest.approx(mse_correlation(b, a), rel=1e-14)


def test_objective_is_continuous(small_scene):
    s = small_scene
    refs = ReferenceTimes.for_window(s.events, s.edges, s.t_start, s.t_end)
    pr = Problem(s.events, refs, s.geometry, ObjectiveConfig())
    rng = np.random.default_rng(9)
    flow = FlowField(rng.normal(0, 10, (4, 4)), rng.normal(0, 10, (4, 4)))
    moved = flow.copy()
    moved.vx[1, 2] += 1e-6
    assert abs(pr.value(moved) - pr.value(flow)) < 1e-3
