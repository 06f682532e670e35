import colorsys

import numpy as np
import pytest

from eincm import data
from eincm.edges import EdgeImage, GrayImage
from eincm.errors import FormatError, InvalidInputError, ParseError
from eincm.events import Event, EventSet, SensorGeometry
from eincm.synth import NoEventsError, SceneSpec, generate_events, generate_scene

from conftest import random_events


def test_load_events_example(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("0.003811 96 133 0\n0.004 1 2 1\n")
    ev = data.load_events_text(p)
    assert ev[0] == Event(96.0, 133.0, 0.003811, -1)
    assert ev[1].p == 1


@pytest.mark.parametrize("text, line", [
    ("0.1 1 2 1\n0.2 1 2\n", 2),
    ("0.1 1 2 1\nabc 1 2 1\n", 2),
    ("0.1 1 2 3\n", 1),
    ("0.2 1 2 1\n0.1 1 2 1\n", 2),
    ("0.1 1 2 1\n\n0.2 500 2 1\n", 3),
])
def test_load_events_errors(tmp_path, text, line):
    p = tmp_path / "e.txt"
    p.write_text(text)
    with pytest.raises(ParseError) as info:
        data.load_events_text(p, SensorGeometry(100, 100))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_load_empty_file(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("")
    with pytest.raises(InvalidInputError):
        data.load_events_text(p)


def test_select_window():
    rng = np.random.default_rng(0)
    ev, _ = random_events(rng, 100_000, t_span=10.0)
    w = data.select_window(ev, 2.0, 30_000)
    assert len(w) == 30_000 and w.t0 >= 2.0
    k = int(np.searchsorted(ev.t, 2.0))
    assert np.array_equal(w.t, ev.t[k:k + 30_000])
    assert len(data.select_window(ev, 9.0, 10**9)) == np.count_nonzero(ev.t >= 9.0)
    one = data.select_window(ev, 5.0, 1)
    assert len(one) == 1 and one.t0 == ev.t[np.searchsorted(ev.t, 5.0)]
    with pytest.raises(InvalidInputError):
        data.select_window(ev, 11.0, 5)


def test_flow_format(tmp_path):
    p = tmp_path / "one.flo"
    data.write_flow(p, np.array([[[2.5, -1.0]]]))
    raw = p.read_bytes()
    assert raw[:4] == b"PIEH" and len(raw) == 4 + 8 + 8
    assert data.read_flow(p).tolist() == [[[2.5, -1.0]]]
    bad = tmp_path / "bad.flo"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        data.read_flow(bad)
    bad.write_bytes(raw[:-2])
    with pytest.raises(FormatError):
        data.read_flow(bad)
    unk = np.full((2, 2, 2), data.UNKNOWN_FLOW)
    unk[0, 0] = 1.0
    assert data.flow_valid_mask(unk).tolist() == [[True, False], [False, False]]


def test_pgm_round_trip(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, (7, 9)).astype(float)
    p = tmp_path / "a.pgm"
    data.write_pgm(p, img)
    assert np.array_equal(data.read_pgm(p), img)
    assert np.array_equal(data.read_gray(p, 0.5).pixels, img)
    data.write_edge_pgm(tmp_path / "e.pgm", EdgeImage(np.array([[0.0, 1.0]])))
    assert data.read_pgm(tmp_path / "e.pgm").tolist() == [[0, 255]]
    (tmp_path / "junk.pgm").write_bytes(b"P2 garbage")
    with pytest.raises(FormatError):
        data.read_pgm(tmp_path / "junk.pgm")


def _hue(rgb):
    return colorsys.rgb_to_hsv(*(rgb / 255.0))[0]


def test_flow_to_color():
    assert np.all(data.flow_to_color(np.zeros((3, 4, 2)), 1.0) == 255)
    f = np.array([[[1.0, 0.5], [-1.0, -0.5]]])
    c = data.flow_to_color(f, 2.0).astype(float)
    d = abs(_hue(c[0, 0]) - _hue(c[0, 1]))
    assert min(d, 1 - d) == pytest.approx(0.5, abs=0.01)
    sat = data.flow_to_color(np.array([[[10.0, 0.0]]]), 1.0)
    assert sat[0, 0].min() == 0


def test_sample_validation():
    ev = EventSet.from_events([Event(1, 1, 0.1, 1), Event(2, 2, 0.2, 1)])
    geo = SensorGeometry(4, 4)
    with pytest.raises(InvalidInputError):
        data.Sample(ev, geo, [GrayImage(np.zeros((4, 4)), 0.5)])
    s = data.Sample(ev, geo, [GrayImage(np.zeros((4, 4)), 0.0)], t_start=0.0, t_end=0.3)
    assert s.duration == pytest.approx(0.3)


def test_scene_defaults(scene):
    assert len(scene.events) == 20566
    assert scene.frame_times == [0.0, 0.05, 0.1]
    assert len(scene.edges) == 3
    assert np.all(scene.gt_flow[scene.gt_mask] == [3.0, -2.0])
    assert scene.gt_mask.sum() == 2087
    assert scene.events.t0 >= 0.0 and scene.events.t1 <= 0.1


def test_scene_bar():
    s = generate_scene(SceneSpec(pattern="bar", velocity=(3.0, 0.0), duration=1.0))
    assert np.all(s.gt_flow[s.gt_mask] == [3.0, 0.0])
    assert len(s.events) > 0


def test_static_scene():
    spec = SceneSpec(velocity=(0.0, 0.0))
    assert len(generate_events(spec)) == 0
    with pytest.raises(NoEventsError):
        generate_scene(spec)


def test_scene_is_deterministic():
    a = generate_events(SceneSpec(seed=3, width=32, height=32))
    b = generate_events(SceneSpec(seed=3, width=32, height=32))
    assert all(np.array_equal(getattr(a, k), getattr(b, k)) for k in "xytp")


def test_event_count_scales_with_speed():
    base = len(generate_events(SceneSpec(velocity=(15.0, -10.0))))
    double = len(generate_events(SceneSpec(velocity=(30.0, -20.0))))
    assert double / base == pytest.approx(2.0, rel=0.2)


def test_scene_spec_validation():
    with pytest.raises(InvalidInputError):
        SceneSpec(pattern="zebra")
    with pytest.raises(InvalidInputError):
        SceneSpec(velocity=(1000.0, 0.0))
    with pytest.raises(InvalidInputError):
        SceneSpec(contrast_threshold=0.0)
