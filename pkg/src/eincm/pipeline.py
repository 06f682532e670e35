"""Input directories, sample splitting and sequential estimation."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import Sample, load_events_text, read_gray
from .edges import GrayImage, extract_edges
from .errors import InvalidInputError
from .events import EventSet, FlowField, SensorGeometry
from .objectives import Problem, ReferenceTimes
from .optimizer import MultiscaleResult, multiscale_estimate, upscale_bilinear_to_sensor

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png")


def load_frames(frames_dir) -> list[GrayImage]:
    """Frames sorted by name; timestamps from ``timestamps.txt`` (one per line)."""
    frames_dir = Path(frames_dir)
    files = sorted(p for p in frames_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    ts_file = frames_dir / "timestamps.txt"
    if not files:
        return []
    if not ts_file.exists():
        raise InvalidInputError(f"{frames_dir}: missing timestamps.txt")
    times = [float(s) for s in ts_file.read_text().split()]
    if len(times) != len(files):
        raise InvalidInputError(f"{frames_dir}: {len(files)} frames but {len(times)} timestamps")
    return [read_gray(p, t) for p, t in zip(files, times)]


def infer_geometry(input_dir: Path | None, frames: list[GrayImage], events: EventSet) -> SensorGeometry:
    if input_dir is not None and (input_dir / "scene.json").exists():
        scene = json.loads((input_dir / "scene.json").read_text())
        return SensorGeometry(int(scene["width"]), int(scene["height"]))
    if frames:
        h, w = frames[0].pixels.shape
        return SensorGeometry(w, h)
    return SensorGeometry(int(events.x.max()) + 1, int(events.y.max()) + 1)


def split_samples(events: EventSet, frames: list[GrayImage], geometry: SensorGeometry,
                  n_events: int) -> list[Sample]:
    """Consecutive windows of ``n_events`` events.

    Window ``i`` spans from its first event to the next window's first
    event; the first and last windows stretch to cover any frames before
    or after the stream. Frames are assigned to the window containing
    their timestamp.
    """
    starts = list(range(0, len(events), n_events))
    frame_t = [f.t for f in frames]
    t_lo = min([events.t0] + frame_t)
    t_hi = max([events.t1] + frame_t)
    bounds = [t_lo] + [float(events.t[s]) for s in starts[1:]] + [t_hi]
    samples = []
    for i, s in enumerate(starts):
        a, b = bounds[i], bounds[i + 1]
        last = i == len(starts) - 1
        fr = [f for f in frames if a <= f.t and (f.t < b or (last and f.t <= b))]
        samples.append(Sample(events.slice(s, s + n_events), geometry, fr, t_start=a, t_end=b))
    return samples


@dataclass
class SampleEstimate:
    sample_id: str
    sample: Sample
    result: MultiscaleResult
    dense: FlowField  # sensor-resolution velocity, px/s

    @property
    def displacement(self) -> np.ndarray:
        dt = self.sample.duration
        return np.stack([self.dense.vx * dt, self.dense.vy * dt], axis=-1)


def estimate_sample(sample: Sample, cfg: RunConfig, theta_prev: FlowField | None = None) -> MultiscaleResult:
    obj = cfg.objective_config()
    edges = sample.edges
    if obj.beta > 0 and not edges and sample.frames:
        edges = [extract_edges(f, cfg.edges) for f in sample.frames]
        sample.edges = edges
    if obj.beta > 0 and not edges:
        log.info("no frames in window, running events-only")
        obj = type(obj)(obj.alpha, 0.0, obj.gamma, obj.iwe)
    refs = ReferenceTimes.for_window(sample.events, edges, sample.t_start, sample.t_end)
    problem = Problem(sample.events, refs, sample.geometry, obj)
    return multiscale_estimate(problem, theta_prev, cfg.pyramid, cfg.handover, cfg.solver)


def estimate_sequence(samples: list[Sample], cfg: RunConfig):
    """Yield a :class:`SampleEstimate` per sample, carrying each solution forward."""
    prev = None
    for i, sample in enumerate(samples):
        res = estimate_sample(sample, cfg, prev)
        prev = None if res.failed else res.flow
        dense = upscale_bilinear_to_sensor(res.flow, sample.geometry)
        yield SampleEstimate(f"sample_{i:05d}", sample, res, dense)
