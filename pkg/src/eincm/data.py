"""Samples, event windows and on-disk formats.

Formats:

* events: ASCII lines ``t x y p`` with ``p`` in {0, 1}
* flow: ``PIEH`` magic, int32 width/height, float32 interleaved (u, v), little-endian
* images: binary PGM (P5) read/write, PNG read/write via OpenCV
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .edges import EdgeImage, GrayImage
from .errors import FormatError, InvalidInputError, ParseError
from .events import EventSet, SensorGeometry

FLOW_MAGIC = b"PIEH"
UNKNOWN_FLOW = 1e10


@dataclass(eq=False)
class Sample:
    """One optimization unit: an event window with its frames and edges.

    ``gt_flow`` is a displacement field (H, W, 2) in pixels over the
    window; ``gt_mask`` marks valid pixels.
    """

    events: EventSet
    geometry: SensorGeometry
    frames: list[GrayImage] = field(default_factory=list)
    edges: list[EdgeImage] = field(default_factory=list)
    gt_flow: np.ndarray | None = None
    gt_mask: np.ndarray | None = None
    t_start: float | None = None
    t_end: float | None = None

    def __post_init__(self):
        if self.t_start is None:
            self.t_start = self.events.t0
        if self.t_end is None:
            self.t_end = self.events.t1
        times = self.frame_times
        if any(b < a for a, b in zip(times, times[1:])):
            raise InvalidInputError("frame timestamps must be ascending")
        if any(t < self.t_start or t > self.t_end for t in times):
            raise InvalidInputError("frame timestamp outside the sample window")
        if self.edges and len(self.edges) != len(self.frames):
            raise InvalidInputError("edge images must pair 1:1 with frames")

    @property
    def frame_times(self) -> list[float]:
        return [f.t for f in self.frames]

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def select_window(events: EventSet, t_start: float, n_target: int) -> EventSet:
    """First ``n_target`` events at or after ``t_start`` (fewer if the stream ends)."""
    if n_target < 1:
        raise InvalidInputError("n_target must be >= 1")
    k = int(np.searchsorted(events.t, t_start, side="left"))
    if k >= len(events):
        raise InvalidInputError(f"no events at or after t={t_start}")
    return events.slice(k, min(k + n_target, len(events)))


def load_events_text(path, geometry: SensorGeometry | None = None) -> EventSet:
    """Parse ``t x y p`` lines. Polarity 0/1 maps to -1/+1."""
    ts, xs, ys, ps = [], [], [], []
    last_t = -np.inf
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", lineno)
            try:
                t, x, y = float(parts[0]), float(parts[1]), float(parts[2])
                p = int(parts[3])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if p not in (0, 1):
                raise ParseError(f"polarity must be 0 or 1, got {p}", lineno)
            if not (np.isfinite(t) and np.isfinite(x) and np.isfinite(y)):
                raise ParseError("non-finite value", lineno)
            if x < 0 or y < 0 or (geometry is not None
                                  and (x >= geometry.width or y >= geometry.height)):
                raise ParseError(f"coordinate ({x}, {y}) out of range", lineno)
            if t < last_t:
                raise ParseError("timestamps are not sorted", lineno)
            last_t = t
            ts.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(1 if p == 1 else -1)
    if not ts:
        raise InvalidInputError(f"{path}: no events")
    return EventSet(np.array(xs), np.array(ys), np.array(ts), np.array(ps, dtype=np.int8))


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 2**53 else repr(float(v))


def write_events_text(path, events: EventSet) -> None:
    with open(path, "w") as fh:
        for k in range(len(events)):
            p = 1 if events.p[k] > 0 else 0
            fh.write(f"{repr(float(events.t[k]))} {_num(events.x[k])} {_num(events.y[k])} {p}\n")


def write_flow(path, flow: np.ndarray) -> None:
    """Write an (H, W, 2) displacement field."""
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise InvalidInputError("flow must have shape (H, W, 2)")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(struct.pack("<ii", w, h))
        fh.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def read_flow(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != FLOW_MAGIC:
        raise FormatError(f"{path}: bad flow magic")
    w, h = struct.unpack("<ii", data[4:12])
    if w < 0 or h < 0:
        raise FormatError(f"{path}: negative dimensions")
    n = w * h * 2 * 4
    if len(data) - 12 != n:
        raise FormatError(f"{path}: expected {n} payload bytes, found {len(data) - 12}")
    return np.frombuffer(data[12:], dtype="<f4").reshape(h, w, 2).astype(np.float32)


def flow_valid_mask(flow: np.ndarray) -> np.ndarray:
    u, v = flow[..., 0], flow[..., 1]
    return np.isfinite(u) & np.isfinite(v) & (np.abs(u) < 1e9) & (np.abs(v) < 1e9)


def write_pgm(path, pixels: np.ndarray) -> None:
    img = np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def _pgm_tokens(data: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(int(data[start:pos]))
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    try:
        (w, h, maxval), off = _pgm_tokens(data, 3)
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM is supported")
    body = data[off:off + w * h]
    if len(body) != w * h:
        raise FormatError(f"{path}: truncated PGM payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).astype(np.float64)


def read_gray(path, t: float = 0.0) -> GrayImage:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return GrayImage(read_pgm(path), t)
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise FormatError(f"{path}: unreadable image")
    return GrayImage(img.astype(np.float64), t)


def write_edge_pgm(path, edge: EdgeImage) -> None:
    write_pgm(path, 255.0 * np.clip(edge.pixels, 0.0, 1.0))


def flow_to_color(flow: np.ndarray, max_magnitude: float) -> np.ndarray:
    """Color-wheel rendering of an (H, W, 2) field as uint8 RGB.

    Hue encodes direction, saturation encodes magnitude (clamped at
    ``max_magnitude``); value is 1, so zero flow is white.
    """
    if not max_magnitude > 0:
        raise InvalidInputError("max_magnitude must be positive")
    u = np.nan_to_num(flow[..., 0].astype(np.float64))
    v = np.nan_to_num(flow[..., 1].astype(np.float64))
    hue = (np.arctan2(v, u) / (2 * np.pi)) % 1.0
    sat = np.minimum(1.0, np.hypot(u, v) / max_magnitude)
    h6 = hue * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = 1.0 - sat
    q = 1.0 - sat * f
    t = 1.0 - sat * (1.0 - f)
    one = np.ones_like(sat)
    r = np.choose(i, [one, q, p, p, t, one])
    g = np.choose(i, [t, one, one, q, p, p])
    b = np.choose(i, [p, p, t, one, one, q])
    return np.clip(np.rint(np.stack([r, g, b], axis=-1) * 255), 0, 255).astype(np.uint8)


def write_png(path, rgb: np.ndarray) -> None:
    if not cv2.imwrite(str(path), cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR)):
        raise OSError(f"could not write {path}")
