"""Resampling of flow grids between pyramid levels and to sensor resolution."""
from __future__ import annotations

import numbers

import numpy as np

from ..errors import InvalidInputError
from ..events import FlowField, SensorGeometry


def _lanczos(x: np.ndarray, a: int = 3) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < a, np.sinc(x) * np.sinc(x / a), 0.0)


def lanczos3_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """Row-normalized (n_dst, n_src) antialiased Lanczos-3 downsampling matrix.

    The kernel is stretched by the scale factor, and taps falling outside
    the source are dropped before normalization so constants are preserved.
    """
    if n_dst > n_src:
        raise InvalidInputError(f"cannot downscale {n_src} to {n_dst}")
    scale = n_src / n_dst
    centers = (np.arange(n_dst) + 0.5) * scale - 0.5
    src = np.arange(n_src)
    w = _lanczos((src[None, :] - centers[:, None]) / scale)
    return w / w.sum(axis=1, keepdims=True)


def downscale_lanczos3(flow: FlowField, target: tuple[int, int]) -> FlowField:
    th, tw = target
    h, w = flow.shape
    if th > h or tw > w:
        raise InvalidInputError(f"target {target} exceeds source {flow.shape}")
    if (th, tw) == (h, w):
        return flow.copy()
    my = lanczos3_matrix(h, th)
    mx = lanczos3_matrix(w, tw)
    return FlowField(my @ flow.vx @ mx.T, my @ flow.vy @ mx.T)


def upscale_repeat(flow: FlowField, factor) -> FlowField:
    """Replicate each cell into a ``factor x factor`` block."""
    if isinstance(factor, bool) or not isinstance(factor, numbers.Integral):
        raise InvalidInputError(f"repeat factor must be an integer, got {factor!r}")
    if factor < 1:
        raise InvalidInputError("repeat factor must be >= 1")
    f = int(factor)
    rep = lambda c: np.repeat(np.repeat(c, f, axis=0), f, axis=1)  # noqa: E731
    return FlowField(rep(flow.vx), rep(flow.vy))


def bilinear_sample(grid: np.ndarray, xs, ys, out_width: int, out_height: int) -> np.ndarray:
    """Sample a cell grid bilinearly at output-pixel coordinates.

    Uses half-pixel alignment: output pixel ``x`` maps to grid coordinate
    ``(x + 0.5) * w / out_width - 0.5``, clamped to the outermost cell centres.
    """
    h, w = grid.shape
    gx = np.clip((np.asarray(xs, dtype=np.float64) + 0.5) * w / out_width - 0.5, 0.0, w - 1.0)
    gy = np.clip((np.asarray(ys, dtype=np.float64) + 0.5) * h / out_height - 0.5, 0.0, h - 1.0)
    x0 = np.floor(gx).astype(np.int64)
    y0 = np.floor(gy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = gx - x0
    fy = gy - y0
    top = grid[y0, x0] * (1 - fx) + grid[y0, x1] * fx
    bot = grid[y1, x0] * (1 - fx) + grid[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def upscale_bilinear_to_sensor(flow: FlowField, geometry: SensorGeometry) -> FlowField:
    ys, xs = np.mgrid[0:geometry.height, 0:geometry.width]
    args = (xs, ys, geometry.width, geometry.height)
    return FlowField(bilinear_sample(flow.vx, *args), bilinear_sample(flow.vy, *args))
