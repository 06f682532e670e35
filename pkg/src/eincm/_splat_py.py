"""Pure numpy implementation of the splatting kernels.

Used when the compiled extension is unavailable, and as the reference the
extension is tested against.
"""
import numpy as np


def _axis_weights(a, sigma, radius_px, n_slots, with_grad):
    """Per-event 1-D stamp weights along one axis.

    Returns the first integer slot per event, normalized weights of shape
    (N, n_slots) and, if requested, their derivative w.r.t. the coordinate.
    """
    r = radius_px / sigma
    c = np.exp(-0.5 * r * r)
    base = np.floor(a - radius_px).astype(np.int64) + 1
    u = (base[:, None] + np.arange(n_slots)[None, :] - a[:, None]) / sigma
    inside = np.abs(u) < r
    e = np.exp(-0.5 * u * u)
    g = np.where(inside, e - c * (1.0 + 0.5 * (r * r - u * u)), 0.0)
    z = g.sum(axis=1)
    w = g / z[:, None]
    if not with_grad:
        return base, w, None
    # dg/da = h'(u) * du/da, h'(u) = -u (e - c), du/da = -1/sigma
    dg = np.where(inside, u * (e - c) / sigma, 0.0)
    dz = dg.sum(axis=1)
    dw = (dg - w * dz[:, None]) / z[:, None]
    return base, w, dw


def n_slots(sigma, radius_px):
    return int(np.ceil(2.0 * radius_px)) + 1


def _flat_index(bx, by, k, height, width):
    ix = bx[:, None] + np.arange(k)[None, :]
    iy = by[:, None] + np.arange(k)[None, :]
    okx = (ix >= 0) & (ix < width)
    oky = (iy >= 0) & (iy < height)
    idx = iy[:, :, None] * width + ix[:, None, :]
    ok = oky[:, :, None] & okx[:, None, :]
    return idx, ok


def splat(xs, ys, height, width, sigma, radius_px):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size == 0:
        return np.zeros((height, width))
    k = n_slots(sigma, radius_px)
    bx, wx, _ = _axis_weights(xs, sigma, radius_px, k, False)
    by, wy, _ = _axis_weights(ys, sigma, radius_px, k, False)
    idx, ok = _flat_index(bx, by, k, height, width)
    vals = wy[:, :, None] * wx[:, None, :]
    img = np.bincount(idx[ok], weights=vals[ok], minlength=height * width)
    return img.reshape(height, width)


def splat_adjoint(xs, ys, adj, sigma, radius_px):
    """Return (dx, dy) with dx[k] = sum_p adj[p] * dI[p]/dx_k."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    adj = np.asarray(adj, dtype=np.float64)
    if xs.size == 0:
        return np.zeros(0), np.zeros(0)
    height, width = adj.shape
    k = n_slots(sigma, radius_px)
    bx, wx, dwx = _axis_weights(xs, sigma, radius_px, k, True)
    by, wy, dwy = _axis_weights(ys, sigma, radius_px, k, True)
    idx, ok = _flat_index(bx, by, k, height, width)
    a = np.where(ok, adj.ravel()[np.where(ok, idx, 0)], 0.0)
    dx = np.einsum("nji,nj,ni->n", a, wy, dwx)
    dy = np.einsum("nji,nj,ni->n", a, dwy, wx)
    return dx, dy
