# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled splatting kernels. Same contract as ``_splat_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor, ceil, fabs

cnp.import_array()


cdef inline Py_ssize_t _weights(double a, double sigma, double radius_px,
                                Py_ssize_t k, double[::1] w, double[::1] dw,
                                bint with_grad) noexcept nogil:
    cdef double r = radius_px / sigma
    cdef double c = exp(-0.5 * r * r)
    cdef Py_ssize_t base = <Py_ssize_t>floor(a - radius_px) + 1
    cdef Py_ssize_t m
    cdef double u, e, g, z = 0.0, dz = 0.0
    for m in range(k):
        u = (base + m - a) / sigma
        if fabs(u) < r:
            e = exp(-0.5 * u * u)
            g = e - c * (1.0 + 0.5 * (r * r - u * u))
            w[m] = g
            z += g
            if with_grad:
                dw[m] = u * (e - c) / sigma
                dz += dw[m]
        else:
            w[m] = 0.0
            if with_grad:
                dw[m] = 0.0
    for m in range(k):
        w[m] = w[m] / z
        if with_grad:
            dw[m] = (dw[m] - w[m] * dz) / z
    return base


def n_slots(double sigma, double radius_px):
    return int(ceil(2.0 * radius_px)) + 1


def splat(xs, ys, Py_ssize_t height, Py_ssize_t width, double sigma, double radius_px):
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(ys, dtype=np.float64)
    out = np.zeros((height, width), dtype=np.float64)
    cdef double[:, ::1] img = out
    cdef Py_ssize_t k = n_slots(sigma, radius_px)
    cdef double[::1] wx = np.empty(k), wy = np.empty(k), dummy = np.empty(k)
    cdef Py_ssize_t n, i, j, bx, by, px, py
    cdef double wj
    with nogil:
        for n in range(x.shape[0]):
            bx = _weights(x[n], sigma, radius_px, k, wx, dummy, False)
            by = _weights(y[n], sigma, radius_px, k, wy, dummy, False)
            for j in range(k):
                py = by + j
                if py < 0 or py >= height:
                    continue
                wj = wy[j]
                for i in range(k):
                    px = bx + i
                    if px < 0 or px >= width:
                        continue
                    img[py, px] += wj * wx[i]
    return out


def splat_adjoint(xs, ys, adj, double sigma, double radius_px):
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef const double[:, ::1] a = np.ascontiguousarray(adj, dtype=np.float64)
    cdef Py_ssize_t height = a.shape[0], width = a.shape[1]
    gx_out = np.zeros(x.shape[0])
    gy_out = np.zeros(x.shape[0])
    cdef double[::1] gx = gx_out, gy = gy_out
    cdef Py_ssize_t k = n_slots(sigma, radius_px)
    cdef double[::1] wx = np.empty(k), wy = np.empty(k)
    cdef double[::1] dwx = np.empty(k), dwy = np.empty(k)
    cdef Py_ssize_t n, i, j, bx, by, px, py
    cdef double v, sx, sy, rx, ry
    with nogil:
        for n in range(x.shape[0]):
            bx = _weights(x[n], sigma, radius_px, k, wx, dwx, True)
            by = _weights(y[n], sigma, radius_px, k, wy, dwy, True)
            sx = 0.0
            sy = 0.0
            for j in range(k):
                py = by + j
                if py < 0 or py >= height:
                    continue
                rx = 0.0
                ry = 0.0
                for i in range(k):
                    px = bx + i
                    if px < 0 or px >= width:
                        continue
                    v = a[py, px]
                    rx += v * dwx[i]
                    ry += v * wx[i]
                sx += wy[j] * rx
                sy += dwy[j] * ry
            gx[n] = sx
            gy[n] = sy
    return gx_out, gy_out
