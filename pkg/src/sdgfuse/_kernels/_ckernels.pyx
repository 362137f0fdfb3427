# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_numpy.py``.

All loops run without the GIL so row tiles can be processed by a thread
pool.  Per-pixel arithmetic never depends on the tile split.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor

cnp.import_array()


cdef inline double _clampd(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline void _corners(double x, double y, Py_ssize_t h, Py_ssize_t w,
                          Py_ssize_t* x0, Py_ssize_t* x1, Py_ssize_t* y0, Py_ssize_t* y1,
                          double* fx, double* fy) noexcept nogil:
    cdef double fx0, fy0
    x = _clampd(x, 0.0, w - 1)
    y = _clampd(y, 0.0, h - 1)
    fx0 = floor(x)
    fy0 = floor(y)
    fx[0] = x - fx0
    fy[0] = y - fy0
    x0[0] = <Py_ssize_t>fx0
    y0[0] = <Py_ssize_t>fy0
    x1[0] = x0[0] + 1 if x0[0] + 1 < w else w - 1
    y1[0] = y0[0] + 1 if y0[0] + 1 < h else h - 1


cdef inline double _bil2(const double[:, ::1] a, Py_ssize_t x0, Py_ssize_t x1,
                         Py_ssize_t y0, Py_ssize_t y1, double fx, double fy) noexcept nogil:
    cdef double top = a[y0, x0] * (1.0 - fx) + a[y0, x1] * fx
    cdef double bot = a[y1, x0] * (1.0 - fx) + a[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def window_weights(const double[:, :, ::1] features, const double[:, :, ::1] xs,
                   const double[:, :, ::1] ys, Py_ssize_t row0, Py_ssize_t row1,
                   double inv_scale):
    cdef Py_ssize_t h = features.shape[0], w = features.shape[1], nc = features.shape[2]
    cdef Py_ssize_t n = xs.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out_arr = np.empty((row1 - row0, w, n))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t y, x, i, c, x0, x1, y0, y1
    cdef double fx, fy, dot, top, bot, mx, total
    with nogil:
        for y in range(row0, row1):
            for x in range(w):
                mx = -1e300
                for i in range(n):
                    _corners(xs[y, x, i], ys[y, x, i], h, w, &x0, &x1, &y0, &y1, &fx, &fy)
                    dot = 0.0
                    for c in range(nc):
                        top = features[y0, x0, c] * (1.0 - fx) + features[y0, x1, c] * fx
                        bot = features[y1, x0, c] * (1.0 - fx) + features[y1, x1, c] * fx
                        dot = dot + features[y, x, c] * (top * (1.0 - fy) + bot * fy)
                    dot = dot * inv_scale
                    out[y - row0, x, i] = dot
                    if dot > mx:
                        mx = dot
                total = 0.0
                for i in range(n):
                    out[y - row0, x, i] = exp(out[y - row0, x, i] - mx)
                    total = total + out[y - row0, x, i]
                for i in range(n):
                    out[y - row0, x, i] = out[y - row0, x, i] / total
    return out_arr


def window_propagate(const double[:, :, ::1] weights, const double[:, :, ::1] xs,
                     const double[:, :, ::1] ys, const double[:, ::1] values,
                     const double[:, ::1] mask, Py_ssize_t row0, Py_ssize_t row1):
    cdef Py_ssize_t h = values.shape[0], w = values.shape[1], n = weights.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dp_arr = np.zeros((row1 - row0, w))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cp_arr = np.zeros((row1 - row0, w))
    cdef double[:, ::1] dp = dp_arr
    cdef double[:, ::1] cp = cp_arr
    cdef Py_ssize_t y, x, i, x0, x1, y0, y1
    cdef double fx, fy, a, sd, sc
    with nogil:
        for y in range(row0, row1):
            for x in range(w):
                sd = 0.0
                sc = 0.0
                for i in range(n):
                    _corners(xs[y, x, i], ys[y, x, i], h, w, &x0, &x1, &y0, &y1, &fx, &fy)
                    a = weights[y, x, i]
                    sd = sd + a * _bil2(values, x0, x1, y0, y1, fx, fy)
                    sc = sc + a * _bil2(mask, x0, x1, y0, y1, fx, fy)
                dp[y - row0, x] = sd
                cp[y - row0, x] = sc
    return dp_arr, cp_arr


cdef inline void _sgm_step(const double[:, :, ::1] cost, double[:, :, ::1] out,
                           Py_ssize_t y, Py_ssize_t x, Py_ssize_t py, Py_ssize_t px,
                           double p1, double pen2, Py_ssize_t nd) noexcept nogil:
    cdef Py_ssize_t d
    cdef double m = out[py, px, 0]
    cdef double best, v
    for d in range(1, nd):
        if out[py, px, d] < m:
            m = out[py, px, d]
    for d in range(nd):
        best = out[py, px, d]
        if d > 0:
            v = out[py, px, d - 1] + p1
            if v < best:
                best = v
        if d + 1 < nd:
            v = out[py, px, d + 1] + p1
            if v < best:
                best = v
        v = m + pen2
        if v < best:
            best = v
        out[y, x, d] = cost[y, x, d] + (best - m)


def sgm_path(const double[:, :, ::1] cost, double p1, const double[:, ::1] p2,
             int dy, int dx):
    cdef Py_ssize_t h = cost.shape[0], w = cost.shape[1], nd = cost.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out_arr = np.empty((h, w, nd))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t y, x, yi, xi, d, py, px
    with nogil:
        for yi in range(h):
            y = yi if dy >= 0 else h - 1 - yi
            for xi in range(w):
                x = xi if dx >= 0 else w - 1 - xi
                py = y - dy
                px = x - dx
                if py < 0 or py >= h or px < 0 or px >= w:
                    for d in range(nd):
                        out[y, x, d] = cost[y, x, d]
                else:
                    _sgm_step(cost, out, y, x, py, px, p1, p2[y, x], nd)
    return out_arr


def jbu(const double[:, ::1] low, const double[:, ::1] guide_full,
        const double[:, ::1] guide_low, double scale, double inv_two_sigma2,
        Py_ssize_t row0, Py_ssize_t row1):
    cdef Py_ssize_t hl = low.shape[0], wl = low.shape[1], wf = guide_full.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.empty((row1 - row0, wf))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t y, x, x0, x1, y0, y1, j
    cdef double ly, lx, fx, fy, g, diff, wgt, num, den, bil
    cdef Py_ssize_t cy[2]
    cdef Py_ssize_t cx[2]
    cdef double wy[2]
    cdef double wx[2]
    with nogil:
        for y in range(row0, row1):
            ly = (y + 0.5) / scale - 0.5
            for x in range(wf):
                lx = (x + 0.5) / scale - 0.5
                _corners(lx, ly, hl, wl, &x0, &x1, &y0, &y1, &fx, &fy)
                bil = _bil2(low, x0, x1, y0, y1, fx, fy)
                if inv_two_sigma2 <= 0:
                    out[y - row0, x] = bil
                    continue
                cy[0] = y0
                cy[1] = y1
                cx[0] = x0
                cx[1] = x1
                wy[0] = 1.0 - fy
                wy[1] = fy
                wx[0] = 1.0 - fx
                wx[1] = fx
                g = guide_full[y, x]
                num = 0.0
                den = 0.0
                for j in range(4):
                    diff = g - guide_low[cy[j // 2], cx[j % 2]]
                    wgt = (wy[j // 2] * wx[j % 2]) * exp(-diff * diff * inv_two_sigma2)
                    num = num + wgt * low[cy[j // 2], cx[j % 2]]
                    den = den + wgt
                if den > 1e-12:
                    out[y - row0, x] = num / den
                else:
                    out[y - row0, x] = bil
    return out_arr
