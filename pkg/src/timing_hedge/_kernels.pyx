# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the path walk and the kernel convolution."""
import numpy as np

from libc.math cimport exp, sqrt, M_PI

cdef double INV_SQRT_2PI = 1.0 / sqrt(2.0 * M_PI)


def bridge_walk(double x0, const double[::1] drift, const double[::1] vol, double barrier,
                const double[:, ::1] z, u, bint bridge,
                double[:, ::1] path_out, double[:, ::1] surv_out):
    cdef Py_ssize_t n = z.shape[0], m = z.shape[1], i, j
    cdef const double[:, ::1] uu
    cdef bint have_u = u is not None
    if have_u:
        uu = u
    else:
        uu = np.zeros((1, 1))
    hit = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] hit_v = hit
    cdef double x, prev, a, c, p, s
    with nogil:
        for i in range(n):
            x = x0
            s = 1.0
            for j in range(m):
                prev = x
                x = x + (drift[j] + vol[j] * z[i, j])
                path_out[i, j] = x
                a = prev - barrier
                c = x - barrier
                if a > 0 and c > 0:
                    if bridge:
                        p = exp(-2.0 * a * c / (vol[j] * vol[j]))
                    else:
                        p = 0.0
                else:
                    p = 1.0
                s = s * (1.0 - p)
                surv_out[i, j] = s
                if hit_v[i] < 0:
                    if have_u:
                        if uu[i, j] < p:
                            hit_v[i] = j
                    elif p >= 1.0:
                        hit_v[i] = j
    return hit


cdef inline double _interp(const double[::1] xs, const double[::1] fs, double y) noexcept nogil:
    cdef Py_ssize_t n = xs.shape[0], lo = 0, hi, mid
    if y <= xs[0]:
        return fs[0]
    if y >= xs[n - 1]:
        return fs[n - 1]
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if xs[mid] <= y:
            lo = mid
        else:
            hi = mid
    return fs[lo] + (fs[hi] - fs[lo]) * (y - xs[lo]) / (xs[hi] - xs[lo])


def gauss_convolve(const double[::1] xs, const double[::1] fs, double barrier,
                   const double[::1] x_eval, const double[::1] drift_eval, double t,
                   const double[::1] gl_x, const double[::1] gl_w, double half_width,
                   const double[::1] breaks):
    cdef Py_ssize_t n = x_eval.shape[0], k = gl_x.shape[0], nb = breaks.shape[0]
    cdef Py_ssize_t i, j, piece, a, b, n_edges = nb + 3
    out = np.empty(n)
    edge_buf = np.empty(n_edges)
    cdef double[::1] out_v = out
    cdef double[::1] edges = edge_buf
    cdef double rt = sqrt(t), zz, y, f, acc, lo, hi, mid, half, tmp
    with nogil:
        for i in range(n):
            edges[0] = -half_width
            edges[1] = half_width
            edges[2] = _clip((barrier - x_eval[i]) / rt, half_width)
            for j in range(nb):
                edges[3 + j] = _clip((breaks[j] - x_eval[i]) / rt, half_width)
            # insertion sort; the edge list is tiny
            for a in range(1, n_edges):
                tmp = edges[a]
                b = a - 1
                while b >= 0 and edges[b] > tmp:
                    edges[b + 1] = edges[b]
                    b -= 1
                edges[b + 1] = tmp
            acc = 0.0
            for piece in range(n_edges - 1):
                lo = edges[piece]
                hi = edges[piece + 1]
                mid = 0.5 * (lo + hi)
                half = 0.5 * (hi - lo)
                for j in range(k):
                    zz = mid + half * gl_x[j]
                    y = x_eval[i] + rt * zz
                    if y >= barrier:
                        f = _interp(xs, fs, y)
                    else:
                        f = -_interp(xs, fs, 2.0 * barrier - y)
                    acc = acc + half * gl_w[j] * zz * INV_SQRT_2PI * exp(-0.5 * zz * zz) * f
            out_v[i] = drift_eval[i] * acc / rt
    return out


cdef inline double _clip(double z, double w) noexcept nogil:
    if z < -w:
        return -w
    if z > w:
        return w
    return z
