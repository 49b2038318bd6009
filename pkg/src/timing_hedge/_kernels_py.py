"""Numpy implementations of the hot loops; same contract as the compiled module."""
from __future__ import annotations

import math

import numpy as np

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def bridge_walk(x0, drift, vol, barrier, z, u, bridge, path_out, surv_out):
    """Walk log-price paths and track survival above a lower barrier.

    Parameters
    ----------
    x0 : float
        Common starting point.
    drift, vol : ndarray, shape (m,)
        Per-step mean increment ``mu dt`` and standard deviation ``sigma sqrt(dt)``.
    barrier : float
        Lower barrier in log space.
    z : ndarray, shape (n, m)
        Standard normal draws.
    u : ndarray, shape (n, m) or None
        Uniforms used to sample the step in which a crossing happens.
    bridge : bool
        Use the Brownian-bridge crossing probability between monitoring dates.
    path_out, surv_out : ndarray, shape (n, m)
        Filled with the path and the cumulative survival probability.

    Returns
    -------
    ndarray of int64
        Index of the step containing the (sampled) crossing, ``-1`` if none.
    """
    inc = drift[None, :] + vol[None, :] * z
    inc[:, 0] += x0
    np.cumsum(inc, axis=1, out=path_out)
    prev = np.empty_like(path_out)
    prev[:, 0] = x0
    prev[:, 1:] = path_out[:, :-1]
    a = prev - barrier
    c = path_out - barrier
    alive = (a > 0) & (c > 0)
    if bridge:
        with np.errstate(over="ignore", invalid="ignore"):
            p = np.where(alive, np.exp(-2.0 * a * c / (vol * vol)[None, :]), 1.0)
    else:
        p = np.where(alive, 0.0, 1.0)
    np.cumprod(1.0 - p, axis=1, out=surv_out)
    hits = (u < p) if u is not None else (p >= 1.0)
    first = np.argmax(hits, axis=1)
    return np.where(hits[np.arange(hits.shape[0]), first], first, -1).astype(np.int64)


def gauss_convolve(xs, fs, barrier, x_eval, drift_eval, t, gl_x, gl_w, half_width, breaks):
    """``b(x)/sqrt(t) * int z phi(z) pi(f)(x + sqrt(t) z) dz`` over ``|z| <= half_width``.

    ``f`` is the piecewise-linear interpolant of ``(xs, fs)`` with constant
    extrapolation; ``pi(f)(y) = f(y)`` above the barrier and ``-f(2 barrier - y)``
    below it. The z-range is split at the barrier and at every point of
    ``breaks`` (kinks of ``pi(f)`` in ``y``), so no Gauss-Legendre panel
    straddles a jump or kink.
    """
    rt = math.sqrt(t)
    ys = np.concatenate([[barrier], np.asarray(breaks, dtype=float)])
    zb = np.clip((ys[None, :] - x_eval[:, None]) / rt, -half_width, half_width)
    edges = np.sort(
        np.concatenate([np.full((x_eval.size, 1), -half_width), zb, np.full((x_eval.size, 1), half_width)], axis=1),
        axis=1,
    )
    left, right = edges[:, :-1], edges[:, 1:]
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    z = (mid[:, :, None] + half[:, :, None] * gl_x[None, None, :]).reshape(x_eval.size, -1)
    w = (half[:, :, None] * gl_w[None, None, :]).reshape(x_eval.size, -1)
    y = x_eval[:, None] + rt * z
    above = y >= barrier
    f = np.where(above, np.interp(y, xs, fs), -np.interp(2.0 * barrier - y, xs, fs))
    acc = (w * z * _INV_SQRT_2PI * np.exp(-0.5 * z * z) * f).sum(axis=1)
    return drift_eval * acc / rt
