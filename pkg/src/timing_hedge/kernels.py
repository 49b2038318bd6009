"""Select the compiled kernels when available, else the numpy fallback.

Set ``TIMING_HEDGE_PURE=1`` to force the fallback. ``BACKEND`` names the
implementation in use.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("TIMING_HEDGE_PURE"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _c(a):
    return np.ascontiguousarray(a, dtype=float)


def bridge_walk(x0, drift, vol, barrier, z, u=None, bridge=True, impl=None):
    """Walk paths; returns ``(path, survival, hit_step)``. See ``_kernels_py.bridge_walk``."""
    impl = impl or _impl
    z = _c(z)
    path = np.empty_like(z)
    surv = np.empty_like(z)
    hit = impl.bridge_walk(
        float(x0), _c(drift), _c(vol), float(barrier), z,
        None if u is None else _c(u), bool(bridge), path, surv,
    )
    return path, surv, np.asarray(hit)


def gauss_convolve(xs, fs, barrier, x_eval, drift_eval, t, gl_x, gl_w, half_width, breaks=(), impl=None):
    """Kernel integral with ``pi`` applied; see ``_kernels_py.gauss_convolve``."""
    impl = impl or _impl
    x_eval = _c(x_eval)
    drift_eval = _c(np.broadcast_to(drift_eval, x_eval.shape))
    return np.asarray(
        impl.gauss_convolve(
            _c(xs), _c(fs), float(barrier), x_eval, drift_eval, float(t),
            _c(gl_x), _c(gl_w), float(half_width), _c(np.atleast_1d(np.asarray(breaks, dtype=float))),
        )
    )
