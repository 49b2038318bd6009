"""Fixed-node quadrature rules used by the hedging-error and parametrix code."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to ``[a, b]``."""
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def gauss_legendre_pieces(breaks, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule over consecutive intervals of ``breaks``.

    Empty or reversed intervals are skipped, so callers can pass split points
    that may fall outside the integration range after clipping.
    """
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b > a:
            x, w = gauss_legendre(a, b, n)
            nodes.append(x)
            weights.append(w)
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(weights)


def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite rule: integrates against the N(0, 1) density."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / np.sqrt(2.0 * np.pi)


def sqrt_endpoint_rule(t: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on ``(0, t)`` for integrands with square-root behaviour at both ends.

    Uses ``s = t sin^2(phi)``, whose Jacobian ``t sin(2 phi)`` cancels
    ``s^{-1/2} (t - s)^{-1/2}`` factors.
    """
    phi, w = gauss_legendre(0.0, 0.5 * np.pi, n)
    s = t * np.sin(phi) ** 2
    return s, w * t * np.sin(2.0 * phi)


def sqrt_start_rule(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on ``(a, b)`` after ``s = a + v^2``; removes an ``(s - a)^{-1/2}`` factor."""
    v, w = gauss_legendre(0.0, np.sqrt(b - a), n)
    return a + v * v, 2.0 * v * w


def sqrt_end_rule(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on ``(a, b)`` after ``s = b - v^2``; for square-root behaviour at ``b``."""
    v, w = gauss_legendre(0.0, np.sqrt(b - a), n)
    return b - v * v, 2.0 * v * w
