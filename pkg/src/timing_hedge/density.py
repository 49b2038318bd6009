"""Gaussian transition densities, the parametrix kernel and reflection maps."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, PreconditionError
from .model import DiffusionSpec1D, GbmParams

CDF_SATURATION = 38.0
K_HALF = math.sqrt(0.5) * math.exp(-0.5)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_cdf(z):
    """Standard normal CDF, saturating to exactly 0 or 1 beyond ``|z| = 38``."""
    z = np.asarray(z, dtype=float)
    out = ndtr(z)
    out = np.where(z > CDF_SATURATION, 1.0, np.where(z < -CDF_SATURATION, 0.0, out))
    return out if out.ndim else float(out)


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return out if out.ndim else float(out)


class GaussKernel1D:
    """The unit-variance heat kernel ``p(t, x, y)`` used as parametrix."""

    @staticmethod
    def density(t, x, y):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("heat kernel needs t > 0")
        z = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) / np.sqrt(t)
        return normal_pdf(z) / np.sqrt(t)


def gauss_density(t, x, y):
    return GaussKernel1D.density(t, x, y)


def drifted_density(t, x, y, mu: float, sigma: float):
    """Density of ``x + mu t + sigma W_t`` at ``y``."""
    t = np.asarray(t, dtype=float)
    sd = sigma * np.sqrt(t)
    return normal_pdf((np.asarray(y, dtype=float) - x - mu * t) / sd) / sd


def kernel_h(spec: DiffusionSpec1D, t, x, y):
    """Parametrix kernel ``h(t, x, y) = -b(x) (x - y)/t p(t, x, y)`` in Lamperti coordinates.

    ``b`` is the drift of the Lamperti-transformed process, so ``-b`` equals
    ``-mu/sigma + sigma'/2`` evaluated at ``s^{-1}(x)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("kernel_h needs t > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = spec.lamperti_drift(x)
    out = -b * (x - y) / t * gauss_density(t, x, y)
    return out if np.ndim(out) else float(out)


def kernel_h_bound(spec_or_cb, t) -> float:
    """Envelope constant ``C_b 2^{3/2} K_{1/2} t^{-1/2}``.

    ``|h(t, x, y)|`` is dominated by this constant times ``p(2t, x, y)``.
    Accepts a :class:`DiffusionSpec1D` or the constant ``C_b`` itself.
    """
    if t <= 0:
        raise DomainError("kernel_h_bound needs t > 0")
    c_b = spec_or_cb.c_b if isinstance(spec_or_cb, DiffusionSpec1D) else float(spec_or_cb)
    return c_b * 2.0**1.5 * K_HALF / math.sqrt(t)


def s1_call_logprice(params: GbmParams, barrier: float, strike: float, t, x):
    """Kernel integral ``S^1_t F(x)`` for the call ``(e^x - K')^+`` under the log-price model.

    Closed form of ``mu d/dx E[pi(F)(x + sigma W_t)]``; used by the path
    estimators and as an oracle for the gridded operator.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("S^1_t needs t > 0")
    x = np.asarray(x, dtype=float)
    sigma, mu = params.sigma, params.mu
    sd = sigma * np.sqrt(t)
    lk, lks = math.log(barrier), math.log(strike)
    var = sigma * sigma * t
    up = np.exp(x + 0.5 * var) * ndtr((x + var - lks) / sd)
    down = barrier * barrier * np.exp(-x + 0.5 * var) * ndtr((2 * lk - lks - x + var) / sd)
    return mu * (up + down)


# --------------------------------------------------------------------------
# Multi-dimensional reflection and Euler densities


@dataclass(frozen=True)
class ReflectionHyperplane:
    """Hyperplane ``<x, gamma> = k`` with reflection ``theta(x) = Psi x + 2 k gamma``."""

    gamma: tuple[float, ...]
    k: float

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 1 or g.size == 0 or abs(np.linalg.norm(g) - 1.0) > 1e-12:
            raise DomainError("gamma must be a unit vector")
        object.__setattr__(self, "gamma", tuple(float(v) for v in g))

    @classmethod
    def from_normal(cls, normal, k: float) -> "ReflectionHyperplane":
        """Normalizes ``normal`` (scaling ``k`` accordingly)."""
        n = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(n)
        return cls(tuple(n / norm), k / norm)

    @property
    def dim(self) -> int:
        return len(self.gamma)

    @property
    def psi(self) -> np.ndarray:
        g = np.asarray(self.gamma)
        return np.eye(self.dim) - 2.0 * np.outer(g, g)

    def reflect(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.asarray(self.gamma)
        return x - 2.0 * (x @ g - self.k)[..., None] * g if x.ndim > 1 else x - 2.0 * (x @ g - self.k) * g

    def signed_distance(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.gamma) - self.k

    def on_plane(self, x, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.signed_distance(x)) <= tol))


@dataclass(frozen=True)
class EulerDensityParams:
    """Frozen-coefficient Gaussian density ``p^{A,b}_t(x, y)`` with coefficients at ``y``."""

    A_fn: Callable
    b_fn: Callable
    dim: int

    def __post_init__(self):
        if not 1 <= self.dim <= 4:
            raise DomainError("only dimensions 1..4 are supported")

    def A(self, y) -> np.ndarray:
        a = np.atleast_2d(np.asarray(self.A_fn(np.asarray(y, dtype=float)), dtype=float))
        if a.shape != (self.dim, self.dim):
            raise DomainError(f"A must be {self.dim}x{self.dim}, got {a.shape}")
        return a

    def b(self, y) -> np.ndarray:
        return np.asarray(self.b_fn(np.asarray(y, dtype=float)), dtype=float).reshape(self.dim)

    @classmethod
    def constant(cls, A, b) -> "EulerDensityParams":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return cls(lambda y: A, lambda y: b, A.shape[0])

    def ellipticity(self, points) -> tuple[float, float]:
        """Smallest and largest eigenvalue of ``A`` over sampled points."""
        eig = np.concatenate([np.linalg.eigvalsh(self.A(p)) for p in np.atleast_2d(points)])
        return float(eig.min()), float(eig.max())

    def psi_symmetry_defect(self, plane: ReflectionHyperplane, points) -> float:
        """Largest violation of ``A(x) = Psi A(theta x) Psi`` and ``b(x) = Psi b(theta x)``."""
        psi = plane.psi
        worst = 0.0
        for p in np.atleast_2d(points):
            q = plane.reflect(p)
            worst = max(
                worst,
                float(np.abs(self.A(p) - psi @ self.A(q) @ psi).max()),
                float(np.abs(self.b(p) - psi @ self.b(q)).max()),
            )
        return worst


def euler_density(params: EulerDensityParams, t: float, x, y) -> float:
    """Gaussian density with covariance ``A(y) t`` and mean ``y + b(y) t``, evaluated at ``x``."""
    if t <= 0:
        raise DomainError("euler_density needs t > 0")
    x = np.asarray(x, dtype=float).reshape(params.dim)
    y = np.asarray(y, dtype=float).reshape(params.dim)
    a = params.A(y)
    det = float(np.linalg.det(a))
    if not det > 0 or np.linalg.cond(a) > 1e14:
        raise DomainError("A(y) is singular or not positive definite")
    e = x - y - params.b(y) * t
    quad = float(e @ np.linalg.solve(a, e))
    d = params.dim
    return math.exp(-0.5 * quad / t) / math.sqrt((2.0 * math.pi * t) ** d * det)


def reflection_symmetry_residual(
    params: EulerDensityParams, plane: ReflectionHyperplane, t: float, x, y, tol: float = 1e-12
) -> float:
    """``p_t(x, y) - p_t(x, theta(y))`` for ``x`` on the hyperplane."""
    x = np.asarray(x, dtype=float)
    if plane.dim != params.dim:
        raise DomainError("hyperplane and density dimensions differ")
    if not plane.on_plane(x, tol):
        raise PreconditionError("x must lie on the reflection hyperplane")
    return euler_density(params, t, x, y) - euler_density(params, t, x, plane.reflect(y))
