"""First-passage law of drifted Brownian motion and the discounted hitting-time identity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, ndtr

from .density import drifted_density
from .errors import DomainError, QuadratureError
from .model import GbmParams, PayoffSpec, payoff_pi
from .montecarlo import McConfig, McEstimate, path_functional_mc
from .quadrature import gauss_legendre_pieces

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12


@dataclass(frozen=True)
class FirstPassageSpec:
    """Start ``X_0``, lower barrier ``log K`` (may be ``-inf``), model and horizon ``T``."""

    start: float
    barrier: float
    params: GbmParams
    horizon: float

    def __post_init__(self):
        if not self.start > self.barrier:
            raise DomainError("the start must lie strictly above the barrier")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")

    @property
    def distance(self) -> float:
        return self.start - self.barrier

    @classmethod
    def from_prices(cls, spot: float, barrier: float, params: GbmParams, horizon: float):
        return cls(math.log(spot), math.log(barrier), params, horizon)


def first_passage_cdf(spec: FirstPassageSpec, s):
    """``P(tau <= s)`` for ``tau = inf{u : X_u < log K}``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("s must be nonnegative")
    b, mu, sigma = spec.distance, spec.params.mu, spec.params.sigma
    if math.isinf(b):
        out = np.zeros_like(s)
        return out if out.ndim else float(out)
    pos = s > 0
    ss = np.where(pos, s, 1.0)
    sd = sigma * np.sqrt(ss)
    first = ndtr((-b - mu * ss) / sd)
    second = np.exp(-2.0 * mu * b / sigma**2 + log_ndtr((-b + mu * ss) / sd))
    out = np.where(pos, np.minimum(first + second, 1.0), 0.0)
    return out if out.ndim else float(out)


def first_passage_density(spec: FirstPassageSpec, s):
    """Inverse-Gaussian density of the hitting time (analytic derivative of the CDF)."""
    s = np.asarray(s, dtype=float)
    b, mu, sigma = spec.distance, spec.params.mu, spec.params.sigma
    if math.isinf(b):
        out = np.zeros_like(s)
        return out if out.ndim else float(out)
    pos = s > 0
    ss = np.where(pos, s, 1.0)
    val = b / (sigma * np.sqrt(2.0 * math.pi * ss**3)) * np.exp(-((b + mu * ss) ** 2) / (2 * sigma**2 * ss))
    out = np.where(pos, val, 0.0)
    return out if out.ndim else float(out)


def _quad(fn, a, b, points, what):
    res = integrate.quad(
        fn, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=400, points=points, full_output=1
    )
    val, err, info = res[:3]
    if len(res) > 3:
        raise QuadratureError(
            f"{what}: {res[3]}",
            {"error_estimate": err, "subintervals": info.get("last"), "interval": (a, b)},
        )
    return val


def _density_peak(spec: FirstPassageSpec) -> float:
    """Mode of the hitting-time density on ``(0, T)``; used as a quadrature breakpoint."""
    b, mu, sigma = spec.distance, spec.params.mu, spec.params.sigma
    # mode solves 2 mu^2 s^2 + 3 sigma^2 s - b^2 = 0
    if mu == 0:
        mode = b * b / (3 * sigma * sigma)
    else:
        mode = (-3 * sigma**2 + math.sqrt(9 * sigma**4 + 8 * mu**2 * b**2)) / (4 * mu**2)
    return min(max(mode, 1e-12), spec.horizon)


def carr_picron_sides(spec: FirstPassageSpec) -> tuple[float, float]:
    """Both sides of ``E[e^{-r tau} 1{tau<=T}] = e^{-rT} P(tau<=T) + r int_0^T e^{-rs} P(tau<=s) ds``.

    The left side integrates the discounted hitting-time density, the right
    side the distribution function; the two quadratures share no nodes.
    """
    r, T = spec.params.r, spec.horizon
    if math.isinf(spec.distance):
        return 0.0, 0.0
    peak = _density_peak(spec)
    points = [peak] if 0 < peak < T else None
    lhs = _quad(lambda s: math.exp(-r * s) * first_passage_density(spec, s), 0.0, T, points, "density side")
    tail = _quad(lambda s: math.exp(-r * s) * first_passage_cdf(spec, s), 0.0, T, points, "distribution side")
    rhs = math.exp(-r * T) * first_passage_cdf(spec, T) + r * tail
    return lhs, rhs


def carr_picron_residual(spec: FirstPassageSpec) -> float:
    lhs, rhs = carr_picron_sides(spec)
    return lhs - rhs


def discounted_hit_value(spec: FirstPassageSpec) -> float:
    """``E[e^{-r tau} 1{tau <= T}]`` from the density quadrature."""
    return carr_picron_sides(spec)[0]


def timing_risk_value(
    spec: FirstPassageSpec,
    psi: Callable,
    payoff: PayoffSpec,
    mc: McConfig,
    discount: bool = False,
) -> McEstimate:
    """Monte Carlo value of ``E[1{tau < T} psi(T - tau) E[F(X_T) | F_tau]]``.

    The inner expectation is evaluated analytically from the restart point
    ``X_tau = log K``. With the bridge each monitoring step contributes its
    conditional crossing probability, the crossing being placed at the step
    midpoint. ``discount`` multiplies by ``e^{-rT}``.
    """
    T = spec.horizon
    params = spec.params
    state = {}

    def functional(blk):
        if "weights" not in state:
            t = blk.times
            prev = np.concatenate([[0.0], t[:-1]])
            when = 0.5 * (prev + t) if mc.bridge else t
            rem = T - when
            g = payoff.expected_value(params, spec.barrier, rem)
            state["weights"] = np.asarray(psi(rem), dtype=float) * g
        surv = blk.survival
        prev = np.concatenate([np.ones((surv.shape[0], 1)), surv[:, :-1]], axis=1)
        return (prev - surv) @ state["weights"]

    summary = path_functional_mc(params, spec.start, spec.barrier, T, mc, functional)
    est = summary.column(0)
    if discount:
        d = math.exp(-params.r * T)
        est = McEstimate(d * est.mean, d * est.stderr, est.n_effective)
    return est


def c_f_profile(
    kind: str,
    params: GbmParams,
    payoff: PayoffSpec,
    x_tau: float,
    times,
    psi0: float = 1.0,
    n: int = 96,
) -> np.ndarray:
    """``c_F(t) = psi(0) int p(t, x_tau, y) G(y) dy`` on a set of times.

    ``kind="unit"`` uses the model density and ``G = F``; ``kind="reflected"``
    uses the driftless density and ``G = pi(F)``. A constant profile
    confirms the constancy requirement on ``c_F`` for that configuration.
    """
    if kind not in ("unit", "reflected"):
        raise DomainError(f"unknown c_F kind {kind!r}")
    out = []
    for t in np.atleast_1d(np.asarray(times, dtype=float)):
        if t <= 0:
            raise DomainError("c_F needs t > 0")
        mu = params.mu if kind == "unit" else 0.0
        sd = params.sigma * math.sqrt(t)
        centre = x_tau + mu * t
        breaks = [centre - 12 * sd, centre + 12 * sd, payoff.log_barrier]
        if payoff.strike:
            breaks.append(payoff.log_strike)
            breaks.append(2 * payoff.log_barrier - payoff.log_strike)
        lo, hi = centre - 12 * sd, centre + 12 * sd
        breaks = sorted(b for b in breaks if lo <= b <= hi)
        y, w = gauss_legendre_pieces(breaks, n)
        g = payoff(y) if kind == "unit" else payoff_pi(payoff, y)
        out.append(psi0 * float((w * drifted_density(t, x_tau, y, mu, params.sigma) * g).sum()))
    return np.array(out)
