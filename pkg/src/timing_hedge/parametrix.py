"""Iterated kernel operators, the parametrix identity, the hedge series and its bound.

Gridded functions live in Lamperti coordinates ``y = s(x)``, where the
diffusion coefficient is one and the parametrix is the heat kernel.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import beta

from . import kernels
from .density import K_HALF, drifted_density
from .errors import DomainError
from .model import BarrierContract, DiffusionSpec1D, GbmParams, PayoffSpec, payoff_pi
from .montecarlo import McConfig, McEstimate, correction_nodes, path_functional_mc
from .quadrature import gauss_legendre, sqrt_endpoint_rule

MIN_NODES = 16
Y_TRUNCATION = 10.0


@dataclass(frozen=True)
class GridFunction:
    """Values on strictly increasing nodes; linear in between, constant outside.

    ``kinks`` optionally lists points where the underlying function is not
    smooth (e.g. a strike); kernel integrals split their panels there.
    """

    x_nodes: np.ndarray
    values: np.ndarray
    kinks: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.x_nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape:
            raise DomainError("x_nodes and values must be 1-D of equal length")
        if x.size < MIN_NODES:
            raise DomainError(f"need at least {MIN_NODES} nodes")
        if np.any(np.diff(x) <= 0):
            raise DomainError("x_nodes must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise DomainError("grid values must be finite")
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x_nodes, self.values)

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for x, v in zip(self.x_nodes, self.values):
                w.writerow([format(float(x), ".17g"), format(float(v), ".17g")])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["x"]) for r in rows]), np.array([float(r["value"]) for r in rows]))


def lamperti_barrier(spec: DiffusionSpec1D, payoff: PayoffSpec) -> float:
    return float(spec.lamperti(payoff.log_barrier))


def payoff_grid(
    spec: DiffusionSpec1D, payoff: PayoffSpec, horizon: float, n_nodes: int = 1025, width: float = Y_TRUNCATION
) -> GridFunction:
    """``F o s^{-1}`` tabulated on ``s(log K) +- width sqrt(horizon)``."""
    yb = lamperti_barrier(spec, payoff)
    half = width * math.sqrt(horizon)
    y = np.linspace(yb - half, yb + half, n_nodes)
    kinks = (float(spec.lamperti(payoff.log_strike)),) if payoff.kind in ("call", "digital") else ()
    return GridFunction(y, payoff(spec.lamperti_inverse(y)), kinks)


def s_op_1(
    spec: DiffusionSpec1D,
    payoff: PayoffSpec,
    t: float,
    f: GridFunction,
    n_nodes: int = 64,
    half_width: float = Y_TRUNCATION,
) -> GridFunction:
    """``S^1_t f(x) = int h(t, x, y) pi(f)(y) dy`` at every node of ``f``.

    ``pi`` is applied here, about the Lamperti image of the payoff barrier,
    so callers pass the raw function. The ``y`` integral covers
    ``half_width`` standard deviations and is split at the barrier.
    """
    if not t > 0:
        raise DomainError("S^1_t needs t > 0")
    yb = lamperti_barrier(spec, payoff)
    drift = spec.lamperti_drift(f.x_nodes)
    gx, gw = gauss_legendre(-1.0, 1.0, n_nodes)
    breaks = [k for k in f.kinks] + [2.0 * yb - k for k in f.kinks]
    vals = kernels.gauss_convolve(f.x_nodes, f.values, yb, f.x_nodes, drift, t, gx, gw, half_width, breaks)
    return GridFunction(f.x_nodes, vals)


def s_op_n(
    spec: DiffusionSpec1D,
    payoff: PayoffSpec,
    t: float,
    f: GridFunction,
    N: int,
    n_time: int = 24,
    n_nodes: int = 64,
) -> GridFunction:
    """``S^N_t f = int_0^t S^1_s (S^{N-1}_{t-s} f) ds``.

    The time integral uses ``s = t sin^2(phi)``, which absorbs the
    square-root singularities at both ends.
    """
    if N < 1 or int(N) != N:
        raise DomainError("order N must be an integer >= 1")
    if not t > 0:
        raise DomainError("S^N_t needs t > 0")
    if N == 1:
        return s_op_1(spec, payoff, t, f, n_nodes)
    s, w = sqrt_endpoint_rule(t, n_time)
    acc = np.zeros_like(f.values)
    for si, wi in zip(s, w):
        inner = s_op_n(spec, payoff, t - si, f, N - 1, n_time, n_nodes)
        acc += wi * s_op_1(spec, payoff, si, inner, n_nodes).values
    return GridFunction(f.x_nodes, acc)


def grid_pi_perp(g: GridFunction, y, y_barrier: float):
    """``pi_perp(g)(y) = g(y) 1{y < yb} + g(2 yb - y) 1{2 yb - y >= yb}``."""
    y = np.asarray(y, dtype=float)
    below = y < y_barrier
    return np.where(below, g(y) + g(2.0 * y_barrier - y), 0.0)


# --------------------------------------------------------------------------
# Convergence bound


@dataclass(frozen=True)
class SeriesBoundInputs:
    C_q: float
    C_b: float
    F_inf: float
    T: float
    N: int

    def __post_init__(self):
        if not (self.C_q > 0 and self.T > 0):
            raise DomainError("C_q and T must be positive")
        if self.C_b < 0 or self.F_inf < 0:
            raise DomainError("C_b and F_inf must be nonnegative")
        if self.N < 1 or int(self.N) != self.N:
            raise DomainError("N must be an integer >= 1")

    def with_order(self, N: int) -> "SeriesBoundInputs":
        return SeriesBoundInputs(self.C_q, self.C_b, self.F_inf, self.T, N)


def beta_product(N: int) -> float:
    """``prod_{k=1}^{N-1} B(k/2, 1/2)``, equal to ``pi^{N/2} / Gamma(N/2)``."""
    return float(np.prod([beta(k / 2.0, 0.5) for k in range(1, N)])) if N > 1 else 1.0


def series_bound(inputs: SeriesBoundInputs, printed: bool = False) -> float:
    """Bound on the order-``N`` term of the hedge series.

    ``2^{3N/2+2} pi^{1/2} C_q C_b^N K^N ||F|| prod B(k/2,1/2) T^{N/2} / N``
    with ``K = sup x^{1/2} e^{-x}``. This is the value of the nested time
    integral ``int_0^T s^{N/2-1} ds = 2 T^{N/2} / N``; ``printed=True``
    instead returns the variant with ``T^{(N-1)/2} / (N-1)`` for ``N >= 2``.
    """
    N = inputs.N
    head = 2.0 ** (1.5 * N + 2) * math.sqrt(math.pi) * inputs.C_q * inputs.F_inf
    head *= (inputs.C_b * K_HALF) ** N * beta_product(N)
    if printed and N >= 2:
        return head * inputs.T ** ((N - 1) / 2.0) / (N - 1)
    return head * inputs.T ** (N / 2.0) / N


def bound_sequence(inputs: SeriesBoundInputs, n_max: int, printed: bool = False) -> np.ndarray:
    return np.array([series_bound(inputs.with_order(n), printed) for n in range(1, n_max + 1)])


def bound_turnover(values) -> int:
    """Smallest ``N`` (1-based) from which the sequence is strictly decreasing."""
    v = np.asarray(values, dtype=float)
    turn = v.size
    for i in range(v.size - 1, 0, -1):
        if v[i] < v[i - 1]:
            turn = i
        else:
            break
    return turn


def gbm_bound_constants(params: GbmParams, horizon: float) -> tuple[float, float]:
    """``(C_q, C_b)`` for the constant-drift model in Lamperti coordinates.

    With Lamperti drift ``b = mu/sigma`` the drifted heat kernel satisfies
    ``q(t,x,y) <= e^{b^2 T/2} (2 pi t)^{-1/2} e^{-(x-y)^2/4t}`` for ``t <= T``.
    """
    b = params.mu / params.sigma
    return math.exp(0.5 * b * b * horizon) / math.sqrt(2.0 * math.pi), abs(b)


def measured_norms(
    spec: DiffusionSpec1D, payoff: PayoffSpec, horizon: float, orders=(1, 2, 3), f: GridFunction | None = None,
    n_time: int = 24,
) -> dict:
    """Sup-norm of ``S^N_T F`` over the payoff grid for each order."""
    f = f or payoff_grid(spec, payoff, horizon)
    return {N: s_op_n(spec, payoff, horizon, f, N, n_time).sup_norm() for N in orders}


def series_table(spec: DiffusionSpec1D, payoff: PayoffSpec, horizon: float, n_max: int, measure_up_to: int = 3):
    """Rows ``(N, bound, measured or None, bound(N)/bound(N-1) or None)``."""
    params = spec.to_gbm()
    c_q, _ = gbm_bound_constants(params, horizon)
    f = payoff_grid(spec, payoff, horizon)
    inputs = SeriesBoundInputs(c_q, spec.c_b, f.sup_norm(), horizon, 1)
    bounds = bound_sequence(inputs, n_max)
    measured = measured_norms(spec, payoff, horizon, range(1, min(n_max, measure_up_to) + 1), f)
    rows = []
    for i, b in enumerate(bounds):
        n = i + 1
        ratio = b / bounds[i - 1] if i and bounds[i - 1] > 0 else None
        rows.append((n, float(b), measured.get(n), ratio))
    return rows


# --------------------------------------------------------------------------
# Parametrix identity


def _central_diff(fn, t, step=1e-6):
    return (fn(t + step) - fn(t - step)) / (2 * step)


def parametrix_identity_residual(
    spec: DiffusionSpec1D,
    t: float,
    x: float,
    y: float,
    psi: Callable | None = None,
    psi_prime: Callable | None = None,
    n_time: int = 64,
    n_space: int = 64,
) -> float:
    """``psi(t) q(t,x,y) - psi(0) p(t,x,y)`` minus its kernel representation.

    The representation is
    ``int_0^t int q(t-s, x, z) [psi'(t-s) p(s, z, y) + psi(t-s) h(s, z, y)] dz ds``
    with ``q`` the model density, ``p`` its driftless counterpart and
    ``h = mu d_z p``. Both ``x`` and ``y`` are log-prices; the spec must have
    constant coefficients.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    mu, sigma = spec.constant_coefficients()
    if psi is None:
        psi, psi_prime = (lambda u: np.ones_like(np.asarray(u, dtype=float))), (
            lambda u: np.zeros_like(np.asarray(u, dtype=float))
        )
    elif psi_prime is None:
        psi_prime = lambda u: _central_diff(psi, u)  # noqa: E731

    lhs = float(psi(t)) * float(drifted_density(t, x, y, mu, sigma)) - float(psi(0.0)) * float(
        drifted_density(t, x, y, 0.0, sigma)
    )

    s, ws = gauss_legendre(0.0, t, n_time)
    back = t - s
    v1, v2 = sigma * sigma * back, sigma * sigma * s
    centre = ((x + mu * back) * v2 + y * v1) / (v1 + v2)
    sd = np.sqrt(v1 * v2 / (v1 + v2))
    gx, gw = gauss_legendre(-1.0, 1.0, n_space)
    z = centre[:, None] + Y_TRUNCATION * sd[:, None] * gx[None, :]
    wz = Y_TRUNCATION * sd[:, None] * gw[None, :]
    q = drifted_density(back[:, None], x, z, mu, sigma)
    p = drifted_density(s[:, None], z, y, 0.0, sigma)
    h = mu * (y - z) / (sigma * sigma * s[:, None]) * p
    inner = (wz * q * (np.asarray(psi_prime(back))[:, None] * p + np.asarray(psi(back))[:, None] * h)).sum(axis=1)
    rhs = float((ws * inner).sum())
    return lhs - rhs


# --------------------------------------------------------------------------
# Truncated hedge series


@dataclass(frozen=True)
class HedgeSeriesEstimate:
    knockout: McEstimate
    hedge: McEstimate
    residual: McEstimate
    identity_gap: McEstimate


def truncated_hedge_summary(
    spec: DiffusionSpec1D,
    payoff: PayoffSpec,
    contract: BarrierContract,
    N: int,
    mc: McConfig,
    n_time: int = 16,
    grid_nodes: int = 513,
) -> HedgeSeriesEstimate:
    """Order-``N`` hedge, its residual and the knock-out price on shared paths.

    ``hedge = E[pi(F)(X_T)] - sum_{k<N} int_0^T E[pi_perp(S^k_{T-s} F)(X_s)] ds``
    and ``residual = -int_0^T E[1{tau <= s} S^N_{T-s} F(X_s)] ds``, so that
    ``knockout = hedge + residual``; the sign is the one that makes the
    zero-drift case reproduce the plain reflection hedge. ``identity_gap``
    estimates ``knockout - hedge - residual`` path by path.
    """
    if N not in (1, 2):
        raise DomainError("Monte Carlo hedging is provided for N in {1, 2}")
    params = spec.to_gbm()
    T = contract.maturity
    f = payoff_grid(spec, payoff, T, grid_nodes)
    yb = lamperti_barrier(spec, payoff)
    s_nodes, s_w = correction_nodes(T, n_time)
    ops = {
        k: [s_op_n(spec, payoff, T - s, f, k) for s in s_nodes] for k in range(1, N + 1)
    }
    lk = contract.log_barrier

    def functional(blk):
        idx = np.searchsorted(blk.times, s_nodes)
        ys = spec.lamperti_table(np.clip(blk.path[:, idx], *spec.interval))
        xt = blk.path[:, -1]
        ko = payoff(xt) * blk.survival[:, -1]
        hedge = payoff_pi(payoff, xt)
        for k in range(1, N):
            corr = sum(s_w[j] * grid_pi_perp(ops[k][j], ys[:, j], yb) for j in range(len(s_nodes)))
            hedge = hedge - corr
        hit_by = 1.0 - blk.survival[:, idx]
        resid = -sum(s_w[j] * hit_by[:, j] * ops[N][j](ys[:, j]) for j in range(len(s_nodes)))
        return np.column_stack([ko, hedge, resid])

    summary = path_functional_mc(
        params, math.log(contract.spot), lk, T, mc, functional, observation_times=s_nodes
    )
    return HedgeSeriesEstimate(
        knockout=summary.column(0),
        hedge=summary.column(1),
        residual=summary.column(2),
        identity_gap=summary.linear([1.0, -1.0, -1.0]),
    )


def truncated_hedge_value(
    spec: DiffusionSpec1D,
    payoff: PayoffSpec,
    contract: BarrierContract,
    N: int,
    mc: McConfig,
    **kwargs,
) -> tuple[McEstimate, McEstimate]:
    """``(hedge, residual)`` of the order-``N`` semi-static hedge; see :func:`truncated_hedge_summary`."""
    est = truncated_hedge_summary(spec, payoff, contract, N, mc, **kwargs)
    return est.hedge, est.residual

