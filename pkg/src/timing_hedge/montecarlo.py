"""Exact-increment simulation of the log-price model and the Monte Carlo oracles.

Every estimator draws its randomness block by block from a counter-based
generator (Philox keyed by the seed, counter offset by the block index), and
block statistics are merged in block order. Results therefore depend only on
``(seed, config, inputs)`` and not on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from . import kernels
from .density import s1_call_logprice
from .errors import ConfigError, DomainError, PreconditionError
from .model import BarrierContract, GbmParams, PayoffSpec, payoff_pi
from .quadrature import sqrt_end_rule


@dataclass(frozen=True)
class McConfig:
    """Path count, monitoring steps, seed and variance-reduction switches.

    With ``antithetic=True`` paths come in ``(Z, -Z)`` pairs and the pair
    average is the independent sampling unit.
    """

    n_paths: int
    n_steps: int = 64
    seed: int = 0
    bridge: bool = True
    antithetic: bool = False
    block_size: int = 16384
    workers: int = 1

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise ConfigError(f"n_paths must be >= 1, got {self.n_paths}")
        if int(self.n_steps) < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.block_size < 2 or self.block_size % 2:
            raise ConfigError("block_size must be an even number >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def n_units(self) -> int:
        return (self.n_paths + 1) // 2 if self.antithetic else self.n_paths

    @property
    def units_per_block(self) -> int:
        return self.block_size // 2 if self.antithetic else self.block_size


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_effective: int

    def zscore(self, value: float) -> float:
        if self.stderr == 0:
            return 0.0 if value == self.mean else math.copysign(math.inf, self.mean - value)
        return (self.mean - value) / self.stderr

    def agrees_with(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr

    def __str__(self):
        return f"{self.mean:.10g} +/- {self.stderr:.3g} (n={self.n_effective})"


class MomentSummary:
    """Sample mean and co-moment matrix of per-unit values, mergeable in order."""

    def __init__(self, values: np.ndarray):
        values = np.atleast_2d(np.asarray(values, dtype=float).T).T
        self.n = values.shape[0]
        self.mean = values.mean(axis=0) if self.n else np.zeros(values.shape[1])
        dev = values - self.mean
        self.comoment = dev.T @ dev

    def merge(self, other: "MomentSummary") -> "MomentSummary":
        n = self.n + other.n
        if other.n == 0:
            return self
        delta = other.mean - self.mean
        out = MomentSummary.__new__(MomentSummary)
        out.n = n
        out.mean = self.mean + delta * (other.n / n)
        out.comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.n * other.n / n)
        return out

    def linear(self, weights) -> McEstimate:
        """Estimate of ``sum_k w_k E[column_k]``."""
        w = np.asarray(weights, dtype=float)
        mean = float(w @ self.mean)
        if self.n < 2:
            return McEstimate(mean, 0.0, self.n)
        var = float(w @ self.comoment @ w) / (self.n - 1)
        return McEstimate(mean, math.sqrt(max(var, 0.0) / self.n), self.n)

    def column(self, k: int) -> McEstimate:
        w = np.zeros(self.mean.size)
        w[k] = 1.0
        return self.linear(w)

    def columns(self) -> list[McEstimate]:
        return [self.column(k) for k in range(self.mean.size)]


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent stream for block ``block``; disjoint from every other block."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(block), 0]))


def normals(rng: np.random.Generator, n_units: int, m: int, antithetic: bool) -> np.ndarray:
    base = rng.standard_normal((n_units, m))
    return np.vstack([base, -base]) if antithetic else base


def pair_mean(values: np.ndarray, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return values
    half = values.shape[0] // 2
    return 0.5 * (values[:half] + values[half:])


def _blocks(cfg: McConfig):
    per = cfg.units_per_block
    starts = range(0, cfg.n_units, per)
    return [(b, min(per, cfg.n_units - s)) for b, s in enumerate(starts)]


def run_blocks(cfg: McConfig, block_fn: Callable[[np.random.Generator, int], np.ndarray]) -> MomentSummary:
    """Evaluate ``block_fn(rng, n_units)`` per block and merge statistics in block order.

    ``block_fn`` returns per-unit values of shape ``(n_units,)`` or
    ``(n_units, n_cols)``.
    """
    def one(item):
        b, n = item
        vals = np.asarray(block_fn(block_rng(cfg.seed, b), n), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        return MomentSummary(vals)

    blocks = _blocks(cfg)
    if cfg.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(one, blocks))
    else:
        parts = [one(item) for item in blocks]
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    return total


# --------------------------------------------------------------------------
# Path simulation


def simulate_terminal(params: GbmParams, x0: float, horizon: float, cfg: McConfig) -> np.ndarray:
    """Exact samples of ``X_horizon`` given ``X_0 = x0``; one per path, block order."""
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    sd = params.sigma * math.sqrt(horizon)
    drift = params.mu * horizon
    out = []
    for b, n in _blocks(cfg):
        z = normals(block_rng(cfg.seed, b), n, 1, cfg.antithetic)[:, 0]
        out.append(x0 + (drift + sd * z))
    return np.concatenate(out)[: cfg.n_paths]


@dataclass
class PathBlock:
    """One block of simulated paths on the monitoring grid ``times``."""

    times: np.ndarray
    path: np.ndarray
    survival: np.ndarray
    hit_step: np.ndarray
    x0: float

    def at(self, index) -> np.ndarray:
        return self.path[:, index]

    def survival_at(self, index) -> np.ndarray:
        return self.survival[:, index]


def monitoring_grid(horizon: float, n_steps: int, extra=()) -> np.ndarray:
    grid = np.linspace(0.0, horizon, n_steps + 1)[1:]
    if len(extra):
        grid = np.union1d(grid, np.asarray(extra, dtype=float))
    return grid[grid > 0]


def _simulate_block(params, x0, barrier, grid, cfg, rng, n_units, with_uniforms=False):
    dt = np.diff(np.concatenate([[0.0], grid]))
    z = normals(rng, n_units, grid.size, cfg.antithetic)
    u = rng.random(z.shape) if with_uniforms else None
    path, surv, hit = kernels.bridge_walk(
        x0, params.mu * dt, params.sigma * np.sqrt(dt), barrier, z, u, cfg.bridge
    )
    return PathBlock(grid, path, surv, hit, x0)


def path_functional_mc(
    params: GbmParams,
    x0: float,
    barrier: float,
    horizon: float,
    cfg: McConfig,
    functional: Callable[[PathBlock], np.ndarray],
    observation_times=(),
    with_uniforms: bool = False,
) -> MomentSummary:
    """Moments of ``functional(block)`` over simulated paths.

    The monitoring grid is the uniform ``n_steps`` grid merged with
    ``observation_times``; the bridge correction is exact for any spacing.
    """
    if not x0 > barrier:
        raise PreconditionError("paths must start strictly above the barrier")
    grid = monitoring_grid(horizon, cfg.n_steps, observation_times)

    def block_fn(rng, n):
        blk = _simulate_block(params, x0, barrier, grid, cfg, rng, n, with_uniforms)
        return pair_mean(np.asarray(functional(blk), dtype=float), cfg.antithetic)

    return run_blocks(cfg, block_fn)


@dataclass
class HitSample:
    hit: np.ndarray
    survival: np.ndarray
    hit_time: np.ndarray


def hitting_indicator(params: GbmParams, x0: float, barrier: float, horizon: float, cfg: McConfig) -> HitSample:
    """Per-path barrier hits on the ``n_steps`` grid.

    With ``cfg.bridge`` each step crosses with the Brownian-bridge
    probability; ``hit`` is then a draw from those probabilities and
    ``survival`` the exact conditional probability of no crossing. The hit
    time is the midpoint of the crossing step (the monitoring date without
    the bridge).
    """
    if not x0 > barrier:
        raise PreconditionError("x0 must lie strictly above the barrier")
    grid = monitoring_grid(horizon, cfg.n_steps)
    dt = horizon / cfg.n_steps
    hits, survs, times = [], [], []
    for b, n in _blocks(cfg):
        blk = _simulate_block(params, x0, barrier, grid, cfg, block_rng(cfg.seed, b), n, True)
        h = blk.hit_step
        hits.append(h >= 0)
        survs.append(blk.survival[:, -1])
        offset = 0.5 if cfg.bridge else 1.0
        times.append(np.where(h >= 0, (h + offset) * dt, np.nan))
    k = cfg.n_paths
    return HitSample(np.concatenate(hits)[:k], np.concatenate(survs)[:k], np.concatenate(times)[:k])


def hit_probability_mc(params: GbmParams, x0: float, barrier: float, horizon: float, cfg: McConfig) -> McEstimate:
    """Estimate of ``P(tau <= horizon)`` from the conditional crossing probabilities."""
    summary = path_functional_mc(
        params, x0, barrier, horizon, cfg, lambda blk: 1.0 - blk.survival[:, -1]
    )
    return summary.column(0)


# --------------------------------------------------------------------------
# Hedging-error oracles


def he1_mc(contract: BarrierContract, params: GbmParams, cfg: McConfig, discount: bool = False) -> McEstimate:
    """Difference of the two calls restarted at ``X = log K`` with ``T - tau`` to run."""
    k, kp, dlt = contract.barrier, contract.hedge_strike, contract.remaining
    drift = params.mu * dlt
    sd = params.sigma * math.sqrt(dlt)
    disc = math.exp(-params.r * dlt) if discount else 1.0

    def block_fn(rng, n):
        w = sd * normals(rng, n, 1, cfg.antithetic)[:, 0]
        v = np.maximum(k * np.exp(drift + w) - kp, 0.0) - np.maximum(k * np.exp(-drift - w) - kp, 0.0)
        return disc * pair_mean(v, cfg.antithetic)

    return run_blocks(cfg, block_fn).column(0)


def he2_integrand_samples(contract: BarrierContract, params: GbmParams, v, z):
    """Unbiased samples of the second-order error for ``v ~ U(0, sqrt(T - tau))``, ``z ~ N(0, 1)``."""
    sigma, mu = params.sigma, params.mu
    k, kp, dlt = contract.barrier, contract.hedge_strike, contract.remaining
    ds = v * v
    rem = dlt - ds
    sr = sigma * np.sqrt(rem)
    a = math.log(k / kp) + sigma * sigma * rem
    spread = sigma * np.sqrt(ds) * z
    u1 = (mu + sigma * sigma) * ds + spread
    u2 = (mu - sigma * sigma) * ds - spread
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.exp(mu * ds) * np.sign(u1) * ndtr((a + u1) / sr) + np.exp(-mu * ds) * np.sign(u2) * ndtr(
            (a - u2) / sr
        )
    g = np.nan_to_num(g)
    return mu * k * math.exp(0.5 * sigma * sigma * dlt) * 2.0 * v * math.sqrt(dlt) * g


def he2_mc(contract: BarrierContract, params: GbmParams, cfg: McConfig) -> McEstimate:
    """Monte Carlo of the second-order double integral, sampling ``s = tau + v^2`` and the Gaussian ``u``."""
    root = math.sqrt(contract.remaining)

    def block_fn(rng, n):
        v = root * rng.random(n)
        z = normals(rng, n, 1, cfg.antithetic)[:, 0]
        if cfg.antithetic:
            v = np.concatenate([v, v])
        return pair_mean(he2_integrand_samples(contract, params, v, z), cfg.antithetic)

    return run_blocks(cfg, block_fn).column(0)


# --------------------------------------------------------------------------
# Knock-out replication


def _check_call(payoff: PayoffSpec, contract: BarrierContract):
    if payoff.kind != "call":
        raise DomainError("the closed-form correction term is only available for the call payoff")
    if abs(payoff.log_barrier - contract.log_barrier) > 1e-14:
        raise DomainError("payoff and contract barriers differ")


def correction_nodes(maturity: float, n_time: int):
    """Time nodes for ``int_0^T ... ds``, clustered towards maturity."""
    return sqrt_end_rule(0.0, maturity, n_time)


@dataclass(frozen=True)
class ReplicationEstimate:
    knockout: McEstimate
    hedge0: McEstimate
    hedge1: McEstimate
    error0: McEstimate
    error1: McEstimate
    improvement: McEstimate

    @property
    def significant(self) -> bool:
        return self.improvement.mean > 3.0 * self.improvement.stderr


def _replication_summary(contract, params, payoff, cfg, n_time):
    _check_call(payoff, contract)
    s_nodes, s_w = correction_nodes(contract.maturity, n_time)
    lk = contract.log_barrier
    T = contract.maturity

    def functional(blk: PathBlock):
        idx = np.searchsorted(blk.times, s_nodes)
        xs = blk.path[:, idx]
        xt = blk.path[:, -1]
        ko = payoff(xt) * blk.survival[:, -1]
        hedge0 = payoff_pi(payoff, xt)
        g = s1_call_logprice(params, contract.barrier, payoff.strike, T - s_nodes[None, :], xs)
        g_ref = s1_call_logprice(
            params, contract.barrier, payoff.strike, T - s_nodes[None, :], 2 * lk - xs
        )
        corr = (np.where(xs < lk, g + g_ref, 0.0) * s_w[None, :]).sum(axis=1)
        return np.column_stack([ko, hedge0, corr])

    return path_functional_mc(
        params, math.log(contract.spot), lk, T, cfg, functional, observation_times=s_nodes
    )


def knockout_price_mc(contract: BarrierContract, params: GbmParams, payoff: PayoffSpec, cfg: McConfig) -> McEstimate:
    """``E[F(X_T) 1{tau >= T}]`` from the spot, bridge-weighted when enabled."""
    summary = path_functional_mc(
        params, math.log(contract.spot), contract.log_barrier, contract.maturity, cfg,
        lambda blk: payoff(blk.path[:, -1]) * blk.survival[:, -1],
    )
    return summary.column(0)


def hedge_portfolio_mc(
    contract: BarrierContract, params: GbmParams, payoff: PayoffSpec, cfg: McConfig,
    order: int = 1, n_time: int = 24,
) -> McEstimate:
    """Value of the static hedge: ``E[pi(F)(X_T)]``, minus the first correction integral when ``order >= 1``."""
    if order not in (0, 1):
        raise DomainError("hedge_portfolio_mc supports order 0 or 1")
    summary = _replication_summary(contract, params, payoff, cfg, n_time)
    return summary.linear([0.0, 1.0, -float(order)])


def replication_mc(
    contract: BarrierContract, params: GbmParams, payoff: PayoffSpec, cfg: McConfig, n_time: int = 24
) -> ReplicationEstimate:
    """Knock-out price and both hedges on shared paths, with a paired improvement test.

    ``improvement`` estimates ``|E[KO - hedge0]| - |E[KO - hedge1]|`` per path
    with the signs of the two mean errors held fixed.
    """
    summary = _replication_summary(contract, params, payoff, cfg, n_time)
    e0 = summary.linear([1.0, -1.0, 0.0])
    e1 = summary.linear([1.0, -1.0, 1.0])
    s0 = 1.0 if e0.mean >= 0 else -1.0
    s1 = 1.0 if e1.mean >= 0 else -1.0
    improvement = summary.linear([s0 - s1, -(s0 - s1), -s1])
    return ReplicationEstimate(
        knockout=summary.column(0),
        hedge0=summary.column(1),
        hedge1=summary.linear([0.0, 1.0, -1.0]),
        error0=e0,
        error1=e1,
        improvement=improvement,
    )


__all__ = [
    "McConfig",
    "McEstimate",
    "MomentSummary",
    "PathBlock",
    "HitSample",
    "ReplicationEstimate",
    "block_rng",
    "simulate_terminal",
    "hitting_indicator",
    "hit_probability_mc",
    "path_functional_mc",
    "he1_mc",
    "he2_mc",
    "he2_integrand_samples",
    "knockout_price_mc",
    "hedge_portfolio_mc",
    "replication_mc",
    "correction_nodes",
]
