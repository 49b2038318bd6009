"""Model and contract types, payoffs, the reflection projections and the Lamperti map."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline
from scipy.special import ndtr

from .errors import DomainError, PreconditionError, QuadratureError
from .quadrature import gauss_legendre

FD_STEP = 1e-6
C_B_SAMPLES = 2048
LAMPERTI_TOL = 1e-10


@dataclass(frozen=True)
class GbmParams:
    """Risk-free rate and volatility of the log-price ``X_t = X_0 + sigma W_t + mu t``."""

    r: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive and finite, got {self.sigma}")
        if not math.isfinite(self.r):
            raise DomainError(f"r must be finite, got {self.r}")

    @property
    def mu(self) -> float:
        return self.r - 0.5 * self.sigma * self.sigma

    @classmethod
    def zero_drift(cls, sigma: float) -> "GbmParams":
        """Parameters with ``r = sigma^2 / 2``, i.e. ``mu == 0`` exactly."""
        return cls(r=0.5 * sigma * sigma, sigma=sigma)


@dataclass(frozen=True)
class BarrierContract:
    """Barrier ``K``, hedge strike ``K'``, maturity ``T`` and hitting time ``tau``.

    ``spot`` is only used by the path-dependent (knock-out) estimators.
    """

    barrier: float
    hedge_strike: float
    maturity: float
    hit_time: float
    spot: float = 100.0

    def __post_init__(self):
        if not 0 < self.barrier <= self.hedge_strike:
            raise DomainError(
                f"need 0 < K <= K', got K={self.barrier}, K'={self.hedge_strike}"
            )
        if not 0 <= self.hit_time < self.maturity:
            raise DomainError(
                f"need 0 <= tau < T, got tau={self.hit_time}, T={self.maturity}"
            )
        if not self.spot > self.barrier:
            raise DomainError(f"spot {self.spot} must lie above the barrier {self.barrier}")

    @property
    def log_barrier(self) -> float:
        return math.log(self.barrier)

    @property
    def remaining(self) -> float:
        """Time to maturity after the barrier hit, ``T - tau``."""
        return self.maturity - self.hit_time

    def replace(self, **changes) -> "BarrierContract":
        values = {
            "barrier": self.barrier,
            "hedge_strike": self.hedge_strike,
            "maturity": self.maturity,
            "hit_time": self.hit_time,
            "spot": self.spot,
        }
        values.update(changes)
        return BarrierContract(**values)


def reflect(x, log_barrier: float):
    """The reflection ``theta(x) = 2 log K - x``."""
    return 2.0 * log_barrier - np.asarray(x, dtype=float)


# --------------------------------------------------------------------------
# Payoffs


@dataclass(frozen=True)
class PayoffSpec:
    """A payoff ``F`` on log-prices together with the domain boundary ``log K``.

    ``kind`` is one of ``"call"``, ``"digital"``, ``"custom"`` (tabulated,
    linear interpolation, constant beyond the table) or ``"constant"``.
    """

    kind: str
    log_barrier: float
    strike: float | None = None
    level: float = 1.0
    grid_x: tuple[float, ...] = ()
    grid_values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("call", "digital", "custom", "constant"):
            raise DomainError(f"unknown payoff kind {self.kind!r}")
        if self.kind in ("call", "digital") and not (self.strike and self.strike > 0):
            raise DomainError(f"{self.kind} payoff needs a positive strike")
        if self.kind == "custom":
            if len(self.grid_x) < 2 or len(self.grid_x) != len(self.grid_values):
                raise DomainError("custom payoff needs matching grid_x / grid_values")
            if np.any(np.diff(self.grid_x) <= 0):
                raise DomainError("custom payoff grid must be strictly increasing")

    @classmethod
    def call(cls, barrier: float, strike: float) -> "PayoffSpec":
        return cls("call", math.log(barrier), strike=strike)

    @classmethod
    def digital(cls, barrier: float, strike: float) -> "PayoffSpec":
        return cls("digital", math.log(barrier), strike=strike)

    @classmethod
    def constant(cls, barrier: float, level: float = 1.0) -> "PayoffSpec":
        return cls("constant", math.log(barrier), level=level)

    @classmethod
    def from_grid(cls, barrier: float, x, values) -> "PayoffSpec":
        return cls(
            "custom",
            math.log(barrier),
            grid_x=tuple(float(v) for v in x),
            grid_values=tuple(float(v) for v in values),
        )

    @classmethod
    def for_contract(cls, contract: BarrierContract) -> "PayoffSpec":
        """The call ``(e^x - K')^+`` struck at the contract's hedge strike."""
        return cls.call(contract.barrier, contract.hedge_strike)

    @property
    def log_strike(self) -> float:
        return math.log(self.strike)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "call":
            return np.maximum(np.exp(x) - self.strike, 0.0)
        if self.kind == "digital":
            return np.where(x >= self.log_strike, 1.0, 0.0)
        if self.kind == "constant":
            return np.full_like(x, self.level)
        return np.interp(x, self.grid_x, self.grid_values)

    def expected_value(self, params: GbmParams, x, t):
        """``E[F(X_t) | X_0 = x]`` under the log-price model (no discounting)."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self.level, np.broadcast(x, t).shape).astype(float)
        mu, sigma = params.mu, params.sigma
        x, t = np.broadcast_arrays(x, t)
        out = np.asarray(self(x), dtype=float).copy()
        live = t > 0
        if not np.any(live):
            return out
        xs, ts = x[live], t[live]
        sd = sigma * np.sqrt(ts)
        if self.kind in ("call", "digital"):
            d_minus = (xs + mu * ts - self.log_strike) / sd
            if self.kind == "call":
                out[live] = np.exp(xs + (mu + 0.5 * sigma * sigma) * ts) * ndtr(
                    d_minus + sd
                ) - self.strike * ndtr(d_minus)
            else:
                out[live] = ndtr(d_minus)
            return out
        out[live] = _piecewise_linear_expectation(
            np.asarray(self.grid_x), np.asarray(self.grid_values), xs + mu * ts, sd
        )
        return out


def _piecewise_linear_expectation(nodes, values, mean, sd):
    """``E[f(Z)]`` for ``Z ~ N(mean, sd^2)`` and ``f`` the linear interpolant of the table.

    Writes ``f(z) = f_0 + sum_i s_i (clip(z, x_i, x_{i+1}) - x_i)`` and uses
    ``E[clip(Z, a, b) - a] = sd [G((m-a)/sd) - G((m-b)/sd)]`` with
    ``G(u) = u N(u) + phi(u)``, so the result is exact for the interpolant.
    """
    slopes = np.diff(values) / np.diff(nodes)
    m = mean[:, None]
    s = sd[:, None]

    def G(u):
        return u * ndtr(u) + np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)

    seg = s * (G((m - nodes[None, :-1]) / s) - G((m - nodes[None, 1:]) / s))
    return values[0] + seg @ slopes


def _in_domain_part(p: PayoffSpec, x):
    x = np.asarray(x, dtype=float)
    return np.where(x >= p.log_barrier, p(x), 0.0)


def payoff_pi(p: PayoffSpec, x):
    """``pi(F) = F 1_D - F_hat`` with ``F_hat = (F 1_D) o theta``."""
    x = np.asarray(x, dtype=float)
    return _in_domain_part(p, x) - _in_domain_part(p, reflect(x, p.log_barrier))


def payoff_pi_perp(p: PayoffSpec, x):
    """``pi_perp(F) = F 1_{D^c} + F_hat``; supported on the knock-in side."""
    x = np.asarray(x, dtype=float)
    below = np.where(x < p.log_barrier, p(x), 0.0)
    return below + _in_domain_part(p, reflect(x, p.log_barrier))


# --------------------------------------------------------------------------
# General one-dimensional diffusions and the Lamperti map


@dataclass(frozen=True)
class DiffusionSpec1D:
    """Coefficients of ``dX = sigma(X) dW + mu(X) dt`` on a bounded evaluation interval.

    ``c_b`` (the kernel constant ``sup|mu/sigma| + sup|sigma'|/2``) is
    estimated by dense sampling of the interval at construction time.
    """

    sigma_fn: Callable
    mu_fn: Callable
    interval: tuple[float, float]
    lamperti_ref: float = 0.0
    sigma_prime_fn: Callable | None = None
    c_b: float = field(init=False)
    _inverse: tuple | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = self.interval
        if not lo < hi:
            raise DomainError(f"empty evaluation interval {self.interval}")
        xs = np.linspace(lo, hi, C_B_SAMPLES)
        sig = self.sigma(xs)
        if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
            raise DomainError("sigma must be finite and positive on the evaluation interval")
        ratio = np.abs(np.asarray(self.mu_fn(xs), dtype=float) / sig)
        c_b = float(ratio.max() + 0.5 * np.abs(self.sigma_prime(xs)).max())
        if not math.isfinite(c_b):
            raise DomainError("kernel constant c_b is not finite")
        object.__setattr__(self, "c_b", c_b)
        object.__setattr__(self, "_inverse", None)

    @classmethod
    def from_gbm(cls, params: GbmParams, interval=(-10.0, 20.0)) -> "DiffusionSpec1D":
        """Constant coefficients of the log-price model; Lamperti map is ``x / sigma``."""
        sigma, mu = params.sigma, params.mu
        return cls(
            sigma_fn=lambda x: np.full_like(np.asarray(x, dtype=float), sigma),
            mu_fn=lambda x: np.full_like(np.asarray(x, dtype=float), mu),
            interval=tuple(interval),
            lamperti_ref=0.0,
            sigma_prime_fn=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        )

    def constant_coefficients(self, tol: float = 1e-12) -> tuple[float, float]:
        """``(mu, sigma)`` if both coefficients are constant on the interval."""
        xs = np.linspace(*self.interval, 257)
        sig = self.sigma(xs)
        mu = np.broadcast_to(np.asarray(self.mu_fn(xs), dtype=float), xs.shape)
        if np.ptp(sig) > tol * max(1.0, abs(sig[0])) or np.ptp(mu) > tol * max(1.0, abs(mu[0])):
            raise PreconditionError("operation needs constant coefficients")
        return float(mu[0]), float(sig[0])

    def to_gbm(self) -> GbmParams:
        """Log-price model with the same (constant) coefficients."""
        mu, sigma = self.constant_coefficients()
        return GbmParams(r=mu + 0.5 * sigma * sigma, sigma=sigma)

    def sigma(self, x):
        return np.asarray(self.sigma_fn(np.asarray(x, dtype=float)), dtype=float)

    def sigma_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma_prime_fn is not None:
            return np.asarray(self.sigma_prime_fn(x), dtype=float)
        return (self.sigma(x + FD_STEP) - self.sigma(x - FD_STEP)) / (2 * FD_STEP)

    def contains(self, x) -> bool:
        lo, hi = self.interval
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= lo) & (x <= hi)))

    def lamperti(self, x):
        return lamperti_transform(self, x)

    def _tables(self) -> tuple[CubicHermiteSpline, CubicHermiteSpline]:
        """Forward and inverse Lamperti splines on a 4097-point table of the interval."""
        if self._inverse is None:
            lo, hi = self.interval
            xs = np.linspace(lo, hi, 4097)
            # per-cell Gauss-Legendre keeps the cumulative table at ~1e-14
            gx, gw = gauss_legendre(0.0, 1.0, 16)
            h = xs[1] - xs[0]
            pts = xs[:-1, None] + h * gx[None, :]
            cell = (h * gw[None, :] / self.sigma(pts)).sum(axis=1)
            s = np.concatenate([[0.0], np.cumsum(cell)])
            s += float(lamperti_transform(self, lo))
            sig = self.sigma(xs)
            tables = (CubicHermiteSpline(xs, s, 1.0 / sig), CubicHermiteSpline(s, xs, sig))
            object.__setattr__(self, "_inverse", tables)
        return self._inverse

    def lamperti_table(self, x):
        """Tabulated ``s(x)``; vectorized alternative to :func:`lamperti_transform`."""
        table = self._tables()[0]
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise DomainError(f"x outside the evaluation interval {self.interval}")
        return table(x)

    def lamperti_inverse(self, y):
        """``s^{-1}(y)``; raises if ``y`` maps outside the evaluation interval."""
        table = self._tables()[1]
        y = np.asarray(y, dtype=float)
        lo, hi = table.x[0], table.x[-1]
        if np.any((y < lo - 1e-12) | (y > hi + 1e-12)):
            raise DomainError("Lamperti coordinate outside the evaluation interval")
        return table(np.clip(y, lo, hi))

    def lamperti_drift(self, y):
        """Drift ``mu/sigma - sigma'/2`` of ``Y = s(X)``, evaluated at ``s^{-1}(y)``."""
        x = self.lamperti_inverse(y)
        return np.asarray(self.mu_fn(x), dtype=float) / self.sigma(x) - 0.5 * self.sigma_prime(x)


def lamperti_transform(spec: DiffusionSpec1D, x):
    """``s(x) = integral of 1/sigma from lamperti_ref to x`` by adaptive quadrature."""
    xs = np.asarray(x, dtype=float)
    if not spec.contains(xs):
        raise DomainError(f"x outside the evaluation interval {spec.interval}")

    def integrand(y):
        sig = float(spec.sigma(y))
        if not math.isfinite(sig) or sig <= 0:
            raise DomainError(f"sigma({y}) = {sig} is not a positive finite number")
        return 1.0 / sig

    def one(xv):
        val, err, info = integrate.quad(
            integrand, spec.lamperti_ref, xv, epsabs=LAMPERTI_TOL, epsrel=0.0,
            limit=200, full_output=1,
        )[:3]
        if err > LAMPERTI_TOL * 10:
            raise QuadratureError(
                "Lamperti quadrature did not converge",
                {"x": xv, "error_estimate": err, "subintervals": info.get("last")},
            )
        return val

    if xs.ndim == 0:
        return one(float(xs))
    return np.array([one(v) for v in xs.ravel()]).reshape(xs.shape)
