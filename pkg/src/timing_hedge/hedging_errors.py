"""First- and second-order hedging errors of the reflection hedge under the log-price model."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, ConsistencyError, DomainError, UndefinedRatioError
from .model import BarrierContract, GbmParams
from .quadrature import gauss_legendre, sqrt_endpoint_rule

RATIO_FLOOR = 1e-12
SURFACE_KINDS = ("first", "second", "ratio")


def he1_components(contract: BarrierContract, params: GbmParams) -> tuple[float, float]:
    """Forward values ``I`` (call from ``log K``) and ``II`` (call on the reflected variable)."""
    dlt = contract.remaining
    if not dlt > 0:
        raise DomainError("need tau < T")
    sigma, mu = params.sigma, params.mu
    k, kp = contract.barrier, contract.hedge_strike
    sd = sigma * math.sqrt(dlt)
    d1 = (math.log(k / kp) - mu * dlt) / sd
    d2 = (math.log(k / kp) + mu * dlt) / sd
    half_var = 0.5 * sigma * sigma * dlt
    first = k * math.exp(half_var + mu * dlt) * ndtr(d2 + sd) - kp * ndtr(d2)
    second = k * math.exp(half_var - mu * dlt) * ndtr(d1 + sd) - kp * ndtr(d1)
    return float(first), float(second)


def he1(contract: BarrierContract, params: GbmParams, discount: bool = False) -> float:
    """Closed-form first-order hedging error at the hitting time.

    Parameters
    ----------
    contract : BarrierContract
        Barrier ``K``, hedge strike ``K'``, maturity and hitting time.
    params : GbmParams
        Rate and volatility.
    discount : bool, default False
        Multiply by ``e^{-r (T - tau)}``.

    Returns
    -------
    float
        ``K' [N(d1) - N(d2)] + K e^{sigma^2 D/2} [e^{mu D} N(d2 + sigma sqrt D) - e^{-mu D} N(d1 + sigma sqrt D)]``
        with ``D = T - tau``. Exactly zero when ``mu == 0``.
    """
    first, second = he1_components(contract, params)
    value = first - second
    if discount:
        value *= math.exp(-params.r * contract.remaining)
    return value


@dataclass(frozen=True)
class He2Quadrature:
    """Node counts and truncation for the second-order double integral.

    The outer variable is ``phi`` with ``s = tau + (T - tau) sin^2 phi``,
    which absorbs square-root behaviour at both ends. Each inner Gaussian
    integral runs over ``truncation`` standard deviations around its centre,
    split at ``u = 0``, at the kink of the normal CDF factor and six
    CDF-widths either side of it.
    """

    n_outer: int = 64
    n_inner: int = 64
    truncation: float = 8.0
    tol: float = 1e-10

    def __post_init__(self):
        if self.n_outer < 2 or self.n_inner < 2:
            raise ConfigError("node counts must be >= 2")
        if self.truncation < 8.0:
            raise ConfigError("truncation must be at least 8 standard deviations")


@dataclass(frozen=True)
class He2Result:
    total: float
    components: tuple[float, float, float, float]

    def __float__(self):
        return self.total


def _gauss_window(centre, sd, lo, hi, kink, ramp, width, n):
    """Nodes/weights for ``int_lo^hi g(u) phi(u; centre, sd^2) du`` truncated to ``centre +- width sd``.

    The window is cut at ``kink`` and at ``kink +- 6 ramp``, where ``ramp`` is
    the width of the normal-CDF transition in ``g``. Returns arrays of shape
    ``(n_outer, 4 n)``; panels outside ``[lo, hi]`` get zero weight.
    """
    a = np.maximum(lo, centre - width * sd)
    b = np.maximum(a, np.minimum(hi, centre + width * sd))
    cuts = [np.clip(kink + off * ramp, a, b) for off in (-6.0, 0.0, 6.0)]
    edges = [a, *cuts, b]
    x, w = gauss_legendre(-1.0, 1.0, n)
    nodes, weights = [], []
    for left, right in zip(edges[:-1], edges[1:]):
        half = 0.5 * (right - left)
        nodes.append(0.5 * (left + right)[:, None] + half[:, None] * x[None, :])
        weights.append(half[:, None] * w[None, :])
    u = np.concatenate(nodes, axis=1)
    wt = np.concatenate(weights, axis=1)
    z = (u - centre[:, None]) / sd[:, None]
    dens = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * sd[:, None])
    return u, wt * dens


def he2(contract: BarrierContract, params: GbmParams, q: He2Quadrature | None = None) -> He2Result:
    """Second-order hedging error as four signed double integrals.

    With ``D_s = s - tau``, ``a = log(K/K') + sigma^2 (T - s)`` and
    ``r_s = sigma sqrt(T - s)`` the error is ``mu K e^{sigma^2 (T-tau)/2}``
    times ``int_tau^T`` of

    1. ``+e^{mu D_s} int_{u>0} N((a+u)/r_s) phi(u; (mu+sigma^2) D_s, sigma^2 D_s) du``
    2. ``+e^{-mu D_s} int_{u>0} N((a-u)/r_s) phi(u; (mu-sigma^2) D_s, sigma^2 D_s) du``
    3. ``-e^{-mu D_s} int_{u<0} N((a-u)/r_s) phi(u; (mu-sigma^2) D_s, sigma^2 D_s) du``
    4. ``-e^{mu D_s} int_{u<0} N((a+u)/r_s) phi(u; (mu+sigma^2) D_s, sigma^2 D_s) du``

    The total is accumulated from the fused integrand and must match the
    component sum to ``q.tol`` (relative to the largest component).
    """
    q = q or He2Quadrature()
    dlt = contract.remaining
    if not dlt > 0:
        raise DomainError("need tau < T")
    sigma, mu = params.sigma, params.mu
    k, kp = contract.barrier, contract.hedge_strike
    ds, ws = sqrt_endpoint_rule(dlt, q.n_outer)
    # remaining time from the sin^2 rule directly; T - s loses it to rounding when T - tau is tiny
    rem = np.maximum(dlt - ds, 0.0)
    sr = np.maximum(sigma * np.sqrt(rem), 1e-300)
    a = math.log(k / kp) + sigma * sigma * rem
    sd = sigma * np.sqrt(ds)
    c_plus = (mu + sigma * sigma) * ds
    c_minus = (mu - sigma * sigma) * ds
    inf = np.full_like(ds, np.inf)
    zero = np.zeros_like(ds)
    width, n = q.truncation, q.n_inner

    def inner(centre, lo, hi, sign_u):
        kink = -sign_u * a
        u, w = _gauss_window(centre, sd, lo, hi, kink, sr, width, n)
        return (w * ndtr((a[:, None] + sign_u * u) / sr[:, None])).sum(axis=1)

    grow, shrink = np.exp(mu * ds), np.exp(-mu * ds)
    pieces = (
        grow * inner(c_plus, zero, inf, 1.0),
        shrink * inner(c_minus, zero, inf, -1.0),
        -shrink * inner(c_minus, -inf, zero, -1.0),
        -grow * inner(c_plus, -inf, zero, 1.0),
    )
    pref = mu * k * math.exp(0.5 * sigma * sigma * dlt)
    comps = tuple(float(pref * (ws * p).sum()) for p in pieces)
    total = float(pref * (ws * (pieces[0] + pieces[1] + pieces[2] + pieces[3])).sum())
    scale = max(1.0, max(abs(c) for c in comps))
    if abs(sum(comps) - total) > q.tol * scale:
        raise ConsistencyError(f"component sum {sum(comps)!r} differs from total {total!r}")
    return He2Result(total, comps)


def ratio_gamma(
    contract: BarrierContract, params: GbmParams, q: He2Quadrature | None = None, floor: float = RATIO_FLOOR
) -> float:
    """``He2 / He1``; raises :class:`UndefinedRatioError` when ``|He1| < floor``."""
    first = he1(contract, params)
    if not abs(first) >= floor:
        raise UndefinedRatioError(f"|He1| = {abs(first):.3g} is below the floor {floor:.3g}")
    return he2(contract, params, q).total / first


def hedging_benefit(gamma: float) -> float:
    return 1.0 - abs(gamma)


# --------------------------------------------------------------------------
# Surfaces


BASE_FIXED = {"K": 80.0, "r": 0.03, "T": 1.0, "tau": 0.6}


@dataclass
class ErrorSurface:
    """Grid of error values indexed ``[kprime, sigma]``; undefined ratio cells hold NaN."""

    kprime_axis: np.ndarray
    sigma_axis: np.ndarray
    values: np.ndarray
    kind: str
    defined: np.ndarray = field(default=None)

    def __post_init__(self):
        self.kprime_axis = np.asarray(self.kprime_axis, dtype=float)
        self.sigma_axis = np.asarray(self.sigma_axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.defined is None:
            self.defined = np.isfinite(self.values)

    def rows(self):
        """``(kprime, sigma, value)`` in row-major order (K' outer, sigma inner)."""
        for i, kp in enumerate(self.kprime_axis):
            for j, sg in enumerate(self.sigma_axis):
                yield float(kp), float(sg), float(self.values[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kprime", "sigma", "value", "kind"])
            for kp, sg, v in self.rows():
                writer.writerow([format_float(kp), format_float(sg), format_float(v), self.kind])

    @classmethod
    def from_csv(cls, path) -> "ErrorSurface":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        kps = sorted({float(r["kprime"]) for r in rows})
        sgs = sorted({float(r["sigma"]) for r in rows})
        vals = np.array([float(r["value"]) for r in rows]).reshape(len(kps), len(sgs))
        return cls(np.array(kps), np.array(sgs), vals, rows[0]["kind"])


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def _check_axis(axis, name):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0:
        raise DomainError(f"{name} axis must be a nonempty 1-D sequence")
    if np.any(np.diff(axis) <= 0):
        raise DomainError(f"{name} axis must be strictly increasing")
    return axis


def surface_cell(kind: str, kprime: float, sigma: float, fixed: dict, q: He2Quadrature | None = None) -> float:
    contract = BarrierContract(fixed["K"], kprime, fixed["T"], fixed["tau"])
    params = GbmParams(fixed["r"], sigma)
    if kind == "first":
        return he1(contract, params)
    if kind == "second":
        return he2(contract, params, q).total
    try:
        return ratio_gamma(contract, params, q)
    except UndefinedRatioError:
        return math.nan


def sweep_surface(
    kind: str,
    kprime_axis,
    sigma_axis,
    fixed: dict | None = None,
    q: He2Quadrature | None = None,
    workers: int = 1,
) -> ErrorSurface:
    """Evaluate ``he1``, ``he2`` or the ratio on the ``K' x sigma`` grid.

    Cells are independent; with ``workers > 1`` they run on a thread pool and
    are written back by index, so the result does not depend on scheduling.
    """
    if kind not in SURFACE_KINDS:
        raise DomainError(f"kind must be one of {SURFACE_KINDS}")
    kps = _check_axis(kprime_axis, "kprime")
    sgs = _check_axis(sigma_axis, "sigma")
    fixed = {**BASE_FIXED, **(fixed or {})}
    cells = [(i, j) for i in range(kps.size) for j in range(sgs.size)]

    def one(cell):
        i, j = cell
        return surface_cell(kind, kps[i], sgs[j], fixed, q)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(one, cells))
    else:
        vals = [one(c) for c in cells]
    values = np.array(vals, dtype=float).reshape(kps.size, sgs.size)
    return ErrorSurface(kps, sgs, values, kind)


def monotonicity_violations(surface: ErrorSurface, tol: float = 0.0) -> dict:
    """Grid lines where ``|value|`` fails to increase in sigma or decrease in K'.

    Returns counts and the worst offending step for both directions; a step
    counts as a violation when it goes the wrong way by more than ``tol``.
    """
    mag = np.abs(surface.values)
    d_sigma = np.diff(mag, axis=1)
    d_kprime = np.diff(mag, axis=0)
    bad_sigma = d_sigma < -tol
    bad_kprime = d_kprime > tol
    return {
        "sigma_lines": int(np.any(bad_sigma, axis=1).sum()),
        "sigma_steps": int(bad_sigma.sum()),
        "sigma_worst": float(-d_sigma.min()) if d_sigma.size else 0.0,
        "kprime_lines": int(np.any(bad_kprime, axis=0).sum()),
        "kprime_steps": int(bad_kprime.sum()),
        "kprime_worst": float(d_kprime.max()) if d_kprime.size else 0.0,
    }
