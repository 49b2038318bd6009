"""Command-line front end: hedging errors, surfaces, validation suites and the series bound.

Exit codes: 0 success, 1 computation or validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from .density import EulerDensityParams, ReflectionHyperplane, reflection_symmetry_residual
from .errors import DomainError, TimingHedgeError, UndefinedRatioError
from .hedging_errors import (
    BASE_FIXED,
    ErrorSurface,
    He2Quadrature,
    format_float,
    hedging_benefit,
    he1,
    he1_components,
    he2,
    ratio_gamma,
    sweep_surface,
)
from .model import BarrierContract, DiffusionSpec1D, GbmParams, PayoffSpec
from .montecarlo import McConfig, he1_mc, he2_mc, hit_probability_mc, replication_mc
from .parametrix import parametrix_identity_residual, series_table
from .timing_risk import (
    FirstPassageSpec,
    carr_picron_sides,
    first_passage_cdf,
    timing_risk_value,
)

DEFAULT_SEED = 12345
SEED_ENV = "TIMING_HEDGE_SEED"
SERIES_CAP = 12


class UsageError(Exception):
    pass


def parse_axis(text: str) -> np.ndarray:
    """Parse ``lo:hi:n`` into ``n`` evenly spaced points."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"axis must be lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad axis {text!r}: {exc}") from None
    if n < 1 or (n > 1 and not hi > lo) or (n == 1 and lo != hi):
        raise argparse.ArgumentTypeError(f"axis {text!r} needs n >= 1 and lo < hi (lo == hi when n == 1)")
    return np.linspace(lo, hi, n)


def resolve_seed(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


# --------------------------------------------------------------------------
# Parser


def _common(p: argparse.ArgumentParser, tol_help: str, tol_default):
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
    p.add_argument("--out", default=None, help="write results as CSV to this path")
    p.add_argument("--tol", type=float, default=tol_default, help=f"{tol_help} (default: %(default)s)")


def _model(p: argparse.ArgumentParser, kprime=True):
    p.add_argument("--K", type=float, default=80.0, help="barrier level (default: %(default)s)")
    if kprime:
        p.add_argument("--kprime", type=float, default=90.0, help="hedge strike K' (default: %(default)s)")
    p.add_argument("--sigma", type=float, default=0.2, help="volatility (default: %(default)s)")
    p.add_argument("--r", type=float, default=0.03, help="risk-free rate (default: %(default)s)")
    p.add_argument("--T", type=float, default=1.0, help="maturity in years (default: %(default)s)")


def _quad(p: argparse.ArgumentParser):
    p.add_argument("--n-outer", type=int, default=64, help="outer Gauss-Legendre nodes (default: %(default)s)")
    p.add_argument("--n-inner", type=int, default=64, help="inner nodes per panel (default: %(default)s)")
    p.add_argument("--truncation", type=float, default=8.0,
                   help="inner truncation in standard deviations (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timing-hedge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("he1", help="closed-form first-order hedging error")
    _model(p)
    p.add_argument("--tau", type=float, default=0.6, help="hitting time (default: %(default)s)")
    p.add_argument("--discount", action="store_true", help="multiply by exp(-r (T - tau))")
    p.add_argument("--mc-paths", type=int, default=0, help="also run the Monte Carlo oracle with this many paths")
    _common(p, "tolerance of the I - II consistency check", 1e-12)

    p = sub.add_parser("he2", help="second-order hedging error by quadrature")
    _model(p)
    p.add_argument("--tau", type=float, default=0.6, help="hitting time (default: %(default)s)")
    _quad(p)
    p.add_argument("--mc-paths", type=int, default=0, help="also run the Monte Carlo oracle with this many draws")
    _common(p, "component-sum consistency tolerance", 1e-10)

    p = sub.add_parser("ratio", help="ratio He2 / He1 and the hedging benefit 1 - |gamma|")
    _model(p)
    p.add_argument("--tau", type=float, default=0.6, help="hitting time (default: %(default)s)")
    _quad(p)
    _common(p, "floor on |He1| below which the ratio is undefined", 1e-12)

    p = sub.add_parser("sweep", help="error surface over K' x sigma, written as CSV")
    p.add_argument("--kind", choices=("first", "second", "ratio"), default="first")
    p.add_argument("--kprime", type=parse_axis, default=parse_axis("80:100:41"),
                   help="K' axis lo:hi:n (default: 80:100:41)")
    p.add_argument("--sigma", type=parse_axis, default=parse_axis("0.05:0.4:36"),
                   help="sigma axis lo:hi:n (default: 0.05:0.4:36)")
    p.add_argument("--K", type=float, default=BASE_FIXED["K"], help="barrier (default: %(default)s)")
    p.add_argument("--r", type=float, default=BASE_FIXED["r"], help="rate (default: %(default)s)")
    p.add_argument("--T", type=float, default=BASE_FIXED["T"], help="maturity (default: %(default)s)")
    p.add_argument("--tau", type=float, default=BASE_FIXED["tau"], help="hitting time (default: %(default)s)")
    p.add_argument("--workers", type=int, default=1, help="threads for cell evaluation (default: %(default)s)")
    _quad(p)
    _common(p, "component-sum consistency tolerance for second-order cells", 1e-10)

    p = sub.add_parser("validate", help="run the invariant suites and print PASS/FAIL per check")
    p.add_argument("--only", action="append", default=None,
                   help="run only these checks (comma separated, repeatable)")
    p.add_argument("--paths", type=int, default=200_000, help="Monte Carlo paths per oracle check")
    p.add_argument("--replication-paths", type=int, default=1_000_000,
                   help="paths for the knock-out replication check")
    p.add_argument("--flip-mu-sign", action="store_true",
                   help="debug: evaluate the closed form with the drift sign flipped (negative control)")
    p.add_argument("--list", action="store_true", help="list the available checks and exit")
    _common(p, "number of standard errors allowed in Monte Carlo comparisons", 3.0)

    p = sub.add_parser("series", help="convergence bound of the hedge series and measured operator norms")
    _model(p)
    p.add_argument("--nmax", type=int, default=8, help=f"largest order (capped at {SERIES_CAP})")
    p.add_argument("--measure-up-to", type=int, default=3, help="measure sup-norms up to this order")
    p.add_argument("--zero-drift", action="store_true", help="use r = sigma^2 / 2 (no drift)")
    _common(p, "relative slack allowed in measured <= bound", 0.0)

    p = sub.add_parser("timing", help="first-passage law, discounted hitting identity and timing risk")
    p.add_argument("--spot", type=float, default=100.0, help="spot price (default: %(default)s)")
    _model(p, kprime=False)
    p.add_argument("--paths", type=int, default=100_000, help="Monte Carlo paths for the timing risk value")
    p.add_argument("--steps", type=int, default=64, help="monitoring steps (default: %(default)s)")
    _common(p, "tolerance on the identity residual", 1e-8)
    return parser


# --------------------------------------------------------------------------
# Helpers


def _contract_params(args) -> tuple[BarrierContract, GbmParams]:
    try:
        return BarrierContract(args.K, args.kprime, args.T, args.tau), GbmParams(args.r, args.sigma)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _quad_cfg(args) -> He2Quadrature:
    try:
        return He2Quadrature(args.n_outer, args.n_inner, args.truncation, args.tol)
    except (DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _write_cell(path, kprime, sigma, value, kind):
    _write_rows(path, ["kprime", "sigma", "value", "kind"],
                [[format_float(kprime), format_float(sigma), format_float(value), kind]])


# --------------------------------------------------------------------------
# Commands


def cmd_he1(args) -> int:
    contract, params = _contract_params(args)
    seed = resolve_seed(args.seed)
    value = he1(contract, params, discount=args.discount)
    first, second = he1_components(contract, params)
    print(f"he1 = {format_float(value)}")
    print(f"I = {format_float(first)}  II = {format_float(second)}")
    ok = abs((first - second) * (math.exp(-params.r * contract.remaining) if args.discount else 1.0) - value) <= args.tol
    if args.mc_paths > 0:
        est = he1_mc(contract, params, McConfig(args.mc_paths, seed=seed, antithetic=True), discount=args.discount)
        agree = est.agrees_with(value, 3.0)
        print(f"he1_mc = {est}  z = {est.zscore(value):+.3f}  {'PASS' if agree else 'FAIL'}")
        ok = ok and agree
    if args.out:
        _write_cell(args.out, args.kprime, args.sigma, value, "first")
    return 0 if ok else 1


def cmd_he2(args) -> int:
    contract, params = _contract_params(args)
    q = _quad_cfg(args)
    seed = resolve_seed(args.seed)
    res = he2(contract, params, q)
    print(f"he2 = {format_float(res.total)}")
    print("components = " + " ".join(format_float(c) for c in res.components))
    ok = True
    if args.mc_paths > 0:
        est = he2_mc(contract, params, McConfig(args.mc_paths, seed=seed))
        ok = est.agrees_with(res.total, 3.0)
        print(f"he2_mc = {est}  z = {est.zscore(res.total):+.3f}  {'PASS' if ok else 'FAIL'}")
    if args.out:
        _write_cell(args.out, args.kprime, args.sigma, res.total, "second")
    return 0 if ok else 1


def cmd_ratio(args) -> int:
    contract, params = _contract_params(args)
    try:
        q = He2Quadrature(args.n_outer, args.n_inner, args.truncation)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    resolve_seed(args.seed)
    try:
        gamma = ratio_gamma(contract, params, q, floor=args.tol)
    except UndefinedRatioError as exc:
        print(f"ratio undefined: {exc}", file=sys.stderr)
        return 1
    print(f"gamma = {format_float(gamma)}")
    print(f"benefit = {format_float(hedging_benefit(gamma))}")
    if args.out:
        _write_cell(args.out, args.kprime, args.sigma, gamma, "ratio")
    return 0


def cmd_sweep(args) -> int:
    resolve_seed(args.seed)
    q = _quad_cfg(args)
    fixed = {"K": args.K, "r": args.r, "T": args.T, "tau": args.tau}
    try:
        BarrierContract(args.K, max(args.K, float(args.kprime[0])), args.T, args.tau)
        if args.kprime[0] < args.K:
            raise DomainError("every K' on the axis must be >= K")
        if args.sigma[0] <= 0:
            raise DomainError("sigma axis must be positive")
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    out = args.out or f"surface_{args.kind}.csv"
    surface = sweep_surface(args.kind, args.kprime, args.sigma, fixed, q, workers=args.workers)
    surface.to_csv(out)
    mag = np.abs(surface.values[surface.defined])
    line = f"wrote {surface.values.size} cells to {out}; min |value| = {format_float(mag.min())}, max |value| = {format_float(mag.max())}"
    if args.kind == "ratio":
        benefit = 1.0 - mag
        frac = float(np.mean((benefit >= 0.8) & (benefit <= 1.0))) if mag.size else float("nan")
        undefined = int((~surface.defined).sum())
        line += f"; fraction with 1-|gamma| in [0.8, 1] = {frac:.4f} ({undefined} undefined cells)"
    print(line)
    return 0


# --------------------------------------------------------------------------
# Validation suite


def _base():
    return BarrierContract(80.0, 90.0, 1.0, 0.6), GbmParams(0.03, 0.2)


def check_zero_drift(args):
    worst = 0.0
    for kp in np.linspace(80, 100, 5):
        for sg in np.linspace(0.05, 0.4, 5):
            c = BarrierContract(80.0, kp, 1.0, 0.6)
            p = GbmParams.zero_drift(sg)
            worst = max(worst, abs(he1(c, p)), abs(he2(c, p).total))
    return worst, 1e-12, worst <= 1e-12


def check_he1_components(args):
    c, p = _base()
    first, second = he1_components(c, p)
    gap = abs(he1(c, p) - (first - second))
    return gap, 1e-12, gap <= 1e-12


def check_he1_mc(args):
    c, p = _base()
    closed_params = GbmParams(p.sigma**2 - p.r, p.sigma) if args.flip_mu_sign else p
    value = he1(c, closed_params)
    est = he1_mc(c, p, McConfig(args.paths, seed=args.seed_value, antithetic=True))
    z = abs(est.zscore(value))
    return z, args.tol, z <= args.tol


def check_he2_mc(args):
    worst = 0.0
    for kp in (85.0, 90.0, 95.0):
        for sg in (0.1, 0.2, 0.3):
            c = BarrierContract(80.0, kp, 1.0, 0.6)
            p = GbmParams(0.03, sg)
            est = he2_mc(c, p, McConfig(args.paths, seed=args.seed_value))
            worst = max(worst, abs(est.zscore(he2(c, p).total)))
    return worst, args.tol, worst <= args.tol


def check_he2_consistency(args):
    c, p = _base()
    res = he2(c, p)
    gap = abs(sum(res.components) - res.total)
    return gap, 1e-10, gap <= 1e-10


def check_carr_picron(args):
    worst = 0.0
    for sg in (0.1, 0.15, 0.2, 0.3, 0.4):
        for b in (0.05, 0.1, math.log(100 / 80), 0.35, 0.5):
            spec = FirstPassageSpec(b, 0.0, GbmParams(0.03, sg), 1.0)
            lhs, rhs = carr_picron_sides(spec)
            worst = max(worst, abs(lhs - rhs))
    return worst, 1e-8, worst <= 1e-8


def check_lemma(args):
    worst = 0.0
    for sg in (0.1, 0.2, 0.3):
        spec = DiffusionSpec1D.from_gbm(GbmParams(0.03, sg))
        for t in (0.1, 0.5, 1.0):
            for x in (math.log(70), math.log(80), math.log(95)):
                worst = max(worst, abs(parametrix_identity_residual(spec, t, x, math.log(80))))
    return worst, 1e-6, worst <= 1e-6


def check_symmetry(args):
    plane = ReflectionHyperplane((1.0, 0.0), 0.5)
    sym = EulerDensityParams.constant(np.diag([0.3, 1.7]), [0.0, 0.4])
    x = np.array([0.5, -0.2])
    y = np.array([1.3, 0.4])
    res = abs(reflection_symmetry_residual(sym, plane, 0.7, x, y))
    return res, 1e-12, res <= 1e-12


def check_symmetry_violation(args):
    plane = ReflectionHyperplane((1.0, 0.0), 0.5)
    broken = EulerDensityParams.constant(np.diag([0.3, 1.7]), [0.8, 0.4])
    res = abs(reflection_symmetry_residual(broken, plane, 0.7, [0.5, -0.2], [1.3, 0.4]))
    return res, 1e-4, res > 1e-4


def check_bound(args):
    c, p = _base()
    spec = DiffusionSpec1D.from_gbm(p)
    rows = series_table(spec, PayoffSpec.for_contract(c), c.maturity, 3)
    worst = max(m / b for _, b, m, _ in rows)
    return worst, 1.0, worst <= 1.0


def check_hit_bridge(args):
    p = GbmParams(0.03, 0.2)
    spec = FirstPassageSpec.from_prices(100.0, 80.0, p, 1.0)
    est = hit_probability_mc(p, spec.start, spec.barrier, 1.0, McConfig(args.paths, n_steps=64, seed=args.seed_value))
    z = abs(est.zscore(first_passage_cdf(spec, 1.0)))
    return z, args.tol, z <= args.tol


def check_replication(args):
    c, p = _base()
    rep = replication_mc(c, p, PayoffSpec.for_contract(c), McConfig(args.replication_paths, seed=args.seed_value))
    z = rep.improvement.mean / rep.improvement.stderr if rep.improvement.stderr else math.inf
    return z, args.tol, z > args.tol


CHECKS = {
    "zero-drift": check_zero_drift,
    "he1-components": check_he1_components,
    "he1-mc": check_he1_mc,
    "he2-mc": check_he2_mc,
    "he2-consistency": check_he2_consistency,
    "carr-picron": check_carr_picron,
    "lemma": check_lemma,
    "symmetry": check_symmetry,
    "symmetry-violation": check_symmetry_violation,
    "bound": check_bound,
    "hit-bridge": check_hit_bridge,
    "replication": check_replication,
}


def cmd_validate(args) -> int:
    if args.list:
        for name in CHECKS:
            print(name)
        return 0
    names = list(CHECKS)
    if args.only:
        names = [n.strip() for item in args.only for n in item.split(",") if n.strip()]
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise UsageError(f"unknown check(s): {', '.join(unknown)}")
    if args.paths < 1 or args.replication_paths < 1:
        raise UsageError("path counts must be >= 1")
    args.seed_value = resolve_seed(args.seed)
    rows, failed = [], 0
    for name in names:
        measured, tol, ok = CHECKS[name](args)
        failed += not ok
        status = "PASS" if ok else "FAIL"
        print(f"{name:<20s} measured={measured:.6g} tol={tol:.3g} {status}")
        rows.append([name, format_float(measured), format_float(tol), status])
    if args.out:
        _write_rows(args.out, ["check", "measured", "tolerance", "status"], rows)
    return 1 if failed else 0


def cmd_series(args) -> int:
    resolve_seed(args.seed)
    nmax = args.nmax
    if nmax < 1:
        raise UsageError("--nmax must be >= 1")
    if nmax > SERIES_CAP:
        print(f"warning: --nmax capped at {SERIES_CAP}", file=sys.stderr)
        nmax = SERIES_CAP
    try:
        params = GbmParams.zero_drift(args.sigma) if args.zero_drift else GbmParams(args.r, args.sigma)
        payoff = PayoffSpec.call(args.K, args.kprime)
        if args.kprime < args.K:
            raise DomainError("need K <= K'")
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    spec = DiffusionSpec1D.from_gbm(params)
    rows = series_table(spec, payoff, args.T, nmax, min(args.measure_up_to, 3))
    ok = True
    print(f"{'N':>3s} {'bound':>24s} {'measured':>24s} {'bound ratio':>24s}")
    out_rows = []
    for n, bound, measured, ratio in rows:
        m_txt = format_float(measured) if measured is not None else ""
        r_txt = format_float(ratio) if ratio is not None else ""
        print(f"{n:>3d} {format_float(bound):>24s} {m_txt:>24s} {r_txt:>24s}")
        if measured is not None and measured > bound * (1.0 + args.tol):
            ok = False
        out_rows.append([n, format_float(bound), m_txt, r_txt])
    if args.out:
        _write_rows(args.out, ["N", "bound", "measured", "bound_ratio"], out_rows)
    return 0 if ok else 1


def cmd_timing(args) -> int:
    seed = resolve_seed(args.seed)
    try:
        params = GbmParams(args.r, args.sigma)
        spec = FirstPassageSpec.from_prices(args.spot, args.K, params, args.T)
        cfg = McConfig(args.paths, n_steps=args.steps, seed=seed)
    except (DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    prob = first_passage_cdf(spec, args.T)
    lhs, rhs = carr_picron_sides(spec)
    tr = timing_risk_value(spec, lambda u: np.exp(-params.r * (args.T - np.asarray(u))), PayoffSpec.constant(args.K), cfg)
    ok = abs(lhs - rhs) <= args.tol and tr.agrees_with(lhs, 3.0)
    results = [
        ("hit_probability", prob),
        ("discounted_hit_density_side", lhs),
        ("discounted_hit_distribution_side", rhs),
        ("residual", lhs - rhs),
        ("timing_risk_mc", tr.mean),
        ("timing_risk_mc_stderr", tr.stderr),
    ]
    for key, val in results:
        print(f"{key} = {format_float(val)}")
    print("PASS" if ok else "FAIL")
    if args.out:
        _write_rows(args.out, ["quantity", "value"], [[k, format_float(v)] for k, v in results])
    return 0 if ok else 1


COMMANDS = {
    "he1": cmd_he1,
    "he2": cmd_he2,
    "ratio": cmd_ratio,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "series": cmd_series,
    "timing": cmd_timing,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (TimingHedgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
