"""Acceptance criteria, each at its stated tolerance; one pass/fail line per criterion."""

import math
import time

import numpy as np

from timing_hedge import (
    BarrierContract,
    DiffusionSpec1D,
    EulerDensityParams,
    FirstPassageSpec,
    GbmParams,
    McConfig,
    PayoffSpec,
    ReflectionHyperplane,
    carr_picron_residual,
    he1,
    he1_mc,
    he2,
    parametrix_identity_residual,
    reflection_symmetry_residual,
    replication_mc,
    sweep_surface,
)
from timing_hedge.hedging_errors import hedging_benefit, monotonicity_violations
from timing_hedge.montecarlo import he2_mc
from timing_hedge.parametrix import SeriesBoundInputs, bound_sequence, bound_turnover, gbm_bound_constants, series_table

PLOT_KPRIME = np.linspace(80.0, 100.0, 41)
PLOT_SIGMA = np.linspace(0.05, 0.4, 36)


def test_criterion_01_he1_against_mc(report, base_contract, base_params):
    value = he1(base_contract, base_params)
    start = time.perf_counter()
    est = he1_mc(base_contract, base_params, McConfig(1_000_000, seed=101, antithetic=True, workers=1))
    elapsed = time.perf_counter() - start
    z = abs(est.zscore(value))
    ok = z <= 3.0 and elapsed < 5.0
    report(1, ok, f"he1={value:.12g} mc={est.mean:.8g}+/-{est.stderr:.2g} |z|={z:.2f} time={elapsed:.2f}s")
    assert ok


def test_criterion_02_zero_drift(report):
    worst = 0.0
    for kp in np.linspace(80.0, 100.0, 5):
        for sg in np.linspace(0.05, 0.4, 5):
            c = BarrierContract(80.0, kp, 1.0, 0.6)
            p = GbmParams.zero_drift(sg)
            worst = max(worst, abs(he1(c, p)), abs(he2(c, p).total))
    ok = worst <= 1e-12
    report(2, ok, f"max |he| = {worst:.3g} on 5x5 grid")
    assert ok


def test_criterion_03_he2_against_mc(report):
    worst_z, worst_gap = 0.0, 0.0
    for kp in (85.0, 90.0, 95.0):
        for sg in (0.1, 0.2, 0.3):
            c = BarrierContract(80.0, kp, 1.0, 0.6)
            p = GbmParams(0.03, sg)
            res = he2(c, p)
            est = he2_mc(c, p, McConfig(1_000_000, seed=202))
            worst_z = max(worst_z, abs(est.zscore(res.total)))
            worst_gap = max(worst_gap, abs(sum(res.components) - res.total))
    ok = worst_z <= 3.0 and worst_gap <= 1e-10
    report(3, ok, f"max |z| = {worst_z:.2f}, component gap = {worst_gap:.2g}")
    assert ok


def test_criterion_04_benefit_ratio(report):
    kps, sgs = np.linspace(85.0, 100.0, 31), np.linspace(0.1, 0.4, 31)
    surf = sweep_surface("ratio", kps, sgs)
    gamma = surf.values[surf.defined]
    benefit = np.array([hedging_benefit(g) for g in gamma])
    fraction = float(np.mean((benefit >= 0.8) & (benefit <= 1.0)))
    band = (sgs >= 0.3 - 1e-12) & (sgs <= 0.4 + 1e-12)
    band_vals = surf.values[:, band][surf.defined[:, band]]
    high = int(np.sum(1.0 - np.abs(band_vals) > 0.9))
    ok = fraction >= 0.6 and high > 0
    undefined = int((~surf.defined).sum())
    report(4, ok, f"fraction in [0.8,1] = {fraction:.4f} ({undefined} undefined), cells > 0.9 in high-sigma band = {high}")
    assert ok


def test_criterion_05_carr_picron(report):
    start = time.perf_counter()
    worst = 0.0
    for sg in (0.1, 0.15, 0.2, 0.3, 0.4):
        for b in (0.05, 0.1, math.log(100.0 / 80.0), 0.35, 0.5):
            worst = max(worst, abs(carr_picron_residual(FirstPassageSpec(b, 0.0, GbmParams(0.03, sg), 1.0))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 1.0
    report(5, ok, f"max residual = {worst:.3g}, time = {elapsed:.3f}s")
    assert ok


def test_criterion_06_parametrix_identity(report):
    start = time.perf_counter()
    worst = 0.0
    for sg in (0.1, 0.2, 0.3):
        spec = DiffusionSpec1D.from_gbm(GbmParams(0.03, sg))
        for t in (0.1, 0.5, 1.0):
            for x in (math.log(70.0), math.log(80.0), math.log(95.0)):
                worst = max(worst, abs(parametrix_identity_residual(spec, t, x, math.log(80.0))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 30.0
    report(6, ok, f"max residual = {worst:.3g}, time = {elapsed:.2f}s")
    assert ok


def test_criterion_07_series_bound(report, base_contract, base_params):
    spec = DiffusionSpec1D.from_gbm(base_params)
    rows = series_table(spec, PayoffSpec.for_contract(base_contract), base_contract.maturity, 3)
    below = all(m <= b for _, b, m, _ in rows)
    c_q, c_b = gbm_bound_constants(base_params, base_contract.maturity)
    seq = bound_sequence(SeriesBoundInputs(c_q, c_b, 1.0, 1.0, 1), 40)
    turn = bound_turnover(seq)
    decreasing = bool(np.all(np.diff(seq[turn - 1 :]) < 0))
    ok = below and decreasing
    detail = ", ".join(f"N={n}: {m:.3g} <= {b:.3g}" for n, b, m, _ in rows)
    report(7, ok, f"{detail}; decreasing from N={turn}")
    assert ok


def test_criterion_08_replication(report, base_contract, base_params):
    rep = replication_mc(base_contract, base_params, PayoffSpec.for_contract(base_contract), McConfig(1_000_000, seed=303))
    z = rep.improvement.mean / rep.improvement.stderr
    ok = z > 3.0 and abs(rep.error1.mean) < abs(rep.error0.mean)
    report(8, ok, f"|e0| = {abs(rep.error0.mean):.4g}, |e1| = {abs(rep.error1.mean):.4g}, paired z = {z:.1f}")
    assert ok


def test_criterion_09_reflection_symmetry(report):
    plane = ReflectionHyperplane((1.0, 0.0), 0.5)
    x, y = np.array([0.5, -0.2]), np.array([1.3, 0.4])
    sym = EulerDensityParams.constant(np.diag([0.3, 1.7]), [0.0, 0.4])
    broken = EulerDensityParams.constant(np.diag([0.3, 1.7]), [0.8, 0.4])
    res = abs(reflection_symmetry_residual(sym, plane, 0.7, x, y))
    res_broken = abs(reflection_symmetry_residual(broken, plane, 0.7, x, y))
    ok = res <= 1e-12 and res_broken > 1e-4
    report(9, ok, f"symmetric residual = {res:.3g}, violated residual = {res_broken:.3g}")
    assert ok


def test_criterion_10_surface_monotonicity(report):
    first = monotonicity_violations(sweep_surface("first", PLOT_KPRIME, PLOT_SIGMA))
    second = monotonicity_violations(sweep_surface("second", PLOT_KPRIME, PLOT_SIGMA))
    ok = all(rep["sigma_lines"] == 0 and rep["kprime_lines"] == 0 for rep in (first, second))
    detail = "; ".join(
        f"{name}: sigma lines {rep['sigma_lines']}/41, K' lines {rep['kprime_lines']}/36"
        for name, rep in (("he1", first), ("he2", second))
    )
    report(10, ok, detail)
    assert ok
