import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import beta, gamma

from timing_hedge import (
    BarrierContract,
    DiffusionSpec1D,
    DomainError,
    GbmParams,
    GridFunction,
    McConfig,
    PayoffSpec,
    PreconditionError,
    SeriesBoundInputs,
    parametrix_identity_residual,
    s_op_1,
    s_op_n,
    series_bound,
    truncated_hedge_value,
)
from timing_hedge.density import s1_call_logprice
from timing_hedge.parametrix import (
    beta_product,
    bound_sequence,
    bound_turnover,
    gbm_bound_constants,
    payoff_grid,
    series_table,
    truncated_hedge_summary,
)

BASE = GbmParams(0.03, 0.2)
CALL = PayoffSpec.call(80.0, 90.0)


def gbm_spec(params=BASE):
    return DiffusionSpec1D.from_gbm(params)


def test_grid_function_needs_nodes():
    with pytest.raises(DomainError):
        GridFunction(np.arange(8.0), np.zeros(8))
    with pytest.raises(DomainError):
        GridFunction(np.arange(20.0)[::-1], np.zeros(20))


def test_grid_function_constant_extrapolation():
    g = GridFunction(np.linspace(0, 1, 16), np.linspace(2, 3, 16))
    assert g(-5.0) == 2.0 and g(9.0) == 3.0


def test_grid_function_csv(tmp_path):
    g = GridFunction(np.linspace(0, 1, 17), np.sin(np.linspace(0, 1, 17)))
    path = tmp_path / "g.csv"
    g.to_csv(path)
    assert path.read_text().splitlines()[0] == "x,value"
    back = GridFunction.from_csv(path)
    assert np.array_equal(back.values, g.values) and np.array_equal(back.x_nodes, g.x_nodes)


def test_s1_vanishes_without_drift():
    spec = gbm_spec(GbmParams.zero_drift(0.2))
    f = payoff_grid(spec, CALL, 1.0, 257)
    assert np.all(s_op_1(spec, CALL, 0.5, f).values == 0.0)


def test_s1_vanishes_when_pi_kills_f():
    spec = gbm_spec()
    yb = math.log(80.0) / 0.2
    y = np.linspace(yb - 10, yb + 10, 257)
    # supported strictly below the barrier, so pi(f) = 0
    f = GridFunction(y, np.where(y < yb - 0.5, np.cos(y), 0.0))
    payoff = PayoffSpec.from_grid(80.0, y * 0.2, f.values)
    assert np.allclose(s_op_1(spec, payoff, 0.4, f).values, 0.0, atol=1e-15)


def test_s1_matches_closed_form_at_barrier():
    spec = gbm_spec()
    f = payoff_grid(spec, CALL, 1.0, 4097)
    g = s_op_1(spec, CALL, 0.4, f)
    x = math.log(80.0)
    closed = float(s1_call_logprice(BASE, 80.0, 90.0, 0.4, x))
    assert g(x / 0.2) == pytest.approx(closed, rel=1e-5)


def test_s1_matches_closed_form_across_grid():
    spec = gbm_spec()
    f = payoff_grid(spec, CALL, 1.0, 4097)
    g = s_op_1(spec, CALL, 0.4, f)
    xs = np.linspace(math.log(60.0), math.log(120.0), 41)
    closed = s1_call_logprice(BASE, 80.0, 90.0, 0.4, xs)
    assert np.max(np.abs(g(xs / 0.2) - closed)) < 1e-4


def test_s1_truncation_sensitivity():
    # node spacing held fixed so only the window changes; 10 sd sits at the discretisation floor
    spec = gbm_spec()
    f = payoff_grid(spec, CALL, 1.0, 1025)
    ref = s_op_1(spec, CALL, 0.4, f, n_nodes=1400, half_width=14.0).values
    gap = lambda w: np.max(np.abs(s_op_1(spec, CALL, 0.4, f, n_nodes=int(100 * w), half_width=w).values - ref))  # noqa: E731
    assert gap(10.0) < 5e-4
    assert gap(4.0) > 10 * gap(10.0)


def test_s_op_n_order_one_is_s1():
    spec = gbm_spec()
    f = payoff_grid(spec, CALL, 1.0, 257)
    assert np.array_equal(s_op_n(spec, CALL, 0.6, f, 1).values, s_op_1(spec, CALL, 0.6, f).values)


def test_s_op_n_zero_drift_order_two():
    spec = gbm_spec(GbmParams.zero_drift(0.25))
    f = payoff_grid(spec, CALL, 1.0, 129)
    assert np.all(s_op_n(spec, CALL, 1.0, f, 2, n_time=8).values == 0.0)


def test_s_op_n_rejects_bad_order():
    spec = gbm_spec()
    f = payoff_grid(spec, CALL, 1.0, 129)
    with pytest.raises(DomainError):
        s_op_n(spec, CALL, 1.0, f, 0)
    with pytest.raises(DomainError):
        s_op_1(spec, CALL, 0.0, f)


def test_beta_product_identities():
    assert beta_product(1) == 1.0
    assert beta_product(2) == pytest.approx(math.pi, rel=1e-15)
    for n in range(2, 12):
        assert beta_product(n) == pytest.approx(math.pi ** (n / 2) / gamma(n / 2), rel=1e-12)
        assert beta_product(n) == pytest.approx(np.prod([beta(k / 2, 0.5) for k in range(1, n)]), rel=1e-15)


def test_series_bound_without_kernel():
    for n in range(1, 6):
        assert series_bound(SeriesBoundInputs(1.0, 0.0, 3.0, 1.0, n)) == 0.0


def test_series_bound_unit_sweep_turns_over():
    seq = bound_sequence(SeriesBoundInputs(1.0, 1.0, 1.0, 1.0, 1), 12)
    turn = bound_turnover(seq)
    assert turn == 8
    assert np.all(np.diff(seq[turn - 1 :]) < 0)
    assert np.all(seq > 0)


def test_series_bound_formula_n2():
    inp = SeriesBoundInputs(0.7, 0.3, 2.0, 1.5, 2)
    k_half = math.sqrt(0.5) * math.exp(-0.5)
    expected = 2**5 * math.sqrt(math.pi) * 0.7 * (0.3 * k_half) ** 2 * math.pi * 2.0 * 1.5 / 2
    assert series_bound(inp) == pytest.approx(expected, rel=1e-14)
    printed = 2**5 * math.sqrt(math.pi) * 0.7 * (0.3 * k_half) ** 2 * math.pi * 2.0 * 1.5**0.5
    assert series_bound(inp, printed=True) == pytest.approx(printed, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.01, 3.0), st.floats(0.1, 3.0))
def test_series_bound_ratio_vanishes(c_b, T, c_q):
    seq = bound_sequence(SeriesBoundInputs(c_q, c_b, 1.0, T, 1), 120)
    ratios = seq[1:] / seq[:-1]
    # successive ratios fall like N^{-1/2}, so the sequence eventually decreases to 0
    assert np.all(np.diff(ratios) < 0)
    assert ratios[-1] < ratios[0] * math.sqrt(2.0 / 120.0) * 1.5


def test_series_inputs_validated():
    with pytest.raises(DomainError):
        SeriesBoundInputs(1.0, 1.0, 1.0, 1.0, 0)
    with pytest.raises(DomainError):
        SeriesBoundInputs(0.0, 1.0, 1.0, 1.0, 1)


def test_measured_norms_below_bound():
    spec = gbm_spec()
    rows = series_table(spec, CALL, 1.0, 3)
    for n, bound, measured, _ in rows:
        assert measured <= bound
    assert rows[0][2] > rows[1][2] > rows[2][2]


def test_series_table_zero_drift_measured_zero():
    spec = gbm_spec(GbmParams.zero_drift(0.2))
    rows = series_table(spec, CALL, 1.0, 2, measure_up_to=2)
    assert all(m == 0.0 for _, _, m, _ in rows)


def test_gbm_constants():
    c_q, c_b = gbm_bound_constants(BASE, 1.0)
    assert c_b == pytest.approx(0.05, rel=1e-14)
    assert c_q == pytest.approx(math.exp(0.5 * 0.05**2) / math.sqrt(2 * math.pi), rel=1e-14)


def test_lemma_residual_zero_drift():
    spec = gbm_spec(GbmParams.zero_drift(0.2))
    assert abs(parametrix_identity_residual(spec, 0.5, math.log(85), math.log(80))) <= 1e-15


def test_lemma_residual_spot():
    spec = gbm_spec(GbmParams(0.01 + 0.02, 0.2))
    x = math.log(80.0)
    assert abs(parametrix_identity_residual(spec, 0.5, x, x)) < 1e-6


def test_lemma_residual_short_time():
    spec = gbm_spec()
    res = [abs(parametrix_identity_residual(spec, t, 4.40, 4.38)) for t in (1e-2, 1e-3)]
    assert res[1] <= res[0] + 1e-12


def test_lemma_with_time_weight():
    spec = gbm_spec()
    r, T = 0.03, 1.0
    psi = lambda u: np.exp(-r * (T - np.asarray(u)))  # noqa: E731
    psi_prime = lambda u: r * psi(u)  # noqa: E731
    assert abs(parametrix_identity_residual(spec, 0.7, 4.45, 4.38, psi, psi_prime)) < 1e-6


def test_lemma_needs_constant_coefficients():
    spec = DiffusionSpec1D(lambda y: 0.2 + 0.1 * np.tanh(y), lambda y: np.zeros_like(y), (-3.0, 3.0))
    with pytest.raises(PreconditionError):
        parametrix_identity_residual(spec, 0.5, 0.0, 0.1)


def test_hedge_series_zero_drift_is_exact():
    params = GbmParams.zero_drift(0.2)
    contract = BarrierContract(80.0, 90.0, 1.0, 0.6)
    est = truncated_hedge_summary(gbm_spec(params), CALL, contract, 1, McConfig(20000, seed=2), n_time=8, grid_nodes=257)
    assert est.residual.mean == 0.0
    assert est.identity_gap.agrees_with(0.0, 3.0)
    # knock-out and reflection hedge coincide path by path up to the residual, which is 0 here
    assert abs(est.knockout.mean - est.hedge.mean) <= 3.0 * est.identity_gap.stderr + 1e-15


def test_hedge_series_far_barrier():
    contract = BarrierContract(1.0, 90.0, 1.0, 0.6)
    payoff = PayoffSpec.call(1.0, 90.0)
    hedge, resid = truncated_hedge_value(gbm_spec(), payoff, contract, 1, McConfig(20000, seed=2), n_time=8, grid_nodes=257)
    vanilla = float(payoff.expected_value(BASE, math.log(100.0), 1.0))
    assert hedge.agrees_with(vanilla, 3.0)
    assert abs(resid.mean) < 1e-10


@pytest.mark.slow
def test_hedge_series_residual_shrinks_with_order():
    contract = BarrierContract(80.0, 90.0, 1.0, 0.6)
    cfg = McConfig(100_000, seed=4)
    one = truncated_hedge_summary(gbm_spec(), CALL, contract, 1, cfg)
    two = truncated_hedge_summary(gbm_spec(), CALL, contract, 2, cfg)
    for est in (one, two):
        assert est.identity_gap.agrees_with(0.0, 3.0)
    assert abs(two.residual.mean) < abs(one.residual.mean)
    assert abs(two.knockout.mean - two.hedge.mean) < abs(one.knockout.mean - one.hedge.mean)
