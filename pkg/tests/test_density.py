import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timing_hedge import (
    DiffusionSpec1D,
    DomainError,
    EulerDensityParams,
    GbmParams,
    PayoffSpec,
    PreconditionError,
    ReflectionHyperplane,
    euler_density,
    kernel_h,
    kernel_h_bound,
    normal_cdf,
    normal_pdf,
    reflection_symmetry_residual,
)
from timing_hedge.density import K_HALF, gauss_density, s1_call_logprice
from timing_hedge.model import payoff_pi

# high-precision oracle values (mpmath.ncdf at 40 digits)
NCDF_AT_1 = 0.8413447460685429
# -(mu/sigma) (x - y)/t p(t, x, y) at (0.5, 0, 0.1), mu = 0.01, sigma = 0.2
H_SPOT = 0.005585758033944685


def test_normal_cdf_anchor_points():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(math.inf) == 1.0
    assert abs(normal_cdf(1.0) - NCDF_AT_1) <= 1e-15


@settings(max_examples=80, deadline=None)
@given(st.floats(-37.0, 37.0))
def test_normal_cdf_against_mpmath(z):
    ref = float(mpmath.ncdf(mpmath.mpf(z)))
    assert abs(float(normal_cdf(z)) - ref) <= 1e-15


@settings(max_examples=80, deadline=None)
@given(st.floats(-50.0, 50.0))
def test_normal_cdf_reflection(z):
    assert abs(float(normal_cdf(z)) + float(normal_cdf(-z)) - 1.0) <= 1e-15


def test_normal_cdf_monotone():
    z = np.linspace(-40, 40, 20001)
    assert np.all(np.diff(normal_cdf(z)) >= 0)


def test_normal_pdf_value():
    assert normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-16)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(-3.0, 3.0))
def test_gauss_density_normalized(t, x):
    y = np.linspace(x - 15 * math.sqrt(t), x + 15 * math.sqrt(t), 20001)
    p = gauss_density(t, x, y)
    assert np.all(p >= 0)
    assert np.trapezoid(p, y) == pytest.approx(1.0, abs=1e-10)


def test_kernel_vanishes_without_drift():
    spec = DiffusionSpec1D(lambda y: np.ones_like(y), lambda y: np.zeros_like(y), (-5.0, 5.0))
    t, x, y = np.meshgrid([0.1, 0.5], [-1.0, 0.3], [0.0, 2.0])
    assert np.all(kernel_h(spec, t, x, y) == 0.0)


def test_kernel_zero_on_diagonal():
    spec = DiffusionSpec1D.from_gbm(GbmParams(0.03, 0.2))
    assert kernel_h(spec, 0.7, 1.3, 1.3) == 0.0


def test_kernel_spot_value():
    spec = DiffusionSpec1D.from_gbm(GbmParams(0.03, 0.2))
    assert kernel_h(spec, 0.5, 0.0, 0.1) == pytest.approx(H_SPOT, abs=1e-15)


def test_kernel_rejects_nonpositive_time():
    spec = DiffusionSpec1D.from_gbm(GbmParams(0.03, 0.2))
    with pytest.raises(DomainError):
        kernel_h(spec, 0.0, 0.0, 0.1)


def test_kernel_bound_constants():
    assert K_HALF == pytest.approx(math.sqrt(0.5) * math.exp(-0.5), abs=1e-16)
    assert kernel_h_bound(0.0, 0.3) == 0.0
    assert kernel_h_bound(1.0, 1.0) == pytest.approx(2**1.5 * K_HALF, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.floats(0.05, 0.6))
def test_kernel_envelope(t, x, y, sigma):
    spec = DiffusionSpec1D.from_gbm(GbmParams(0.03, sigma))
    lhs = abs(kernel_h(spec, t, x, y))
    rhs = kernel_h_bound(spec, t) * gauss_density(2 * t, x, y)
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


def test_euler_density_scalar():
    p = EulerDensityParams.constant([[1.0]], [0.0])
    assert euler_density(p, 1.0, [0.3], [0.3]) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-16)


def test_euler_density_separable():
    p = EulerDensityParams.constant(np.eye(2), [0.0, 0.0])
    x, y, t = np.array([0.2, -0.5]), np.array([1.0, 0.1]), 0.8
    prod = gauss_density(t, x[0], y[0]) * gauss_density(t, x[1], y[1])
    assert euler_density(p, t, x, y) == pytest.approx(prod, rel=1e-14)


def test_euler_density_quadratic_form():
    p = EulerDensityParams.constant(np.diag([1.0, 4.0]), [0.0, 0.0])
    x, y, t = [1.0, 2.0], [0.0, 0.0], 1.0
    # (1^2/1 + 2^2/4) / 2 = 1, det = 4
    expected = math.exp(-1.0) / (2 * math.pi * 2.0)
    assert euler_density(p, t, x, y) == pytest.approx(expected, rel=1e-14)


def test_euler_density_integrates_to_one():
    p = EulerDensityParams.constant([[0.5, 0.1], [0.1, 0.3]], [0.2, -0.1])
    y = np.array([0.3, 0.4])
    g = np.linspace(-4, 4, 321)
    vals = np.array([[euler_density(p, 0.5, [a, b], y) for b in g] for a in g])
    assert np.trapezoid(np.trapezoid(vals, g, axis=1), g) == pytest.approx(1.0, abs=1e-8)


def test_euler_density_singular():
    p = EulerDensityParams.constant([[1.0, 1.0], [1.0, 1.0]], [0.0, 0.0])
    with pytest.raises(DomainError):
        euler_density(p, 1.0, [0, 0], [1, 1])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(-2, 2), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_reflection_plane_properties(normal, k, x):
    if np.linalg.norm(normal) < 1e-3:
        return
    plane = ReflectionHyperplane.from_normal(normal, k)
    assert np.allclose(plane.reflect(plane.reflect(x)), x, atol=1e-12)
    on = np.asarray(x) - plane.signed_distance(x) * np.asarray(plane.gamma)
    assert np.allclose(plane.reflect(on), on, atol=1e-12)
    assert np.allclose(plane.psi @ plane.psi, np.eye(2), atol=1e-14)


def test_non_unit_gamma_rejected():
    with pytest.raises(DomainError):
        ReflectionHyperplane((1.0, 1.0), 0.0)


def test_isotropic_symmetry_any_plane():
    plane = ReflectionHyperplane.from_normal([0.6, 0.8], 0.3)
    p = EulerDensityParams.constant(np.eye(2), [0.0, 0.0])
    x = 0.3 * np.asarray(plane.gamma) + np.array([-0.8, 0.6])
    assert abs(reflection_symmetry_residual(p, plane, 0.4, x, [1.0, -2.0])) <= 1e-12


def test_broken_symmetry_detected():
    plane = ReflectionHyperplane((1.0, 0.0), 0.0)
    p = EulerDensityParams.constant(np.diag([0.5, 2.0]), [0.7, 0.0])
    assert p.psi_symmetry_defect(plane, [[0.0, 0.0]]) > 0
    assert abs(reflection_symmetry_residual(p, plane, 0.5, [0.0, 0.3], [0.4, 0.1])) > 1e-4


def test_off_plane_point_rejected():
    plane = ReflectionHyperplane((1.0, 0.0), 0.0)
    p = EulerDensityParams.constant(np.eye(2), [0.0, 0.0])
    with pytest.raises(PreconditionError):
        reflection_symmetry_residual(p, plane, 0.5, [0.1, 0.0], [0.4, 0.1])


def test_ellipticity_bounds():
    p = EulerDensityParams.constant(np.diag([0.5, 2.0]), [0.0, 0.0])
    m, M = p.ellipticity([[0.0, 0.0], [1.0, 2.0]])
    assert (m, M) == pytest.approx((0.5, 2.0))


def test_s1_closed_form_against_direct_integral():
    params = GbmParams(0.03, 0.2)
    p = PayoffSpec.call(80.0, 90.0)
    x, t = math.log(85.0), 0.4
    sd = params.sigma * math.sqrt(t)
    z = np.linspace(-14, 14, 400001)
    y = x + sd * z
    # mu d/dx E[pi(F)(x + sigma W_t)] written as an integral against the score
    direct = params.mu * np.trapezoid(payoff_pi(p, y) * z / sd * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi), z)
    assert float(s1_call_logprice(params, 80.0, 90.0, t, x)) == pytest.approx(direct, abs=1e-7)
