import math

import numpy as np
import pytest
from scipy.special import exp1

from saddlenode.acceptance import euler_series
from saddlenode.borel import (BorelSeries, RayDomain, borel, borel_norm, borel_sum_series, convolve,
                              growth_report, irregular_model_bound, laplace_sum, pade_coefficients,
                              radius_estimate, solve_irregular_model, solve_regular_model)
from saddlenode.errors import (ContinuationFailure, DivergentIntegrand, NonpositiveRealPart, ValidationError,
                               VariantMismatch, ZeroEigenvalue)
from saddlenode.series import TruncatedSeries, UniSeries, mono_index

# e^10 E1(10), frozen from scipy.special.exp1
EULER_AT_01 = 0.09156333393978808


def test_borel_of_factorials_is_geometric():
    f = UniSeries([math.factorial(k) for k in range(12)])
    B = borel(f, "standard")
    assert np.allclose(B.coeffs, 1.0)
    assert abs(radius_estimate(B.coeffs) - 1) < 1e-12


def test_borel_bis_of_euler_series():
    B = borel(euler_series(20), "bis")
    assert np.allclose(B.coeffs, [(-1) ** k for k in range(20)])
    assert B.constant == 0


def test_inverse_borel_roundtrip():
    f = UniSeries([2.0, 1.0, -3.0, 24.0, 5.0])
    for v in ("standard", "bis"):
        assert np.allclose(borel(f, v).inverse().coeffs, f.coeffs)


def test_unknown_variant_rejected():
    with pytest.raises(ValidationError):
        borel(UniSeries([1.0]), "weird")


def test_convolution_matches_product_of_series():
    # B~(fg) = B~(f) * B~(g) for f, g without constant term
    rng = np.random.default_rng(0)
    f = UniSeries(np.r_[0, rng.normal(size=9)])
    g = UniSeries(np.r_[0, rng.normal(size=9)])
    fg = UniSeries(np.convolve(f.coeffs, g.coeffs)[:10])
    got = convolve(borel(f, "bis"), borel(g, "bis"))
    assert np.abs(got.coeffs - borel(fg, "bis").coeffs).max() < 1e-12


def test_convolution_is_commutative_and_x_acts_as_one():
    rng = np.random.default_rng(1)
    g = borel(UniSeries(np.r_[0, rng.normal(size=8)]), "bis")
    h = borel(UniSeries(np.r_[0, rng.normal(size=8)]), "bis")
    assert np.abs(convolve(g, h).coeffs - convolve(h, g).coeffs).max() < 1e-14
    # B~(x) = 1 and 1 * g is the antiderivative, i.e. B~ of x f
    one = borel(UniSeries([0.0, 1.0] + [0.0] * 7), "bis")
    anti = convolve(one, g).coeffs
    ref = np.r_[0, g.coeffs[:-1] / np.arange(1, len(g))]
    assert np.abs(anti - ref).max() < 1e-14


def test_convolution_needs_bis_variant():
    g = borel(UniSeries([0.0, 1.0, 2.0]), "standard")
    with pytest.raises(VariantMismatch):
        convolve(g, g)


def test_laplace_of_simple_functions():
    v, err = laplace_sum(lambda t: 1.0, 0.0, 0.3, "standard")
    assert abs(v - 1) < 1e-12 and err < 1e-8
    v, _ = laplace_sum(lambda t: t, 0.0, 0.3, "bis")
    assert abs(v - 0.09) < 1e-12  # int t e^{-t/x} dt = x^2, x B~(x) summed back
    v, _ = laplace_sum(lambda t: t, 0.0, 0.3, "standard")
    assert abs(v - 0.3) < 1e-12


def test_laplace_along_rotated_ray():
    x = 0.2 * np.exp(0.4j)
    v, _ = laplace_sum(lambda t: 1.0 / (1 + t), 0.4, x, "bis")
    assert abs(v - np.exp(1 / x) * exp1(1 / x)) < 1e-10


def test_laplace_rejects_bad_input():
    with pytest.raises(DivergentIntegrand):
        laplace_sum(lambda t: 1.0, math.pi, 0.3)
    with pytest.raises(ValidationError):
        laplace_sum(lambda t: 1.0, 0.0, 0.0)
    with pytest.raises(VariantMismatch):
        laplace_sum(borel(euler_series(), "bis"), 0.0, 0.1, "standard")


def test_euler_sum_frozen_value():
    assert abs(math.exp(10) * exp1(10) - EULER_AT_01) < 1e-16
    v, err = laplace_sum(borel(euler_series(30), "bis"), 0.0, 0.1, "bis")
    assert abs(v - EULER_AT_01) < 1e-12
    assert err < 1e-8


def test_pade_pole_on_ray_is_reported():
    with pytest.raises(ContinuationFailure):
        laplace_sum(borel(euler_series(30), "bis"), math.pi, -0.1, "bis")


def test_pade_reproduces_rational_and_polynomial():
    c = [(-1) ** k for k in range(12)]
    p, q = pade_coefficients(c, 6, 5)
    assert np.allclose(p, [1]) and np.allclose(q, [1, 1])
    p, q = pade_coefficients([1.0, 2.0, 3.0, 0, 0, 0, 0], 3, 3)
    assert np.allclose(p, [1, 2, 3]) and np.allclose(q, [1])
    # [1/1] of 1 + 2t + 3t^2 is (1 + t/2) / (1 - 3t/2)
    B = BorelSeries(np.array([1.0, 2.0, 3.0]))
    assert abs(B.continuation()(0.5) - 5.0) < 1e-14
    B = BorelSeries(np.array([1.0, 2.0, 3.0, 0, 0, 0, 0]))
    assert abs(B.continuation()(0.5) - 2.75) < 1e-14
    with pytest.raises(ValidationError):
        BorelSeries(np.array([1.0, 2.0, 3.0])).continuation(2, 2)


def test_polynomial_continuation_of_polynomial():
    # f = x + 2x^2 gives B(f) = t + t^2
    B = borel(UniSeries([0.0, 1.0, 2.0]), "standard")
    assert np.allclose(B.coeffs, [0, 1, 1])
    v, _ = laplace_sum(B, 0.0, 0.25, "standard", continuation="polynomial")
    assert abs(v - 0.375) < 1e-12


def test_irregular_model_recursion():
    b = UniSeries([0.0, 1.0] + [0.0] * 8)
    a = solve_irregular_model(1.0, 0.0, b)
    ref = [0.0] + [(-1) ** (n - 1) * math.factorial(n - 1) for n in range(1, 10)]
    assert np.allclose(a.coeffs, ref)
    a = solve_irregular_model(1.0, 0.0, UniSeries([1.0, 0, 0, 0]))
    assert np.allclose(a.coeffs, [1, 0, 0, 0])
    with pytest.raises(ZeroEigenvalue):
        solve_irregular_model(0.0, 0.0, b)


def test_irregular_model_residual():
    rng = np.random.default_rng(2)
    k, alpha = 1.5 + 0.5j, 0.2
    b = UniSeries(rng.normal(size=10) + 0j)
    a = solve_irregular_model(k, alpha, b).coeffs
    n = np.arange(10)
    lhs = k * a + np.r_[0, ((n[:-1]) + alpha * k) * a[:-1]]
    assert np.abs(lhs - b.coeffs).max() < 1e-12


def test_regular_model():
    a = solve_regular_model(2.0, UniSeries([2.0, 3.0, 4.0]))
    assert np.allclose(a.coeffs, [1, 1, 1])
    with pytest.raises(NonpositiveRealPart):
        solve_regular_model(-1.0, UniSeries([1.0]))


def test_borel_norm_zero_and_product_bound():
    dom = RayDomain(0.0, 1.0, 0.5)
    beta = 4 * math.pi
    assert borel_norm(UniSeries([0.0, 0.0, 0.0]), beta, dom) == 0.0
    f = UniSeries([0.0, 1.0, -0.5, 0.25, -0.125, 0.0625, 0, 0, 0, 0])
    g = UniSeries([0.0, 0.3, 0.2, -0.1, 0.05, 0, 0, 0, 0, 0])
    fg = UniSeries(np.convolve(f.coeffs, g.coeffs)[:10])
    nf, ng, nfg = (borel_norm(h, beta, dom) for h in (f, g, fg))
    assert nf > 0 and ng > 0
    assert nfg <= nf * ng * (1 + 1e-9)


def test_irregular_model_bound_requires_margin():
    dom = RayDomain(0.0, 1.0, 0.5)
    assert irregular_model_bound(1.0, 0.0, 10.0, dom) == pytest.approx(1.0 / 0.5)
    with pytest.raises(ValidationError):
        irregular_model_bound(0.1, 0.0, 10.0, dom)
    with pytest.raises(ValidationError):
        RayDomain(0.0, 0.0, 1.0)


def test_ray_domain_distance():
    dom = RayDomain(0.0, 1.0, 0.5)
    assert dom.contains(2.0) and dom.contains(0.3j)
    assert dom.distance(-1.0) == pytest.approx(0.5)
    assert dom.distance(2j) == pytest.approx(1.5)
    assert dom.distance(5 * np.exp(0.8j)) == pytest.approx(5 * math.sin(0.3))


def test_borel_sum_series_per_monomial():
    # F = E(x) + y1 E(x), E the standard-variant Euler series sum (-1)^k k! x^k
    tx, ty = 30, 2
    F = TruncatedSeries.zeros(tx, ty)
    E = [(-1) ** k * math.factorial(k) for k in range(tx + 1)]
    F.coeffs[:, mono_index(0, 0)] = E
    F.coeffs[:, mono_index(1, 0)] = E
    v, err, rep = borel_sum_series(F, 0.0, 0.1, y1=0.5)
    ref = 1.5 * 10 * math.exp(10) * exp1(10)
    assert abs(v - ref) < 1e-10
    assert rep["A"] == pytest.approx(1.0, rel=0.05)


def test_growth_report_of_geometric_family():
    tx, ty = 12, 3
    F = TruncatedSeries.zeros(tx, ty)
    fact = np.array([math.factorial(n) for n in range(tx + 1)], dtype=float)
    for k1 in range(ty + 1):
        for k2 in range(ty + 1 - k1):
            F.coeffs[:, mono_index(k1, k2)] = fact * 2.0 ** np.arange(tx + 1) * 3.0 ** (k1 + k2)
    rep = growth_report(F)
    assert rep["A"] == pytest.approx(2.0, rel=1e-9)
    assert rep["B"] == pytest.approx(3.0, rel=1e-9)
    assert rep["C"] == pytest.approx(1.0, rel=1e-9)
