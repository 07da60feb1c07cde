import math

import numpy as np
import pytest

from saddlenode.acceptance import A1, A2, C_COEFFS, LAM, roundtrip_field
from saddlenode.errors import DomainExit, ValidationError
from saddlenode.sectorial import (SectorialField, StableDomainParams, conjugacy_residual, entry_time_bound,
                                  field_function, flatness_fit, flow_asymptotic_path, in_sector, in_sigma,
                                  in_stable_domain, model_flow_closed_form, sandwich_grid, sectorial_normalize,
                                  solve_homological_sectorial)
from saddlenode.vectorfield import normal_form_field, push_forward, random_tangent_diffeo


def params(orientation=1):
    return StableDomainParams.auto(A1 + A2, 0.05, 0.3, orientation)


def test_auto_constants_are_admissible():
    P = params()
    assert 0 < P.delta < min(P.omega, P.mu)
    assert P.r_prime < P.r and P.r1_prime < P.r1
    with pytest.raises(ValidationError):
        StableDomainParams.auto(-1.0, 0.05, 0.3)
    with pytest.raises(ValidationError):
        StableDomainParams.auto(1.0, 0.05, 2.0)
    with pytest.raises(ValidationError):
        StableDomainParams.auto(1.0, 0.05, 0.3, orientation="sideways")


def test_membership_simple_points():
    P = params()
    assert in_stable_domain(0.02j, 0.0, 0.0, P)
    assert in_sigma(0.02j, P)
    assert not in_stable_domain(-0.02j, 0.0, 0.0, P)
    assert not in_stable_domain(0.02j, 0.06, 0.0, P)
    assert not in_stable_domain(0.0, 0.0, 0.0, P)
    # near the real axis the wedge binds: |x| must shrink
    x = 0.049 * np.exp(0.01j)
    assert in_sector(x, P.r, P.eps, P) and not in_stable_domain(x, 0.0, 0.0, P)


def test_minus_orientation_mirrors_plus():
    Pp, Pm = params(1), params(-1)
    inner, outer = sandwich_grid(Pp, 300, 4)
    a = in_stable_domain(*outer.T, Pp)
    b = in_stable_domain(-outer[:, 0], outer[:, 2], outer[:, 1], Pm)
    assert np.array_equal(a, b)


def test_sandwich_inclusions():
    P = params()
    inner, outer = sandwich_grid(P, 500, 1)
    assert in_stable_domain(*inner.T, P).all()
    om = in_stable_domain(*outer.T, P)
    assert om.any() and not om.all()


def test_model_flow_matches_closed_form():
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    x0 = 0.04 * np.exp(0.4j)
    tr = flow_asymptotic_path(Z, (x0, 0.0, 0.0), 200.0, 1, n_samples=50)
    ref = model_flow_closed_form(x0, tr.t, LAM, Z.b, 1)
    assert np.abs(tr.x - ref).max() < 1e-9 * abs(x0)
    assert abs(tr.x[-1]) < abs(x0) / 3


def test_minus_flow_matches_closed_form():
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    x0 = -0.04 * np.exp(0.4j)
    tr = flow_asymptotic_path(Z, (x0, 0.0, 0.0), 200.0, -1, n_samples=50)
    ref = model_flow_closed_form(x0, tr.t, LAM, Z.b, -1)
    assert np.abs(tr.x - ref).max() < 1e-9 * abs(x0)


def test_trajectory_enters_sigma_before_bound():
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    P = params()
    for p in ((0.001 * np.exp(1.0j), 1e-5, 1e-5), (0.001 * np.exp(2.1j), 1e-5, -1e-5)):
        assert in_stable_domain(*p, P) and not in_sigma(p[0], P)
        T = entry_time_bound(p[0], P)
        tr = flow_asymptotic_path(Z, p, T, 1, P, n_samples=400)
        k = int(np.argmax(in_sigma(tr.x, P)))
        assert k > 0 and tr.t[k] <= T


def test_domain_exit_is_raised():
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    P = params()
    p = (0.02j, 0.06, 0.0)
    with pytest.raises(DomainExit):
        flow_asymptotic_path(Z, p, 1e4, 1, P, n_samples=400)


def test_homological_zero_and_linearity():
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    p = (0.05j, 0.01, 0.01)
    assert solve_homological_sectorial(Z, None, 2, p) == 0
    assert solve_homological_sectorial(Z, lambda x, y1, y2: 0j, 2, p) == 0
    A = lambda x, y1, y2: 1 + y1 * y2
    a1 = solve_homological_sectorial(Z, A, 2, p)
    a2 = solve_homological_sectorial(Z, lambda x, y1, y2: 2 * A(x, y1, y2), 2, p)
    assert abs(a2 - 2 * a1) < 1e-12 * abs(a1)


def test_homological_closed_form():
    # L_Z(x) = x^2, so with A = 1 and M = 1 the decaying solution is alpha = x
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    for x0, orientation in ((0.05j, 1), (-0.05j, -1), (0.04 * np.exp(0.3j), 1)):
        a = solve_homological_sectorial(Z, lambda x, y1, y2: 1.0, 1, (x0, 0.01, 0.02), orientation)
        assert abs(a - x0) < 1e-9 * abs(x0)


def test_homological_solution_scales_with_y():
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    A = lambda x, y1, y2: y1 + y2
    a = solve_homological_sectorial(Z, A, 2, (0.05j, 0.01, 0.02))
    b = solve_homological_sectorial(Z, A, 2, (0.05j, 0.005, 0.01))
    assert abs(abs(b / a) - 0.5) < 0.05


def test_residual_metric_and_negative_control():
    Yn = normal_form_field(LAM, A1, A2, list(C_COEFFS), 6, 5)
    ident = lambda x, y1, y2: (x, y1, y2)
    assert conjugacy_residual(ident, Yn, Yn, [(0.1j, 0.02, 0.015)]) < 1e-9
    Y = push_forward(random_tangent_diffeo(np.random.default_rng(0), 6, 5, scale=1.0), Yn)
    assert conjugacy_residual(ident, Y, Yn, [(0.1j, 0.1, 0.1)]) > 1e-2


def test_normal_form_input_gives_identity():
    Yn = normal_form_field(LAM, A1, A2, list(C_COEFFS), 8, 6)
    S = sectorial_normalize(Yn, 2)
    for p in [(0.1j, 0.02, 0.015), (0.1 * np.exp(2.5j), 0.01j, 0.02)]:
        assert np.abs(np.subtract(S.plus(*p), p)).max() < 1e-15
        q = (-p[0], p[1], p[2])
        assert np.abs(np.subtract(S.minus(*q), q)).max() < 1e-15


def test_field_function_agrees_with_series_field():
    Y = normal_form_field(LAM, A1, A2, list(C_COEFFS), 4, 5)
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    p = (0.03 + 0.01j, 0.02, -0.01j)
    assert np.allclose(field_function(Y)(*p), Z.vector(*p), rtol=0, atol=1e-15)


def test_flatness_fit_recovers_constants():
    xs = np.array([0.05, 0.1, 0.2, 0.3])
    A, B = flatness_fit(xs, np.exp(-1.7 - 0.8 / xs))
    assert abs(A + 1.7) < 1e-12 and abs(B - 0.8) < 1e-12


def test_sectorial_conjugacy_small_residual():
    _, [(_, Y)] = roundtrip_field(8, 6)
    S = sectorial_normalize(Y, 2)
    YN = S.target_field()
    pts = [(0.1j, 0.02, 0.015), (0.1 * np.exp(2.5j), 0.01j, 0.02)]
    assert conjugacy_residual(S.plus, Y, YN, pts) < 1e-5
    assert conjugacy_residual(S.minus, Y, YN, [(-x, y1, y2) for x, y1, y2 in pts]) < 1e-5
    with pytest.raises(ValidationError):
        sectorial_normalize(Y, 0)
