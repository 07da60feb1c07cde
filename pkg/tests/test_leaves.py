import math

import numpy as np
import pytest

from saddlenode.acceptance import A1, A2, C_COEFFS, LAM
from saddlenode.errors import (BranchViolation, HypersurfaceNotAnalytic, OutOfDomain, ValidationError)
from saddlenode.leaves import (LeafChart, StokesData, epsilon_ground_truth, epsilon_leaf_map, growth_bound_check,
                               invariant_variety_test, isotropy_from_leaf_map, leaf_coordinates, leaf_inverse,
                               leaf_jacobian_det, martinet_ramis_restriction, stokes_coefficients)
from saddlenode.sectorial import SectorialField, flow_asymptotic_path
from saddlenode.straighten import NormalFormParams
from saddlenode.series import UniSeries

W_GRID = (0.0, 0.1, 0.1j)
IDENT = lambda x, y1, y2: (x, y1, y2)  # noqa: E731


def chart(sign=1):
    return LeafChart(LAM, A1, A2, C_COEFFS, sign)


def test_chart_derived_constants():
    ch = LeafChart(1.0, 0.25, 0.25, (0.0, 0.1, 0.2, 0.3))
    assert ch.m_integer == 2 and ch.c_m == 0.2
    assert np.allclose(ch.c_tilde.coeffs, [0, 2 * 0.1 / (1 - 2), 0, 2 * 0.3 / (3 - 2)])
    assert chart().m_integer is None and chart().c_m == 0
    assert chart(-1).bisector == -1
    with pytest.raises(ValidationError):
        LeafChart(1.0, 0.3, 0.8, (0.5,))
    with pytest.raises(ValidationError):
        LeafChart(0.0, 0.3, 0.8)


def test_from_params_matches_direct_chart():
    p = NormalFormParams(LAM, A1, A2, UniSeries(C_COEFFS))
    ch = LeafChart.from_params(p, -1)
    assert ch.orientation == -1 and ch.c == tuple(complex(c) for c in C_COEFFS)


def test_f1_f2_product_is_x_power():
    for sign in (1, -1):
        ch = chart(sign)
        x = 0.1 * ch.bisector * np.exp(np.array([-0.5, 0.0, 0.7]) * 1j)
        w = np.array([0.0, 0.2, -0.1 + 0.3j])
        prod = ch.f1(x, w) * ch.f2(x, w) / ch.power(x, ch.a)
        assert np.abs(prod - 1).max() < 1e-14


def test_leaf_roundtrip():
    ch = LeafChart(LAM, 0.25, 0.25, (0.0, 0.1, 0.2, 0.3))  # m = 2 brings in the log term
    x = np.array([0.1, 0.08 + 0.03j])
    y1, y2 = np.array([0.02, 0.01j]), np.array([0.03, -0.02])
    h1, h2, w = leaf_coordinates(ch, x, y1, y2)
    assert np.abs(h1 * h2 - w).max() < 1e-15 * np.abs(w).max() * 10
    z1, z2 = leaf_inverse(ch, x, h1, h2)
    assert np.abs(z1 - y1).max() < 1e-15 and np.abs(z2 - y2).max() < 1e-15


def test_leaf_coordinates_are_first_integrals():
    Z = SectorialField.normal_form(LAM, A1, A2, list(C_COEFFS))
    ch = chart(1)
    tr = flow_asymptotic_path(Z, (0.1 * np.exp(0.2j), 0.03, 0.02), 5.0, 1, n_samples=30)
    h1, h2, w = leaf_coordinates(ch, tr.x, tr.y1, tr.y2)
    for h in (h1, h2, w):
        assert np.abs(h - h[0]).max() < 1e-7 * abs(h[0])


def test_branch_violation():
    with pytest.raises(BranchViolation):
        chart(-1).log(0.1)
    with pytest.raises(BranchViolation):
        chart(1).log(0.0)
    narrow = LeafChart(LAM, A1, A2, C_COEFFS, 1, half_opening=0.5)
    with pytest.raises(BranchViolation):
        narrow.log(0.1j)


def test_out_of_domain_for_series_c():
    c = (0.0,) + tuple(2.0 ** k for k in range(1, 12))  # radius 1/2
    ch = LeafChart(LAM, A1, A2, c)
    assert ch.v_radius == pytest.approx(0.5, rel=0.1)
    with pytest.raises(OutOfDomain):
        leaf_coordinates(ch, 0.1, 1.0, 1.0)


def test_epsilon_map_is_area_preserving():
    for sign in (1, -1):
        Psi = epsilon_leaf_map(0.05, sign)
        det = leaf_jacobian_det(Psi, 0.3 + 0.1j, -0.2)
        assert abs(det - 1) < 1e-9


def test_isotropy_commutes_with_normal_form_flow():
    ch = chart(1)
    psi = isotropy_from_leaf_map(ch, epsilon_leaf_map(0.05, 1))
    x, y1, y2 = 0.1, 0.02, 0.015
    h = leaf_coordinates(ch, *psi(x, y1, y2))
    g = epsilon_leaf_map(0.05, 1)(*leaf_coordinates(ch, x, y1, y2)[:2])
    assert abs(h[0] - g[0]) < 1e-14 * abs(g[0]) and abs(h[1] - g[1]) < 1e-14 * abs(g[1])


def test_identity_stokes_coefficients():
    for sign in (1, -1):
        D = stokes_coefficients(IDENT, chart(sign), 4, W_GRID)
        assert D.off_normalization_max() < 1e-8
        assert D.normalization_defect() < 1e-10
        assert D.index_range_defect() < 1e-10
        assert D.x_spread[sign] < 1e-8


def test_epsilon_stokes_coefficients_match_ground_truth():
    eps = 0.05
    for sign in (1, -1):
        ch = chart(sign)
        E = stokes_coefficients(isotropy_from_leaf_map(ch, epsilon_leaf_map(eps, sign)), ch, 4, W_GRID)
        for j in (1, 2):
            for n in E.n_values:
                ref = epsilon_ground_truth(eps, sign, j, n, E.w_grid)
                assert np.abs(E.coeff(j, sign, n) - ref).max() < 1e-7
    with pytest.raises(ValidationError):
        stokes_coefficients(IDENT, chart(), 1, W_GRID)


def test_invariant_varieties_and_restriction_of_identity():
    D = stokes_coefficients(IDENT, chart(1), 4, W_GRID).merge(stokes_coefficients(IDENT, chart(-1), 4, W_GRID))
    assert invariant_variety_test(D) == {"center": True, "H1": True, "H2": True}
    mr = martinet_ramis_restriction(D)
    assert mr["affine"][0] == 1 and abs(mr["affine"][1]) < 1e-8
    assert max(abs(c) for c in mr["diffeo"]) < 1e-8
    assert D.to_dict()["n_values"] == [int(n) for n in D.n_values]


def test_non_analytic_hypersurface_is_reported():
    D = stokes_coefficients(IDENT, chart(1), 3, W_GRID).merge(stokes_coefficients(IDENT, chart(-1), 3, W_GRID))
    C = D.coeffs[(1, -1)].copy()
    C[list(D.n_values).index(0), 0] = 0.1
    D.coeffs[(1, -1)] = C
    assert not invariant_variety_test(D)["H1"]
    with pytest.raises(HypersurfaceNotAnalytic):
        martinet_ramis_restriction(D)


def test_growth_bounds_hold_for_epsilon_isotropy():
    ch = chart(1)
    E = stokes_coefficients(isotropy_from_leaf_map(ch, epsilon_leaf_map(0.05, 1)), ch, 5, W_GRID)
    rep = growth_bound_check(E, ch, 0.3, 0.1)
    assert rep["ok"], rep["violations"]


def test_growth_bounds_negative_control():
    ch = chart(1)
    E = stokes_coefficients(isotropy_from_leaf_map(ch, epsilon_leaf_map(0.05, 1)), ch, 5, W_GRID)
    C = E.coeffs[(1, 1)].copy()
    C[list(E.n_values).index(5)] = 1e6  # far faster than geometric growth
    E.coeffs[(1, 1)] = C
    rep = growth_bound_check(E, ch, 0.3, 0.1)
    assert not rep["ok"]
    assert any(v["family"] == "E_1,+" and v["n"] == 5 for v in rep["violations"])


def test_merge_needs_same_grid():
    a = StokesData(np.array([0.0]), np.arange(3))
    b = StokesData(np.array([0.1]), np.arange(3))
    with pytest.raises(ValidationError):
        a.merge(b)
    with pytest.raises(ValidationError):
        a.coeff(1, 1, 0)
