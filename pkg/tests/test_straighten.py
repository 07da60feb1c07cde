import json

import numpy as np
import pytest

from saddlenode.errors import NonDegenerateViolation
from saddlenode.painleve import painleve1_field
from saddlenode.prenorm import prenormalize
from saddlenode.series import TruncatedSeries, UniSeries, mono_index, mul
from saddlenode.straighten import (NormalFormParams, OrderNField, full_formal_normalize, normalize_to_order,
                                   normalize_up_to_order, remainder_orders, straighten_hypersurfaces)
from saddlenode.vectorfield import (FiberedDiffeo, FiberedVectorField, conjugacy_defect, normal_form_field,
                                    push_forward, random_tangent_diffeo)

C = [0, 0.1, -0.05]


def test_straighten_prepared_field_is_identity():
    Y = normal_form_field(1.0, 0.3, 0.8, C, 5, 5)
    psi, prep, Z = straighten_hypersurfaces(Y, 1.0, 0.3, 0.8)
    assert psi.max_diff(FiberedDiffeo.identity(5, 5)) == 0
    assert Z.max_diff(Y) == 0


def test_straighten_single_monomial():
    lam, tx, ty = 1.0, 6, 4
    Y = normal_form_field(lam, 0.3, 0.8, [0.0], tx, ty)
    Y.X1.coeffs[1, mono_index(0, 2)] = 1.0  # x y2^2 d/dy1
    psi, prep, Z = straighten_hypersurfaces(Y, lam, 0.3, 0.8)
    # 3 lam psi + x^2 psi' + (a2 * 2 - a1) x psi = -x
    assert abs(psi.phi1[1, 0, 2] + 1 / (3 * lam)) < 1e-15
    assert np.abs(Z.X1.coeffs[:, mono_index(0, 2)]).max() == 0
    assert conjugacy_defect(psi, Y, Z) < 1e-13
    Z.X1.div_y(1, 1e-13)


def test_straighten_painleve_divisibility():
    pre = prenormalize(painleve1_field(8, 6))
    psi, prep, Z = straighten_hypersurfaces(pre.field, pre.lam, pre.a1, pre.a2)
    Z.X1.div_y(1, 1e-11)
    Z.X2.div_y(2, 1e-11)
    assert conjugacy_defect(psi, pre.field, Z) < 1e-11


def test_normalize_to_order_on_normal_form():
    Y = normal_form_field(1.0, 0.3, 0.8, C, 6, 5)
    st = OrderNField.from_field(Y, 1.0, 0.3, 0.8)
    Phi, st2 = normalize_to_order(st, 5)
    assert Phi.max_diff(FiberedDiffeo.identity(6, 5)) < 1e-15
    assert np.allclose(st2.d()[:3], C)


def test_one_level_removes_radial_term():
    tx, ty = 6, 5
    Y = normal_form_field(1.0, 0.3, 0.8, C, tx, ty)
    v = mul(TruncatedSeries.y1(tx, ty), TruncatedSeries.y2(tx, ty))
    x2v = v.mul_x(2)
    Y = FiberedVectorField(Y.X1 + mul(x2v, TruncatedSeries.y1(tx, ty)), Y.X2 + mul(x2v, TruncatedSeries.y2(tx, ty)))
    st = OrderNField.from_field(Y, 1.0, 0.3, 0.8, N=2)
    assert remainder_orders(st)[1] == 2
    Phi, st3 = normalize_to_order(st, 3)
    assert remainder_orders(st3)[1] >= 3
    assert conjugacy_defect(Phi, Y, st3.to_field()) < 1e-12


def test_c_independent_of_order():
    rng = np.random.default_rng(0)
    tx, ty = 8, 6
    Y = push_forward(random_tangent_diffeo(rng, tx, ty), normal_form_field(1.0, 0.3, 0.8, C, tx, ty))
    c4 = normalize_up_to_order(Y, 4).params.c.coeffs
    c6 = normalize_up_to_order(Y, 6).params.c.coeffs
    assert np.abs(c4 - c6).max() < 1e-11


def test_full_normalize_of_normal_form():
    Y = normal_form_field(1.0, 0.3, 0.8, C, 6, 5)
    res = full_formal_normalize(Y)
    assert res.map.as_diffeo().max_diff(FiberedDiffeo.identity(4, 5)) < 1e-14
    p = res.params
    assert abs(p.lam - 1) < 1e-15 and abs(p.a1 - 0.3) < 1e-15 and abs(p.a2 - 0.8) < 1e-15
    assert np.abs(p.c.coeffs[:3] - C).max() < 1e-15


def test_uniqueness_two_conjugations():
    rng = np.random.default_rng(1)
    tx, ty = 7, 6
    Yn = normal_form_field(1.0, 0.3, 0.8, C, tx, ty)
    cs = []
    for _ in range(2):
        phi = random_tangent_diffeo(rng, tx, ty)
        res = full_formal_normalize(push_forward(phi, Yn))
        cs.append(res.params.c.coeffs)
        ident = res.map.as_diffeo().compose(phi)
        assert ident.max_diff(FiberedDiffeo.identity(ident.trunc_x, ident.trunc_y)) < 1e-9
    assert np.abs(cs[0] - cs[1]).max() < 1e-9


def test_conjugation_identity_of_normalizing_map():
    rng = np.random.default_rng(2)
    tx, ty = 7, 5
    Y = push_forward(random_tangent_diffeo(rng, tx, ty), normal_form_field(1.0, 0.3, 0.8, C, tx, ty))
    res = normalize_up_to_order(Y, tx + 1)
    assert conjugacy_defect(res.map.fibered, res.prepared.flat_field, res.state.to_field()) < 1e-10


def test_painleve_normal_form_is_symplectic():
    res = full_formal_normalize(painleve1_field(6, 9))
    p = res.params
    assert abs(p.a - 1) < 1e-10
    assert np.abs(p.c_sum_residual).max() < 1e-9
    assert res.map.det_defect().max_abs() < 1e-9


def test_degenerate_residue_rejected():
    Y = normal_form_field(1.0, -0.25, -0.25, [0.0], 5, 4)
    with pytest.raises(NonDegenerateViolation):
        full_formal_normalize(Y)


def test_normal_form_params_derived_values(tmp_path):
    p = NormalFormParams(1.0, 0.25, 0.25, UniSeries([0, 0.1, 0.2, 0.3]))
    assert p.a == 0.5 and p.m == 2 and p.m_integer == 2 and p.c_m == 0.2
    ct = p.c_tilde().coeffs
    assert np.allclose(ct, [0, 2 * 0.1 / (1 - 2), 0, 2 * 0.3 / (3 - 2)])
    q = NormalFormParams(1.0, 0.3, 0.8, UniSeries(C))
    assert q.m_integer is None and q.c_m == 0
    path = tmp_path / "params.json"
    path.write_text(json.dumps(q.to_dict()))
    back = NormalFormParams.from_dict(json.loads(path.read_text()))
    assert back.a == q.a and np.allclose(back.c.coeffs, q.c.coeffs)
    assert q.to_dict()["version"] == "1.0"
