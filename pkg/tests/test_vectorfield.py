import numpy as np
import pytest

from saddlenode.errors import NotDiagonalizable, SingularLinearPart, ValidationError
from saddlenode.painleve import painleve1_field
from saddlenode.prenorm import lambda_map
from saddlenode.series import TruncatedSeries, exp_series, mul
from saddlenode.vectorfield import (FiberedDiffeo, FiberedVectorField, SystemForm, classify, divergence_defect,
                                    lie_derivative, normal_form_field, push_forward, random_tangent_diffeo,
                                    residue)


def norm_field(tx=6, ty=6, a1=0.3, a2=0.8):
    return normal_form_field(1.0, a1, a2, [0, 0.1, -0.05], tx, ty)


def test_push_forward_identity():
    Y = norm_field()
    Z = push_forward(FiberedDiffeo.identity(6, 6), Y)
    assert Z.max_diff(Y) == 0


def test_push_forward_radial_flow_matches_pointwise_chain_rule():
    # Z = (Lambda_tau)_* Y0 must satisfy D Lambda(p) Y0(p) = Z(Lambda(p))
    tx, ty = 12, 12
    Y0 = normal_form_field(1.0, 0.3, 0.8, [0.0], tx, ty)
    tau = mul(TruncatedSeries.x(tx, ty), mul(TruncatedSeries.y1(tx, ty), TruncatedSeries.y2(tx, ty)))
    L = lambda_map(tau, tx, ty)
    Z = push_forward(L, Y0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = 0.03 * (rng.normal(size=3) + 1j * rng.normal(size=3))
        v = np.array(Y0.evaluate(*p))
        h = 1e-7
        # Lambda as a map of (x, y1, y2); derivative along v by central differences
        Lp = np.array(L.evaluate(*(p + h * v))[1:])
        Lm = np.array(L.evaluate(*(p - h * v))[1:])
        lhs = (Lp - Lm) / (2 * h)
        q = L.evaluate(*p)
        rhs = np.array(Z.evaluate(*q)[1:])
        assert np.abs(lhs - rhs).max() < 1e-9


def test_push_forward_roundtrip():
    rng = np.random.default_rng(1)
    Y = norm_field(8, 8)
    phi = random_tangent_diffeo(rng, 8, 8)
    back = push_forward(phi.inverse(), push_forward(phi, Y))
    assert back.max_diff(Y) < 1e-11


def test_push_forward_is_group_action():
    rng = np.random.default_rng(2)
    Y = norm_field(6, 6)
    phi = random_tangent_diffeo(rng, 6, 6, degree=4)
    psi = random_tangent_diffeo(rng, 6, 6, degree=4)
    lhs = push_forward(phi, push_forward(psi, Y))
    rhs = push_forward(phi.compose(psi), Y)
    assert lhs.max_diff(rhs) < 1e-10


def test_inverse_of_singular_linear_part():
    y1 = TruncatedSeries.y1(3, 3)
    phi = FiberedDiffeo(y1, y1)
    with pytest.raises(SingularLinearPart):
        phi.inverse()


def test_lie_derivative_of_constant_is_zero():
    Y = norm_field()
    assert lie_derivative(Y, TruncatedSeries.constant(2.0, 6, 6)).is_zero()


def test_lie_derivative_of_v_on_normal_form():
    Y = norm_field()
    v = mul(TruncatedSeries.y1(6, 6), TruncatedSeries.y2(6, 6))
    got = lie_derivative(Y, v)
    ref = mul(TruncatedSeries.x(6, 6), v) * (0.3 + 0.8)
    assert got.max_diff(ref) < 1e-15


def test_lie_derivative_matches_finite_differences():
    rng = np.random.default_rng(3)
    tx, ty = 10, 10
    Y = push_forward(random_tangent_diffeo(rng, tx, ty), norm_field(tx, ty))
    f = random_tangent_diffeo(rng, tx, ty).phi1
    Lf = lie_derivative(Y, f)
    for _ in range(5):
        p = 0.02 * (rng.normal(size=3) + 1j * rng.normal(size=3))
        v = np.array(Y.evaluate(*p))
        h = 1e-6 / np.abs(v).max() * np.abs(p).max()
        fd = (f.evaluate(*(p + h * v)) - f.evaluate(*(p - h * v))) / (2 * h)
        assert abs(fd - Lf.evaluate(*p)) < 1e-6 * abs(fd)


def test_residue_examples():
    assert abs(residue(norm_field()) - 1.1) < 1e-15
    assert residue(normal_form_field(2.0, 0.0, 0.0, [0.0], 3, 3)) == 0
    assert residue(painleve1_field()) == 1


def test_residue_invariant_under_push_forward():
    rng = np.random.default_rng(4)
    Y = norm_field()
    for _ in range(3):
        Z = push_forward(random_tangent_diffeo(rng, 6, 6), Y)
        assert abs(residue(Z) - residue(Y)) < 1e-12


def test_residue_needs_opposite_eigenvalues():
    X1 = TruncatedSeries.from_terms({(0, 1, 0): 1.0}, 3, 3)
    X2 = TruncatedSeries.from_terms({(0, 0, 1): 1.0}, 3, 3)
    with pytest.raises(NotDiagonalizable):
        residue(FiberedVectorField(X1, X2))


def test_divergence_defect_examples():
    assert divergence_defect(norm_field(a1=0.4, a2=0.6)).is_zero(1e-15)
    d = divergence_defect(normal_form_field(1.0, 1.5, 0.5, [0.0], 4, 4))
    assert d.max_diff(TruncatedSeries.x(4, 4)) < 1e-15
    assert divergence_defect(painleve1_field()).is_zero()


def test_divergence_defect_preserved_by_unit_jacobian():
    tx, ty = 6, 6
    Y = normal_form_field(1.0, 0.4, 0.6, [0, 0.2], tx, ty)
    v = mul(TruncatedSeries.y1(tx, ty), TruncatedSeries.y2(tx, ty))
    s = mul(TruncatedSeries.from_x_coeffs([0.3, 0.5, -0.1], tx, ty), v) + TruncatedSeries.x(tx, ty) * 0.2
    phi = FiberedDiffeo(mul(TruncatedSeries.y1(tx, ty), exp_series(-s)),
                        mul(TruncatedSeries.y2(tx, ty), exp_series(s)))
    det = phi.jacobian_det() - 1.0
    assert det.truncate(None, ty - 1).max_abs() < 1e-14
    Z = push_forward(phi, Y)
    assert divergence_defect(Z).truncate(None, ty - 2).max_abs() < 1e-12


def test_classify_flags():
    c = classify(norm_field(a1=0.4, a2=0.6))
    assert c["non_degenerate"] and c["strictly_non_degenerate"] and c["transversally_hamiltonian"]
    c = classify(normal_form_field(1.0, -0.25, -0.25, [0.0], 3, 3))
    assert not c["non_degenerate"] and not c["strictly_non_degenerate"]


def test_random_tangent_diffeo_is_seeded_and_tangent():
    a = random_tangent_diffeo(np.random.default_rng(7), 5, 4)
    b = random_tangent_diffeo(np.random.default_rng(7), 5, 4)
    assert a.max_diff(b) == 0
    assert a.tangent_to_identity
    assert a.phi1.at_y0().max() == 0 and a.phi2.at_y0().max() == 0


def test_field_json_roundtrip(tmp_path):
    Y = painleve1_field(4, 5)
    path = tmp_path / "field.json"
    path.write_text(Y.to_json())
    back = FiberedVectorField.from_json(path.read_text())
    assert back.max_diff(Y) == 0
    comps = {"components": [Y.X1.to_dict(), Y.X2.to_dict()]}
    assert FiberedVectorField.from_dict(comps).max_diff(Y) == 0
    rec = Y.to_dict(lam=2.0)
    assert rec["version"] == "1.0" and rec["lambda"] == {"re": 2.0, "im": 0.0}
    with pytest.raises(ValidationError):
        FiberedVectorField.from_dict({"X1": Y.X1.to_dict()})
    with pytest.raises(ValidationError):
        FiberedVectorField.from_json("{not json")


def test_diffeo_json_roundtrip():
    phi = random_tangent_diffeo(np.random.default_rng(8), 3, 3)
    assert FiberedDiffeo.from_dict(phi.to_dict()).max_diff(phi) == 0


def test_system_form_roundtrip():
    Y = painleve1_field(4, 4)
    S = SystemForm.from_field(Y)
    assert S.to_field().max_diff(Y) < 1e-15
