import json

import numpy as np
import pytest

from saddlenode.errors import NonzeroConstantTerm, ValidationError
from saddlenode.series import (FORMAT_VERSION, TruncatedSeries, UniSeries, compose_fibered, exp_series, mul,
                               precision, split_resonant)
from saddlenode.vectorfield import FiberedDiffeo


def rand_series(rng, tx, ty, deg=None, const=True):
    t = {}
    for k0 in range(tx + 1):
        for k1 in range(ty + 1):
            for k2 in range(ty + 1 - k1):
                if deg is not None and k0 + k1 + k2 > deg:
                    continue
                if not const and k0 + k1 + k2 == 0:
                    continue
                t[(k0, k1, k2)] = complex(rng.normal(), rng.normal())
    return TruncatedSeries.from_terms(t, tx, ty)


def brute_mul(a, b):
    out = {}
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            k = tuple(i + j for i, j in zip(ka, kb))
            if k[0] <= min(a.trunc_x, b.trunc_x) and k[1] + k[2] <= min(a.trunc_y, b.trunc_y):
                out[k] = out.get(k, 0) + ca * cb
    return out


def test_mul_difference_of_squares():
    x = TruncatedSeries.x(4, 2)
    p = mul(1 + x, 1 - x)
    assert p.terms == {(0, 0, 0): 1, (2, 0, 0): -1}


def test_mul_by_zero():
    a = rand_series(np.random.default_rng(0), 3, 3)
    assert mul(a, TruncatedSeries.zeros(3, 3)).is_zero()


def test_mul_matches_brute_force_convolution():
    rng = np.random.default_rng(1)
    a = rand_series(rng, 4, 4, deg=4)
    b = rand_series(rng, 4, 4, deg=4)
    ref = brute_mul(a, b)
    got = mul(a, b).terms
    for k in set(ref) | set(got):
        assert abs(got.get(k, 0) - ref.get(k, 0)) < 1e-12


def test_mul_uses_smaller_bounds():
    a = rand_series(np.random.default_rng(2), 5, 3)
    b = rand_series(np.random.default_rng(3), 3, 4)
    p = mul(a, b)
    assert (p.trunc_x, p.trunc_y) == (3, 3)


def test_ring_axioms():
    rng = np.random.default_rng(4)
    a, b, c = (rand_series(rng, 4, 4) for _ in range(3))
    assert mul(mul(a, b), c).max_diff(mul(a, mul(b, c))) < 1e-11
    assert mul(a, b + c).max_diff(mul(a, b) + mul(a, c)) < 1e-12
    assert mul(a, b).max_diff(mul(b, a)) < 1e-12


def test_compose_identity():
    f = rand_series(np.random.default_rng(5), 4, 4)
    assert compose_fibered(f, FiberedDiffeo.identity(4, 4)).max_diff(f) == 0


def test_compose_multiplicative():
    tx, ty = 4, 4
    x = TruncatedSeries.x(tx, ty)
    y1, y2 = TruncatedSeries.y1(tx, ty), TruncatedSeries.y2(tx, ty)
    phi = FiberedDiffeo(mul(y1, 1 + x), mul(y2, 1 + x))
    got = compose_fibered(mul(y1, y2), phi)
    assert got.max_diff(mul(mul(y1, y2), (1 + x) ** 2)) < 1e-15


def test_compose_matches_pointwise_evaluation():
    rng = np.random.default_rng(6)
    tx, ty = 12, 12
    f = rand_series(rng, 3, 3, deg=3).with_bounds(tx, ty)
    y1, y2 = TruncatedSeries.y1(tx, ty), TruncatedSeries.y2(tx, ty)
    h1 = rand_series(rng, 3, 3, deg=3, const=False).with_bounds(tx, ty) * 0.3
    h2 = rand_series(rng, 3, 3, deg=3, const=False).with_bounds(tx, ty) * 0.3
    phi = FiberedDiffeo(y1 + h1, y2 + h2)
    g = compose_fibered(f, phi)
    for _ in range(5):
        p = 0.02 * (rng.normal(size=3) + 1j * rng.normal(size=3))
        q = phi.evaluate(*p)
        ref = f.evaluate(p[0], q[1], q[2])
        assert abs(g.evaluate(*p) - ref) < 1e-12 * max(1.0, abs(ref))


def test_compose_is_associative_with_diffeo_composition():
    rng = np.random.default_rng(7)
    tx, ty = 4, 4
    y1, y2 = TruncatedSeries.y1(tx, ty), TruncatedSeries.y2(tx, ty)
    mk = lambda: FiberedDiffeo(y1 + 0.2 * rand_series(rng, tx, ty, deg=3, const=False).y_degree_part(1),
                               y2 + 0.2 * rand_series(rng, tx, ty, deg=3, const=False).y_degree_part(1))
    phi, psi = mk(), mk()
    f = rand_series(rng, tx, ty)
    lhs = compose_fibered(compose_fibered(f, phi), psi)
    rhs = compose_fibered(f, phi.compose(psi))
    assert lhs.max_diff(rhs) < 1e-11


def test_compose_rejects_constant_term():
    tx, ty = 2, 2
    f = TruncatedSeries.y1(tx, ty)
    phi = FiberedDiffeo(TruncatedSeries.y1(tx, ty) + 1.0, TruncatedSeries.y2(tx, ty))
    with pytest.raises(NonzeroConstantTerm):
        compose_fibered(f, phi)


def test_exp_of_zero_and_of_x():
    assert exp_series(TruncatedSeries.zeros(3, 2)).terms == {(0, 0, 0): 1}
    e = exp_series(TruncatedSeries.x(3, 2))
    assert e.max_diff(TruncatedSeries.from_x_coeffs([1, 1, 1 / 2, 1 / 6], 3, 2)) < 1e-16


def test_exp_inverse_property():
    s = rand_series(np.random.default_rng(8), 4, 4, const=False)
    p = mul(exp_series(s), exp_series(-s))
    p.coeffs[0, 0] -= 1
    assert p.max_abs() < 1e-12


def test_exp_rejects_constant():
    with pytest.raises(NonzeroConstantTerm):
        exp_series(TruncatedSeries.constant(1.0, 2, 2))


def test_split_resonant_examples():
    tx, ty = 2, 3
    y1, y2 = TruncatedSeries.y1(tx, ty), TruncatedSeries.y2(tx, ty)
    r, n = split_resonant(mul(y1, y2) + y1)
    assert r.terms == {(0, 1, 1): 1} and n.terms == {(0, 1, 0): 1}
    fx = TruncatedSeries.from_x_coeffs([1, 2, 3], tx, ty)
    r, n = split_resonant(fx)
    assert r == fx and n.is_zero()


def test_split_resonant_reconstructs_and_projects():
    f = rand_series(np.random.default_rng(9), 3, 5)
    r, n = split_resonant(f)
    assert (r + n) == f
    r2, n2 = split_resonant(r)
    assert r2 == r and n2.is_zero()


def test_json_roundtrip_sorted_terms(tmp_path):
    f = rand_series(np.random.default_rng(10), 2, 2)
    path = tmp_path / "s.json"
    path.write_text(f.to_json())
    data = json.loads(path.read_text())
    ks = [tuple(t["k"]) for t in data["terms"]]
    assert ks == sorted(ks)
    assert TruncatedSeries.from_json(path.read_text()) == f


def test_json_rejects_out_of_bounds():
    with pytest.raises(ValidationError):
        TruncatedSeries.from_dict({"trunc_x": 1, "trunc_y": 1, "terms": [{"k": [2, 0, 0], "re": 1.0}]})
    with pytest.raises(ValidationError):
        TruncatedSeries.from_dict({"trunc_x": 1})


def test_extended_precision_context():
    with precision("extended"):
        s = TruncatedSeries.x(2, 2)
        assert s.coeffs.dtype == np.clongdouble
    assert TruncatedSeries.x(2, 2).coeffs.dtype == np.complex128
    with pytest.raises(ValidationError):
        with precision("quad"):
            pass


def test_uniseries_exp_and_antiderivative():
    u = UniSeries([0, 1], 5)
    e = u.exp()
    assert np.allclose(e.coeffs, [1, 1, 1 / 2, 1 / 6, 1 / 24, 1 / 120])
    assert np.allclose(UniSeries([1, 2, 3]).antiderivative().coeffs[:4], [0, 1, 1, 1])


def test_format_version():
    assert FORMAT_VERSION == "1.0"
