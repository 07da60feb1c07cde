"""Fibered vector fields x^2 d/dx + X1 d/dy1 + X2 d/dy2 and fibered maps."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import NotDiagonalizable, SingularLinearPart, ValidationError
from .series import (
    FORMAT_VERSION,
    TruncatedSeries,
    UniSeries,
    compose_many,
    cdtype,
    cscalar,
    det2,
    inv2,
    mono_index,
    mul,
)


def _complex_record(z: complex) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _parse_complex(rec) -> complex:
    if isinstance(rec, Mapping):
        return complex(rec.get("re", 0.0), rec.get("im", 0.0))
    return complex(rec)


class FiberedVectorField:
    """Vector field whose x-component is x^2 (fixed by construction)."""

    __slots__ = ("X1", "X2")

    def __init__(self, X1: TruncatedSeries, X2: TruncatedSeries):
        tx = min(X1.trunc_x, X2.trunc_x)
        ty = min(X1.trunc_y, X2.trunc_y)
        self.X1 = X1.truncate(tx, ty)
        self.X2 = X2.truncate(tx, ty)

    @property
    def trunc_x(self) -> int:
        return self.X1.trunc_x

    @property
    def trunc_y(self) -> int:
        return self.X1.trunc_y

    @property
    def components(self) -> tuple[TruncatedSeries, TruncatedSeries]:
        return self.X1, self.X2

    def linear_matrix(self, k0: int = 0) -> np.ndarray:
        """Coefficient of x^k0 in the y-linear part A(x)."""
        i1, i2 = mono_index(1, 0), mono_index(0, 1)
        return np.array([[self.X1.coeffs[k0, i1], self.X1.coeffs[k0, i2]],
                         [self.X2.coeffs[k0, i1], self.X2.coeffs[k0, i2]]])

    @property
    def lam(self) -> complex:
        """lambda when the y-linear part at the origin is diag(-lambda, lambda)."""
        A0 = self.linear_matrix(0)
        if abs(A0[0, 1]) > 1e-12 or abs(A0[1, 0]) > 1e-12 or abs(A0[0, 0] + A0[1, 1]) > 1e-10:
            raise NotDiagonalizable(f"y-linear part at the origin is not diag(-lam, lam): {A0}")
        return cscalar(A0[1, 1])

    def truncate(self, trunc_x: int | None = None, trunc_y: int | None = None) -> "FiberedVectorField":
        return FiberedVectorField(self.X1.truncate(trunc_x, trunc_y), self.X2.truncate(trunc_x, trunc_y))

    def __add__(self, other: "FiberedVectorField") -> "FiberedVectorField":
        # the x^2 components are not added: the sum is x^2 d/dx + (X + X')
        return FiberedVectorField(self.X1 + other.X1, self.X2 + other.X2)

    def max_diff(self, other: "FiberedVectorField") -> float:
        return max(self.X1.max_diff(other.X1), self.X2.max_diff(other.X2))

    def evaluate(self, x, y1, y2):
        x = np.asarray(x, dtype=complex)
        return x * x, self.X1.evaluate(x, y1, y2), self.X2.evaluate(x, y1, y2)

    __call__ = evaluate

    def to_dict(self, lam: complex | None = None) -> dict:
        out = {"version": FORMAT_VERSION, "X1": self.X1.to_dict(), "X2": self.X2.to_dict()}
        if lam is not None:
            out["lambda"] = _complex_record(lam)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "FiberedVectorField":
        if "components" in data:
            comps = data["components"]
            if len(comps) != 2:
                raise ValidationError("'components' must hold exactly two series")
            return cls(TruncatedSeries.from_dict(comps[0]), TruncatedSeries.from_dict(comps[1]))
        if "X1" in data and "X2" in data:
            return cls(TruncatedSeries.from_dict(data["X1"]), TruncatedSeries.from_dict(data["X2"]))
        raise ValidationError("vector field record needs 'X1'/'X2' or 'components'")

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FiberedVectorField":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc


def normal_form_field(lam: complex, a1: complex, a2: complex, c, trunc_x: int, trunc_y: int) -> FiberedVectorField:
    """Y_norm = x^2 d/dx + (-lam + a1 x - c(v)) y1 d/dy1 + (lam + a2 x + c(v)) y2 d/dy2.

    ``c`` holds the coefficients c_1, c_2, ... of c(v) (c_0 is ignored).
    """
    cv = np.zeros(trunc_y // 2 + 1, dtype=cdtype())
    coeffs = np.asarray(c.coeffs if isinstance(c, UniSeries) else c, dtype=cdtype())
    n = min(len(cv), len(coeffs))
    cv[1:n] = coeffs[1:n]
    base = TruncatedSeries.from_v_coeffs(cv, trunc_x, trunc_y)
    x = TruncatedSeries.x(trunc_x, trunc_y)
    y1 = TruncatedSeries.y1(trunc_x, trunc_y)
    y2 = TruncatedSeries.y2(trunc_x, trunc_y)
    X1 = mul(y1, (x * a1 - base) - lam)
    X2 = mul(y2, (x * a2 + base) + lam)
    return FiberedVectorField(X1, X2)


class FiberedDiffeo:
    """Fibered map (x, y) -> (x, phi1(x, y), phi2(x, y))."""

    __slots__ = ("phi1", "phi2")

    def __init__(self, phi1: TruncatedSeries, phi2: TruncatedSeries):
        tx = min(phi1.trunc_x, phi2.trunc_x)
        ty = min(phi1.trunc_y, phi2.trunc_y)
        self.phi1 = phi1.truncate(tx, ty)
        self.phi2 = phi2.truncate(tx, ty)

    @classmethod
    def identity(cls, trunc_x: int, trunc_y: int) -> "FiberedDiffeo":
        return cls(TruncatedSeries.y1(trunc_x, trunc_y), TruncatedSeries.y2(trunc_x, trunc_y))

    @classmethod
    def linear(cls, P: np.ndarray, trunc_x: int, trunc_y: int) -> "FiberedDiffeo":
        """Constant linear map y -> P y."""
        y1 = TruncatedSeries.y1(trunc_x, trunc_y)
        y2 = TruncatedSeries.y2(trunc_x, trunc_y)
        return cls(y1 * P[0, 0] + y2 * P[0, 1], y1 * P[1, 0] + y2 * P[1, 1])

    @property
    def trunc_x(self) -> int:
        return self.phi1.trunc_x

    @property
    def trunc_y(self) -> int:
        return self.phi1.trunc_y

    def linear_part(self) -> np.ndarray:
        """y-linear part at x = 0."""
        i1, i2 = mono_index(1, 0), mono_index(0, 1)
        return np.array([[self.phi1.coeffs[0, i1], self.phi1.coeffs[0, i2]],
                         [self.phi2.coeffs[0, i1], self.phi2.coeffs[0, i2]]])

    @property
    def tangent_to_identity(self) -> bool:
        """phi_i = y_i + terms of total order >= 2 in (x, y)."""
        if self.phi1.coeffs[0, 0] != 0 or self.phi2.coeffs[0, 0] != 0:
            return False
        if self.trunc_x >= 1 and (self.phi1.coeffs[1, 0] != 0 or self.phi2.coeffs[1, 0] != 0):
            return False
        return np.allclose(self.linear_part(), np.eye(2), rtol=0, atol=1e-14)

    def compose(self, inner: "FiberedDiffeo") -> "FiberedDiffeo":
        """self o inner."""
        p1, p2 = compose_many([self.phi1, self.phi2], inner)
        return FiberedDiffeo(p1, p2)

    def __matmul__(self, inner: "FiberedDiffeo") -> "FiberedDiffeo":
        return self.compose(inner)

    def inverse(self) -> "FiberedDiffeo":
        """Inverse by degree-graded fixed-point iteration psi = M^-1 (y - N o psi)."""
        M = self.linear_part()
        if abs(det2(M)) < 1e-14:
            raise SingularLinearPart(f"y-linear part {M} is not invertible")
        Minv = inv2(M)
        tx, ty = self.trunc_x, self.trunc_y
        lin = FiberedDiffeo.linear(M, tx, ty)
        N1, N2 = self.phi1 - lin.phi1, self.phi2 - lin.phi2
        y1 = TruncatedSeries.y1(tx, ty)
        y2 = TruncatedSeries.y2(tx, ty)
        psi = FiberedDiffeo.linear(Minv, tx, ty)
        if not (N1.coeffs.any() or N2.coeffs.any()):
            return psi
        for _ in range(tx + ty + 2):
            n1, n2 = compose_many([N1, N2], psi)
            r1, r2 = y1 - n1, y2 - n2
            new = FiberedDiffeo(r1 * Minv[0, 0] + r2 * Minv[0, 1], r1 * Minv[1, 0] + r2 * Minv[1, 1])
            if np.array_equal(new.phi1.coeffs, psi.phi1.coeffs) and np.array_equal(new.phi2.coeffs, psi.phi2.coeffs):
                break
            psi = new
        return psi

    def jacobian_det(self) -> TruncatedSeries:
        """det of the y-Jacobian (the full Jacobian of a fibered map)."""
        return mul(self.phi1.dy1(), self.phi2.dy2()) - mul(self.phi1.dy2(), self.phi2.dy1())

    def evaluate(self, x, y1, y2):
        return np.asarray(x, dtype=complex), self.phi1.evaluate(x, y1, y2), self.phi2.evaluate(x, y1, y2)

    __call__ = evaluate

    def max_diff(self, other: "FiberedDiffeo") -> float:
        return max(self.phi1.max_diff(other.phi1), self.phi2.max_diff(other.phi2))

    def to_dict(self) -> dict:
        return {"version": FORMAT_VERSION, "phi1": self.phi1.to_dict(), "phi2": self.phi2.to_dict(),
                "tangent_to_identity": bool(self.tangent_to_identity)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "FiberedDiffeo":
        try:
            return cls(TruncatedSeries.from_dict(data["phi1"]), TruncatedSeries.from_dict(data["phi2"]))
        except KeyError as exc:
            raise ValidationError(f"diffeo record lacks {exc}") from exc


def random_tangent_diffeo(rng: np.random.Generator, trunc_x: int, trunc_y: int, degree: int = 3,
                          scale: float = 0.1) -> FiberedDiffeo:
    """Random tangent-to-identity fibered diffeo with polynomial terms of total degree 2..degree.

    Every added monomial carries at least one y factor, so the map fixes y = 0.
    Coefficients are scale * (normal + i normal), drawn in lexicographic
    exponent order; the draw does not depend on the truncation bounds.
    """
    comps = []
    for j in range(2):
        terms = {}
        for k0 in range(degree + 1):
            for k1 in range(degree + 1):
                for k2 in range(degree + 1 - k1):
                    if 2 <= k0 + k1 + k2 <= degree and k1 + k2 >= 1:
                        terms[(k0, k1, k2)] = scale * complex(rng.normal(), rng.normal())
        lin = (0, 1, 0) if j == 0 else (0, 0, 1)
        terms[lin] = 1.0
        comps.append(TruncatedSeries.from_terms(terms, trunc_x, trunc_y))
    return FiberedDiffeo(*comps)


def lie_derivative(Y: FiberedVectorField, f: TruncatedSeries) -> TruncatedSeries:
    """x^2 df/dx + X1 df/dy1 + X2 df/dy2."""
    return f.x2_dx() + mul(Y.X1, f.dy1()) + mul(Y.X2, f.dy2())


def push_forward(phi: FiberedDiffeo, Y: FiberedVectorField, phi_inv: FiberedDiffeo | None = None) -> FiberedVectorField:
    """(D phi . Y) o phi^-1."""
    if phi_inv is None:
        phi_inv = phi.inverse()
    z1 = lie_derivative(Y, phi.phi1)
    z2 = lie_derivative(Y, phi.phi2)
    Z1, Z2 = compose_many([z1, z2], phi_inv)
    return FiberedVectorField(Z1, Z2)


def conjugacy_defect(phi: FiberedDiffeo, Y: FiberedVectorField, Z: FiberedVectorField) -> float:
    """max coefficient of D phi . Y - Z o phi (zero iff phi_*(Y) = Z)."""
    z1 = lie_derivative(Y, phi.phi1)
    z2 = lie_derivative(Y, phi.phi2)
    w1, w2 = compose_many([Z.X1, Z.X2], phi)
    return max(z1.max_diff(w1), z2.max_diff(w2))


def residue(Y: FiberedVectorField) -> complex:
    """(Tr A(x) / x) at x = 0, where A(x) is the y-linear part.

    The trace is basis independent, so a constant linear change is not needed;
    the y-linear part at the origin must still be conjugate to diag(-lam, lam).
    """
    A0 = Y.linear_matrix(0)
    if abs(np.trace(A0)) > 1e-10 or abs(det2(A0)) < 1e-14:
        raise NotDiagonalizable(f"y-linear part at the origin {A0} has no eigenvalues +-lam with lam != 0")
    if Y.trunc_x < 1:
        raise ValidationError("residue needs trunc_x >= 1")
    return complex(np.trace(Y.linear_matrix(1)))


def divergence_defect(Y: FiberedVectorField) -> TruncatedSeries:
    """dX1/dy1 + dX2/dy2 - x; zero iff Y is transversally Hamiltonian."""
    return Y.X1.dy1() + Y.X2.dy2() - TruncatedSeries.x(Y.trunc_x, Y.trunc_y)


def is_nonpositive_rational(z: complex, tol: float = 1e-10, max_den: int = 1000) -> bool:
    z = complex(z)
    if abs(z.imag) > tol or z.real > tol:
        return False
    frac = Fraction(z.real).limit_denominator(max_den)
    return abs(float(frac) - z.real) < tol


def classify(Y: FiberedVectorField) -> dict:
    res = residue(Y)
    A0 = Y.linear_matrix(0)
    lam = complex(np.sqrt(-complex(det2(A0))))
    return {
        "residue": res,
        "lambda": lam,
        "non_degenerate": not is_nonpositive_rational(res),
        "strictly_non_degenerate": res.real > 0,
        "transversally_hamiltonian": divergence_defect(Y).is_zero(1e-12),
    }


@dataclass
class SystemForm:
    """x^2 y' = alpha(x) + A(x) y + F(x, y) with F of order >= 2 in y."""

    alpha: tuple[UniSeries, UniSeries]
    A: tuple[tuple[UniSeries, UniSeries], tuple[UniSeries, UniSeries]]
    F: tuple[TruncatedSeries, TruncatedSeries]

    @classmethod
    def from_field(cls, Y: FiberedVectorField) -> "SystemForm":
        i1, i2 = mono_index(1, 0), mono_index(0, 1)
        tx = Y.trunc_x
        alpha = (UniSeries(Y.X1.coeffs[:, 0], tx), UniSeries(Y.X2.coeffs[:, 0], tx))
        A = ((UniSeries(Y.X1.coeffs[:, i1], tx), UniSeries(Y.X1.coeffs[:, i2], tx)),
             (UniSeries(Y.X2.coeffs[:, i1], tx), UniSeries(Y.X2.coeffs[:, i2], tx)))
        F = (Y.X1.y_degree_part(2), Y.X2.y_degree_part(2))
        return cls(alpha, A, F)

    def to_field(self) -> FiberedVectorField:
        comps = []
        for i in range(2):
            X = self.F[i].copy()
            X.coeffs[:, 0] += self.alpha[i].coeffs[: X.trunc_x + 1]
            X.coeffs[:, mono_index(1, 0)] += self.A[i][0].coeffs[: X.trunc_x + 1]
            X.coeffs[:, mono_index(0, 1)] += self.A[i][1].coeffs[: X.trunc_x + 1]
            comps.append(X)
        return FiberedVectorField(*comps)

    @property
    def lam(self) -> complex:
        A0 = np.array([[self.A[0][0][0], self.A[0][1][0]], [self.A[1][0][0], self.A[1][1][0]]])
        if abs(A0[0, 1]) > 1e-12 or abs(A0[1, 0]) > 1e-12 or abs(A0[0, 0] + A0[1, 1]) > 1e-10 or A0[1, 1] == 0:
            raise NotDiagonalizable(f"A(0) = {A0} is not diag(-lam, lam)")
        return cscalar(A0[1, 1])
