"""Straightening of the invariant hypersurfaces and the order-N normalization.

A prepared field is written as

    Y = Y0 + D(x, y) C + R(x, y) Rad,
    Y0 = lam C + x (x d/dx + a1 y1 d/dy1 + a2 y2 d/dy2),

with C = -y1 d/dy1 + y2 d/dy2 (tangential) and Rad = y1 d/dy1 + y2 d/dy2
(radial).  Both C and Rad commute with Y0, so the flows

    Lambda_t = (y1 e^t, y2 e^t),     Gamma_s = (y1 e^-s, y2 e^s)

act exactly by

    Lambda_t:  R -> (R + L_Y t) o Lambda_t^-1,   D -> D o Lambda_t^-1,
    Gamma_s:   D -> (D + L_Y s) o Gamma_s^-1,    R -> R o Gamma_s^-1.

Each level N of the recursion removes the x^N parts of R and D.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NonDegenerateViolation, SmallDivisor, ValidationError
from .prenorm import PrenormResult, gamma_map, lambda_map, prenormalize
from .series import (
    FORMAT_VERSION,
    TruncatedSeries,
    UniSeries,
    apply_cc_inverse,
    cdtype,
    compose_many,
    cscalar,
    det2,
    mono_index,
    monomial_exponents,
    mul,
    reciprocal,
    split_resonant,
)
from .vectorfield import (
    FiberedDiffeo,
    FiberedVectorField,
    is_nonpositive_rational,
    normal_form_field,
    push_forward,
)


@dataclass
class NormalFormParams:
    """Parameters of Y_norm = x^2 d/dx + (-lam + a1 x - c(v)) y1 d/dy1 + (lam + a2 x + c(v)) y2 d/dy2."""

    lam: complex
    a1: complex
    a2: complex
    c: UniSeries  # c(0) = 0
    c_sum_residual: np.ndarray | None = None  # coefficients of c1 + c2 (radial part at x = 0)

    @property
    def a(self) -> complex:
        return self.a1 + self.a2

    @property
    def m(self) -> complex:
        return 1.0 / self.a

    @property
    def m_integer(self) -> int | None:
        m = 1.0 / self.a
        r = round(m.real)
        if abs(m - r) < 1e-10 and r >= 1:
            return int(r)
        return None

    @property
    def c_m(self) -> complex:
        m = self.m_integer
        if m is None or m > self.c.trunc:
            return 0j
        return complex(self.c.coeffs[m])

    def c_tilde(self) -> UniSeries:
        """m * sum_{k != m} c_k / (k - m) v^k."""
        m = self.m
        mi = self.m_integer
        out = np.zeros(self.c.trunc + 1, dtype=cdtype())
        for k in range(1, self.c.trunc + 1):
            if mi is not None and k == mi:
                continue
            out[k] = m * self.c.coeffs[k] / (k - m)
        return UniSeries(out, self.c.trunc)

    def field(self, trunc_x: int, trunc_y: int) -> FiberedVectorField:
        return normal_form_field(self.lam, self.a1, self.a2, self.c, trunc_x, trunc_y)

    def to_dict(self) -> dict:
        rec = lambda z: {"re": float(complex(z).real), "im": float(complex(z).imag)}
        out = {"version": FORMAT_VERSION, "lambda": rec(self.lam), "a1": rec(self.a1), "a2": rec(self.a2),
               "c": [rec(z) for z in self.c.coeffs]}
        if self.c_sum_residual is not None:
            out["c1_plus_c2"] = [rec(z) for z in self.c_sum_residual]
        return out

    @classmethod
    def from_dict(cls, data) -> "NormalFormParams":
        try:
            p = lambda r: complex(r["re"], r["im"])
            return cls(p(data["lambda"]), p(data["a1"]), p(data["a2"]), UniSeries([p(r) for r in data["c"]]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed normal-form record: {exc}") from exc


# ----------------------------------------------------------- straightening
@dataclass
class PreparedField:
    """x^2 d/dx + ((-lam + a1 x) + y2 R1) y1 d/dy1 + ((lam + a2 x) + y1 R2) y2 d/dy2."""

    lam: complex
    a1: complex
    a2: complex
    R1: TruncatedSeries
    R2: TruncatedSeries

    def to_field(self, trunc_x: int, trunc_y: int) -> FiberedVectorField:
        y1 = TruncatedSeries.y1(trunc_x, trunc_y)
        y2 = TruncatedSeries.y2(trunc_x, trunc_y)
        x = TruncatedSeries.x(trunc_x, trunc_y)
        R1 = self.R1.with_bounds(trunc_x, trunc_y)
        R2 = self.R2.with_bounds(trunc_x, trunc_y)
        X1 = mul(y1, x * self.a1 - self.lam + mul(y2, R1))
        X2 = mul(y2, x * self.a2 + self.lam + mul(y1, R2))
        return FiberedVectorField(X1, X2)


def _solve_affine_ode(delta0: complex, delta1: complex, rhs: np.ndarray) -> np.ndarray:
    """Coefficients of psi with x^2 psi' + (delta0 + delta1 x) psi = rhs."""
    if abs(delta0) < 1e-14:
        raise SmallDivisor("delta_{j,n}(0) vanishes")
    psi = np.zeros_like(rhs)
    for k in range(len(rhs)):
        acc = rhs[k]
        if k >= 1:
            acc -= (delta1 + k - 1) * psi[k - 1]
        psi[k] = acc / delta0
    return psi


def prepared_from_field(Y: FiberedVectorField, lam: complex, a1: complex, a2: complex, tol: float = 1e-10) -> PreparedField:
    tx, ty = Y.trunc_x, Y.trunc_y
    x = TruncatedSeries.x(tx, ty)
    S1 = Y.X1.div_y(1, tol) - (x * a1 - lam)
    S2 = Y.X2.div_y(2, tol) - (x * a2 + lam)
    return PreparedField(lam, a1, a2, S1.div_y(2, tol), S2.div_y(1, tol))


def straighten_hypersurfaces(Y: FiberedVectorField, lam: complex | None = None, a1: complex | None = None,
                             a2: complex | None = None):
    """Make {y1 = 0} and {y2 = 0} invariant.

    For component j and each monomial y^n with n1 = 0 or n2 = 0 (|n| >= 2),
    solve x^2 psi' + delta_{j,n}(x) psi = -f_{j,n}(x), where f_{j,n} is the
    current coefficient and delta_{j,n} = lam1 n1 + lam2 n2 - lam_j with
    lam1 = -lam + a1 x, lam2 = lam + a2 x.  Mixed monomials keep psi = 0.
    The input must have linear part diag(-lam + a1 x, lam + a2 x) and vanish on y = 0.

    Returns (psi, PreparedField, Y').
    """
    tx, ty = Y.trunc_x, Y.trunc_y
    if lam is None:
        lam = Y.lam
    i1, i2 = mono_index(1, 0), mono_index(0, 1)
    if a1 is None:
        a1 = Y.X1.coeffs[1, i1] if tx >= 1 else cscalar(0)
    if a2 is None:
        a2 = Y.X2.coeffs[1, i2] if tx >= 1 else cscalar(0)
    lams0 = (-lam, lam)
    lams1 = (a1, a2)
    K1, K2 = monomial_exponents(ty)
    total = FiberedDiffeo.identity(tx, ty)
    for d in range(2, ty + 1):
        comps = []
        changed = False
        for j, X in enumerate((Y.X1, Y.X2)):
            psi = TruncatedSeries.zeros(tx, ty)
            for n1, n2 in ((d, 0), (0, d)):
                col = mono_index(n1, n2)
                f = X.coeffs[:, col]
                if not f.any():
                    continue
                d0 = -lam * n1 + lam * n2 - lams0[j]
                d1 = a1 * n1 + a2 * n2 - lams1[j]
                psi.coeffs[:, col] = _solve_affine_ode(d0, d1, -f)
                changed = True
            comps.append(psi)
        if not changed:
            continue
        step = FiberedDiffeo(TruncatedSeries.y1(tx, ty) + comps[0], TruncatedSeries.y2(tx, ty) + comps[1])
        Y = push_forward(step, Y)
        Y.X1.coeffs[:, mono_index(0, d)] = 0.0
        Y.X2.coeffs[:, mono_index(d, 0)] = 0.0
        Y.X1.coeffs[:, mono_index(d, 0)] = 0.0
        Y.X2.coeffs[:, mono_index(0, d)] = 0.0
        total = step.compose(total)
    return total, prepared_from_field(Y, lam, a1, a2), Y


# ---------------------------------------------------------------- order N
@dataclass
class OrderNField:
    """Y = Y0 + D C + R Rad with D = d(v) + O(x^N) and R = O(x^N).

    D and R are stored with trunc_y one less than the field (their products
    with y_j fill the field's y-degrees).
    """

    lam: complex
    a1: complex
    a2: complex
    D: TruncatedSeries
    R: TruncatedSeries
    N: int = 1

    @property
    def a(self) -> complex:
        return self.a1 + self.a2

    @classmethod
    def from_field(cls, Y: FiberedVectorField, lam: complex, a1: complex, a2: complex, N: int = 1,
                   tol: float = 1e-9) -> "OrderNField":
        tx, ty = Y.trunc_x, Y.trunc_y
        x = TruncatedSeries.x(tx, ty)
        u1 = Y.X1.div_y(1, tol) - (x * a1 - lam)   # = -D + R
        u2 = Y.X2.div_y(2, tol) - (x * a2 + lam)   # = D + R
        D = ((u2 - u1) * 0.5).truncate(tx, ty - 1)
        R = ((u2 + u1) * 0.5).truncate(tx, ty - 1)
        return cls(lam, a1, a2, D, R, N)

    def to_field(self) -> FiberedVectorField:
        tx, ty = self.D.trunc_x, self.D.trunc_y + 1
        D = self.D.with_bounds(tx, ty)
        R = self.R.with_bounds(tx, ty)
        x = TruncatedSeries.x(tx, ty)
        y1 = TruncatedSeries.y1(tx, ty)
        y2 = TruncatedSeries.y2(tx, ty)
        X1 = mul(y1, x * self.a1 - self.lam - D + R)
        X2 = mul(y2, x * self.a2 + self.lam + D + R)
        return FiberedVectorField(X1, X2)

    def d(self) -> np.ndarray:
        """Resonant profile of D at x = 0."""
        return self.D.v_profile(0)

    def lie(self, g: TruncatedSeries) -> TruncatedSeries:
        """L_Y g (exact: every coefficient of Y has y-order >= 1)."""
        e1, e2 = g.euler_y()
        out = g.x2_dx() + (e1 * self.a1 + e2 * self.a2).mul_x(1)
        out = out + (e2 - e1) * self.lam + mul(self.D, e2 - e1) + mul(self.R, e1 + e2)
        return out


def _v_series(coeffs: np.ndarray, trunc_x: int, trunc_y: int, xpow: int = 0) -> TruncatedSeries:
    s = TruncatedSeries.zeros(trunc_x, trunc_y)
    if xpow <= trunc_x:
        for k, c in enumerate(coeffs):
            if 2 * k <= trunc_y and c != 0:
                s.coeffs[xpow, mono_index(k, k)] = c
    return s


def _homological(state: OrderNField, T: TruncatedSeries, k: int, radial_coupling: np.ndarray | None = None):
    """Solve (k-1) g0 + v (a + 2 r(v)) g0' + (lam + d) C(g1) = -T with g0(0)=0, g1 non-resonant.

    T is a y-series (trunc_x = 0).  ``radial_coupling`` holds r(v) (the
    resonant radial profile) for the N = 1 radial step, else None.  For the
    radial step the non-resonant coupling 2 (R - R_res) v g0' is added to T.
    Returns (g0 coefficients, g1 series) with g1 at trunc_x = 0.
    """
    a = state.a
    tr = T.v_profile(0)
    t0 = np.zeros_like(tr)
    for kk in range(1, len(tr)):
        acc = -tr[kk]
        if radial_coupling is not None:
            j = np.arange(1, kk)
            acc -= 2 * np.sum(radial_coupling[kk - j] * j * t0[j])
        div = (k - 1) + a * kk
        if abs(div) < 1e-12:
            raise NonDegenerateViolation(f"zero divisor (k-1) + a*j with k={k}, j={kk}, a={a}")
        t0[kk] = acc / div
    ty = T.trunc_y
    _, Tn = split_resonant(T)
    if radial_coupling is not None:
        vg0 = _v_series(np.arange(len(t0)) * t0, 0, ty)  # v g0'(v)
        Rn = split_resonant(T)[1]
        Tn = Tn + split_resonant(mul(Rn, vg0) * 2.0)[1]
    unit = _v_series(state.d(), 0, ty) + state.lam
    rhs = split_resonant(mul(Tn, reciprocal(unit)) * -1.0)[1]
    g1 = apply_cc_inverse(rhs)
    return t0, g1


def _compose_DR(state: OrderNField, D: TruncatedSeries, R: TruncatedSeries, inv: FiberedDiffeo):
    ty = D.trunc_y
    inv_t = FiberedDiffeo(inv.phi1.truncate(None, ty), inv.phi2.truncate(None, ty))
    return compose_many([D, R], inv_t)


def _build_g(t0: np.ndarray, g1: TruncatedSeries, k: int, trunc_x: int, trunc_y: int) -> TruncatedSeries:
    """x^(k-1) g0(v) + x^k g1(y)."""
    g = _v_series(t0, trunc_x, trunc_y, xpow=k - 1) if k >= 1 else TruncatedSeries.zeros(trunc_x, trunc_y)
    if k <= trunc_x:
        g.coeffs[k, : g1.coeffs.shape[1]] += g1.coeffs[0, : g.coeffs.shape[1]]
    return g


def radial_step(state: OrderNField, trunc_y_map: int):
    """Remove the x^N part of R.  Returns (Lambda_tau, new state)."""
    N = state.N
    tx, ty = state.R.trunc_x, state.R.trunc_y
    T = state.R.x_coefficient(N) if N <= tx else TruncatedSeries.zeros(0, ty)
    if not T.coeffs.any():
        return None, state
    coupling = T.v_profile(0) if N == 1 else None
    t0, t1 = _homological(state, T, N, coupling)
    tau = _build_g(t0, t1, N, tx, trunc_y_map)
    lam_map = lambda_map(tau, tx, trunc_y_map)
    inv = lam_map.inverse()
    tau_s = tau.truncate(tx, ty)
    D, R = _compose_DR(state, state.D, state.R + state.lie(tau_s), inv)
    return lam_map, OrderNField(state.lam, state.a1, state.a2, D, R, N)


def tangential_step(state: OrderNField, k: int, trunc_y_map: int):
    """Remove the x^k part of D (k >= 1).  Returns (Gamma_sigma, new state)."""
    tx, ty = state.D.trunc_x, state.D.trunc_y
    if k > tx or k < 1:
        return None, state
    T = state.D.x_coefficient(k)
    if not T.coeffs.any():
        return None, state
    s0, s1 = _homological(state, T, k)
    sigma = _build_g(s0, s1, k, tx, trunc_y_map)
    gmap = gamma_map(sigma, tx, trunc_y_map)
    inv = gmap.inverse()
    sig_s = sigma.truncate(tx, ty)
    D, R = _compose_DR(state, state.D + state.lie(sig_s), state.R, inv)
    return gmap, OrderNField(state.lam, state.a1, state.a2, D, R, state.N)


def normalize_to_order(state: OrderNField, target: int, trunc_y_map: int | None = None,
                       Phi: FiberedDiffeo | None = None):
    """Raise the order of a prepared field from state.N to ``target``.

    Per level: radial step at x^N, tangential step at x^(N-1) (N >= 2), and
    tangential step at x^N.  Returns (Phi, state) with Phi the composed map
    (post-composed onto ``Phi`` when given).
    """
    if is_nonpositive_rational(complex(state.a)):
        raise NonDegenerateViolation(f"residue a = {state.a} lies in Q<=0")
    tx = state.D.trunc_x
    tym = state.D.trunc_y + 1 if trunc_y_map is None else trunc_y_map
    # steps are composed among themselves first (cheap near-identity
    # substitutions) and applied to ``Phi`` once at the end
    M = FiberedDiffeo.identity(tx, tym)
    while state.N < target:
        N = state.N
        steps = []
        m, state = radial_step(state, tym)
        steps.append(m)
        if N >= 2:
            m, state = tangential_step(state, N - 1, tym)
            steps.append(m)
        m, state = tangential_step(state, N, tym)
        steps.append(m)
        for m in steps:
            if m is not None:
                M = m.compose(M)
        state = OrderNField(state.lam, state.a1, state.a2, state.D, state.R, N + 1)
    return (M if Phi is None else M.compose(Phi)), state


def remainder_orders(state: OrderNField, tol: float = 1e-10) -> tuple[int, int]:
    """Lowest x-order carrying a non-negligible coefficient of (D - d(v), R)."""
    D = state.D.copy()
    D.coeffs[0] = 0
    def order(s):
        rows = np.nonzero(np.abs(s.coeffs).max(axis=1) > tol)[0]
        return int(rows[0]) if rows.size else s.trunc_x + 1
    return order(D), order(state.R)


# ----------------------------------------------------------- full pipeline
@dataclass
class NormalizingMap:
    """Formal normalizing map, stored as the chain  fibered o translation o P.

    When the center-manifold translation y -> y - yhat(x) is nonzero, the
    composite is not representable exactly at finite truncation (translations
    mix all y-degrees), so it is kept factored.  ``fibered`` fixes y = 0 and
    is exact on retained monomials.
    """

    P: np.ndarray
    translation: tuple[UniSeries, UniSeries]
    fibered: FiberedDiffeo

    @property
    def has_translation(self) -> bool:
        return bool(self.translation[0].coeffs.any() or self.translation[1].coeffs.any())

    @property
    def is_linear_identity(self) -> bool:
        return np.array_equal(self.P, np.eye(2))

    def as_diffeo(self) -> FiberedDiffeo:
        """Single truncated map (exact only without translation)."""
        tx, ty = self.fibered.trunc_x, self.fibered.trunc_y
        inner = FiberedDiffeo.linear(self.P, tx, ty)
        if self.has_translation:
            t1 = TruncatedSeries.from_x_coeffs(self.translation[0].coeffs, tx, ty)
            t2 = TruncatedSeries.from_x_coeffs(self.translation[1].coeffs, tx, ty)
            inner = FiberedDiffeo(inner.phi1 - t1, inner.phi2 - t2)
        if self.is_linear_identity and not self.has_translation:
            return self.fibered
        return self.fibered.compose(inner)

    def evaluate(self, x, y1, y2):
        x = np.asarray(x, dtype=complex)
        y1, y2 = np.asarray(y1, dtype=complex), np.asarray(y2, dtype=complex)
        z1 = self.P[0, 0] * y1 + self.P[0, 1] * y2
        z2 = self.P[1, 0] * y1 + self.P[1, 1] * y2
        if self.has_translation:
            z1 = z1 - self.translation[0](x)
            z2 = z2 - self.translation[1](x)
        return self.fibered.evaluate(x, z1, z2)

    __call__ = evaluate

    def det_defect(self) -> TruncatedSeries:
        """det(D fibered) * det(P) - 1 through y-degree trunc_y - 1.

        The translation has unit Jacobian, so this is (det D Phi - 1) o (T o P)^-1
        and vanishes iff the full map has unit Jacobian determinant.
        """
        det = self.fibered.jacobian_det() * det2(self.P)
        # degree trunc_y of the determinant needs degree trunc_y + 1 of the map
        return (det - 1.0).truncate(None, self.fibered.trunc_y - 1)

    def to_dict(self) -> dict:
        rec = lambda z: {"re": float(complex(z).real), "im": float(complex(z).imag)}
        return {
            "version": FORMAT_VERSION,
            "P": [[rec(z) for z in row] for row in self.P],
            "translation": [[rec(z) for z in t.coeffs] for t in self.translation],
            "fibered": self.fibered.to_dict(),
        }


@dataclass
class NormalizationResult:
    map: NormalizingMap
    params: NormalFormParams
    prepared: PrenormResult
    state: OrderNField
    timings: dict = field(default_factory=dict)


# the x^k coefficient of the normalizing map is fixed by the field through x^(k+2)
MAP_X_LAG = 2


def full_formal_normalize(Y: FiberedVectorField, trunc_x: int | None = None, trunc_y: int | None = None,
                          tol: float = 1e-9) -> NormalizationResult:
    """Formal normal form and normalizing map to truncation (trunc_x, trunc_y).

    The resonant part of the x^k coefficient of the normalizing map is only
    determined by the field through x^(k+2), so the field must be known to
    x-order trunc_x + 2 (the default trunc_x is Y.trunc_x - 2).  The returned
    map has bounds (trunc_x, trunc_y); ``state`` keeps the working bounds.
    """
    ty = Y.trunc_y if trunc_y is None else trunc_y
    tx = Y.trunc_x - MAP_X_LAG if trunc_x is None else trunc_x
    if tx < 1 or ty < 2:
        raise ValidationError("need trunc_x >= 1 and trunc_y >= 2 (the field must be known to x-order trunc_x + 2)")
    work_x = tx + MAP_X_LAG
    if Y.trunc_x < work_x or Y.trunc_y < ty:
        raise ValidationError(f"input field has bounds ({Y.trunc_x}, {Y.trunc_y}); the requested map bounds "
                              f"({tx}, {ty}) need ({work_x}, {ty})")
    Y = Y.truncate(work_x, ty)
    t0 = time.perf_counter()
    pre = prenormalize(Y, tol)
    a = pre.a1 + pre.a2
    if is_nonpositive_rational(a):
        raise NonDegenerateViolation(f"residue a = {a} lies in Q<=0")
    t1 = time.perf_counter()
    psi, prep, Ys = straighten_hypersurfaces(pre.field, pre.lam, pre.a1, pre.a2)
    t2 = time.perf_counter()
    state = OrderNField.from_field(Ys, pre.lam, pre.a1, pre.a2, N=1, tol=tol)
    Phi0 = psi.compose(pre.map)
    Phi, state = normalize_to_order(state, work_x + 1, ty, Phi0)
    Phi = FiberedDiffeo(Phi.phi1.truncate(tx, ty), Phi.phi2.truncate(tx, ty))
    t3 = time.perf_counter()
    c = state.d()
    c[0] = 0
    c_sum = pre.info["c_sum"].copy()
    radial0 = 2 * state.R.v_profile(0)
    c_sum[: radial0.size] += radial0[: c_sum.size]
    params = NormalFormParams(pre.lam, pre.a1, pre.a2, UniSeries(c), c_sum_residual=c_sum)
    nmap = NormalizingMap(pre.P, tuple(UniSeries(t.coeffs, tx) for t in pre.translation), Phi)
    return NormalizationResult(nmap, params, pre, state,
                               {"prenorm": t1 - t0, "straighten": t2 - t1, "order_n": t3 - t2})


def normalize_up_to_order(Y: FiberedVectorField, order: int, tol: float = 1e-9) -> NormalizationResult:
    """Normalize Y only up to x-order ``order``: D - c(v) and R become O(x^order).

    Unlike :func:`full_formal_normalize` the map keeps the working bounds of
    Y; together with ``state`` (the pushed-forward field in (D, R) form) it is
    an exact conjugacy on retained monomials, which is what the sectorial
    construction needs.
    """
    if order < 1:
        raise ValidationError("order must be >= 1")
    tx, ty = Y.trunc_x, Y.trunc_y
    t0 = time.perf_counter()
    pre = prenormalize(Y, tol)
    if is_nonpositive_rational(pre.a1 + pre.a2):
        raise NonDegenerateViolation(f"residue a = {pre.a1 + pre.a2} lies in Q<=0")
    psi, prep, Ys = straighten_hypersurfaces(pre.field, pre.lam, pre.a1, pre.a2)
    state = OrderNField.from_field(Ys, pre.lam, pre.a1, pre.a2, N=1, tol=tol)
    Phi, state = normalize_to_order(state, order, ty, psi.compose(pre.map))
    c = state.d()
    c[0] = 0
    params = NormalFormParams(pre.lam, pre.a1, pre.a2, UniSeries(c))
    nmap = NormalizingMap(pre.P, tuple(UniSeries(t.coeffs, tx) for t in pre.translation), Phi)
    return NormalizationResult(nmap, params, pre, state, {"total": time.perf_counter() - t0})
