"""Formal preparation of a doubly-resonant saddle-node.

Stages (each returns the fibered map it applied and the transformed field):

* :func:`diagonalize_y_linear_part` - constant linear change, det 1;
* :func:`flatten_center_manifold` - translate the formal center manifold to y = 0;
* :func:`normalize_restriction` - bring the restriction to {x = 0} to (lam + d(v)) C;
* :func:`diagonalize_linear` - make the x-dependent y-linear part diagonal;
* :func:`constant_residue_coeffs` - make the diagonal x-linear coefficients constant.

Throughout, C = -y1 d/dy1 + y2 d/dy2 and v = y1 y2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateQuadraticPart,
    NotDivIntegrable,
    ResonanceViolation,
    ValidationError,
)
from .series import (
    TruncatedSeries,
    UniSeries,
    apply_cc,
    apply_cc_inverse,
    cdtype,
    compose_many,
    cscalar,
    det2,
    exp_series,
    inv2,
    mono_index,
    monomial_exponents,
    mul,
    reciprocal,
    split_resonant,
)
from .vectorfield import FiberedDiffeo, FiberedVectorField, lie_derivative, push_forward

EIG_TOL = 1e-10


# ---------------------------------------------------------------- constant P
def _eigvec(A: np.ndarray, mu: complex) -> np.ndarray:
    c1 = np.array([A[0, 1], mu - A[0, 0]])
    c2 = np.array([mu - A[1, 1], A[1, 0]])
    norm = lambda u: np.sqrt(np.sum(np.abs(u) ** 2))
    v = c1 if norm(c1) >= norm(c2) else c2
    return v / norm(v)


def diagonalizing_matrix(A0: np.ndarray) -> tuple[np.ndarray, complex, bool]:
    """P with det P = 1 and P A0 P^-1 = diag(-lam, lam).

    Returns (P, lam, swapped).  ``swapped`` is True when the principal square
    root was not used because A0 was already diagonal with the opposite order.
    """
    A0 = np.asarray(A0, dtype=cdtype())
    scale = max(1.0, float(np.abs(A0).max()))
    if abs(np.trace(A0)) > EIG_TOL * scale:
        raise ResonanceViolation(f"eigenvalues of {A0.tolist()} are not opposite (trace {np.trace(A0):.3g})")
    det = det2(A0)
    if abs(det) < EIG_TOL * scale ** 2:
        raise ResonanceViolation("y-linear part at the origin has a zero eigenvalue")
    if abs(A0[0, 1]) <= EIG_TOL * scale and abs(A0[1, 0]) <= EIG_TOL * scale:
        lam = cscalar(A0[1, 1])
        principal = np.sqrt(-det)
        return np.eye(2, dtype=cdtype()), lam, abs(lam - principal) > abs(lam + principal)
    lam = np.sqrt(-det)
    V = np.column_stack([_eigvec(A0, -lam), _eigvec(A0, lam)])
    V = V / np.sqrt(det2(V))
    return inv2(V), lam, False


def diagonalize_y_linear_part(Y: FiberedVectorField):
    """Constant change y -> P y (det P = 1) making the y-linear part at the origin diagonal.

    Returns (P, Y', lam, swapped).
    """
    P, lam, swapped = diagonalizing_matrix(Y.linear_matrix(0))
    if np.array_equal(P, np.eye(2)):
        return P, Y, lam, swapped
    tx, ty = Y.trunc_x, Y.trunc_y
    phi = FiberedDiffeo.linear(P, tx, ty)
    Yp = push_forward(phi, Y, FiberedDiffeo.linear(inv2(P), tx, ty))
    # remove round-off in the entries that are zero by construction
    i1, i2 = mono_index(1, 0), mono_index(0, 1)
    Yp.X1.coeffs[0, i1], Yp.X1.coeffs[0, i2] = -lam, 0.0
    Yp.X2.coeffs[0, i1], Yp.X2.coeffs[0, i2] = 0.0, lam
    return P, Yp, lam, swapped


# ------------------------------------------------------------ center manifold
def _compose_univariate(f: TruncatedSeries, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    """x-coefficients of f(x, y1(x), y2(x)) for x-series y1, y2 without constant term."""
    tx = f.trunc_x
    K1, K2 = monomial_exponents(f.trunc_y)

    def powers(y):
        out = [np.eye(1, tx + 1, 0, dtype=cdtype())[0]]
        for _ in range(f.trunc_y):
            out.append(np.convolve(out[-1], y)[: tx + 1])
        return out

    p1, p2 = powers(y1), powers(y2)
    out = np.zeros(tx + 1, dtype=cdtype())
    for m in range(len(K1)):
        col = f.coeffs[:, m]
        if col.any():
            term = np.convolve(p1[K1[m]], p2[K2[m]])[: tx + 1]
            out += np.convolve(col, term)[: tx + 1]
    return out


def center_manifold_series(Y: FiberedVectorField) -> tuple[UniSeries, UniSeries]:
    """Formal solution y(x) of x^2 y' = X(x, y) with y(0) = 0."""
    tx = Y.trunc_x
    A0 = Y.linear_matrix(0)
    if abs(det2(A0)) < 1e-14:
        raise ResonanceViolation("y-linear part at the origin is singular")
    A0inv = inv2(A0)
    y = np.zeros((2, tx + 1), dtype=cdtype())
    for n in range(1, tx + 1):
        g1 = _compose_univariate(Y.X1, y[0], y[1])[n]
        g2 = _compose_univariate(Y.X2, y[0], y[1])[n]
        rhs = (n - 1) * y[:, n - 1] - np.array([g1, g2])
        y[:, n] = A0inv @ rhs
    return UniSeries(y[0], tx), UniSeries(y[1], tx)


def flatten_center_manifold(Y: FiberedVectorField):
    """Translate y -> y - yhat(x) so that both components vanish on y = 0.

    Returns (yhat1, yhat2, Y', phi) with phi the applied map.
    """
    tx, ty = Y.trunc_x, Y.trunc_y
    yh1, yh2 = center_manifold_series(Y)
    if not (yh1.coeffs.any() or yh2.coeffs.any()):
        return yh1, yh2, Y, FiberedDiffeo.identity(tx, ty)
    s1 = TruncatedSeries.from_x_coeffs(yh1.coeffs, tx, ty)
    s2 = TruncatedSeries.from_x_coeffs(yh2.coeffs, tx, ty)
    y1 = TruncatedSeries.y1(tx, ty)
    y2 = TruncatedSeries.y2(tx, ty)
    X1, X2 = compose_many([Y.X1, Y.X2], (y1 + s1, y2 + s2))
    X1 = X1 - s1.x2_dx()
    X2 = X2 - s2.x2_dx()
    X1.coeffs[:, 0] = 0.0
    X2.coeffs[:, 0] = 0.0
    return yh1, yh2, FiberedVectorField(X1, X2), FiberedDiffeo(y1 - s1, y2 - s2)


# ------------------------------------------------------ restriction to x = 0
@dataclass
class RestrictionFactored:
    """Restriction U(y) C with U(0) = lam != 0 (U has trunc_x = 0)."""

    U: TruncatedSeries

    def __post_init__(self):
        if self.U.constant_term() == 0:
            raise ValidationError("U(0) must be nonzero")


def linearize_restriction(U: RestrictionFactored | TruncatedSeries, trunc_y: int | None = None):
    """gamma (zero resonant part) such that y -> (y1 e^-gamma, y2 e^gamma) makes U resonant.

    Pushing U C forward by this map gives (lam + d(v)) C.  Returns (gamma, d)
    with d a UniSeries in v with d(0) = 0.
    """
    if isinstance(U, RestrictionFactored):
        U = U.U
    if U.constant_term() == 0:
        raise ValidationError("U(0) must be nonzero")
    if trunc_y is not None:
        U = U.truncate(None, trunc_y)
    lam = U.constant_term()
    Uinv = reciprocal(U)
    u_res, u_nres = split_resonant(Uinv)
    W = reciprocal(u_res)
    gamma = apply_cc_inverse(split_resonant(mul(W, u_nres))[1])
    dv = W.v_profile(0)
    dv[0] -= lam
    dv[0] = 0.0
    return gamma, UniSeries(dv)


def gamma_map(gamma: TruncatedSeries, trunc_x: int, trunc_y: int) -> FiberedDiffeo:
    """(y1 e^-g, y2 e^g) for a series g without constant term."""
    g = gamma.with_bounds(trunc_x, trunc_y) if gamma.trunc_x < trunc_x or gamma.trunc_y < trunc_y else gamma
    g = g.truncate(trunc_x, trunc_y)
    y1 = TruncatedSeries.y1(trunc_x, trunc_y)
    y2 = TruncatedSeries.y2(trunc_x, trunc_y)
    return FiberedDiffeo(mul(y1, exp_series(-g)), mul(y2, exp_series(g)))


def lambda_map(tau: TruncatedSeries, trunc_x: int, trunc_y: int) -> FiberedDiffeo:
    """(y1 e^t, y2 e^t), the flow of the radial field at time t."""
    t = tau.truncate(trunc_x, trunc_y)
    e = exp_series(t)
    return FiberedDiffeo(mul(TruncatedSeries.y1(trunc_x, trunc_y), e), mul(TruncatedSeries.y2(trunc_x, trunc_y), e))


def restriction_first_integral(X1: TruncatedSeries, X2: TruncatedSeries, lam: complex,
                               trunc_y: int, tol: float = 1e-9) -> TruncatedSeries:
    """Formal first integral H = lam*v + O(3) of X1 d1 + X2 d2 (a field in y only).

    The linear part of (X1, X2) must be diag(-lam, lam).  Resonant parts of H
    beyond lam*v are set to zero.  Raises NotDivIntegrable when no first
    integral exists.
    """
    X1 = X1.x_coefficient(0).with_bounds(0, trunc_y)
    X2 = X2.x_coefficient(0).with_bounds(0, trunc_y)
    H = TruncatedSeries.monomial(0, 1, 1, 0, trunc_y, lam)
    K1, K2 = monomial_exponents(trunc_y)
    deg = K1 + K2
    scale = max(1.0, X1.max_abs(), X2.max_abs())
    for d in range(3, trunc_y + 1):
        E = mul(X1, H.dy1()) + mul(X2, H.dy2())
        Ed = E.coeffs[0] * (deg == d)
        res = Ed[K1 == K2]
        if res.size and np.abs(res).max() > tol * scale ** 2:
            raise NotDivIntegrable(f"no formal first integral: resonant obstruction {np.abs(res).max():.3g} "
                                   f"at degree {d}")
        Hd = apply_cc_inverse(TruncatedSeries(Ed[None, :], 0, trunc_y), tol=np.inf) * (-1.0 / lam)
        H = H + Hd
    return H


def quadratic_normalizer(H: TruncatedSeries) -> tuple[np.ndarray, complex]:
    """L with det L = 1 such that the quadratic part of H equals mu*(Ly)_1*(Ly)_2."""
    s11 = H[0, 2, 0]
    s22 = H[0, 0, 2]
    s12 = H[0, 1, 1] / 2.0
    if abs(s11 * s22 - s12 * s12) < 1e-14 * max(1.0, abs(s11), abs(s22), abs(s12)) ** 2:
        raise DegenerateQuadraticPart("Hessian of H at the origin is singular")
    if abs(s11) < 1e-15 and abs(s22) < 1e-15:
        return np.eye(2, dtype=cdtype()), cscalar(2 * s12)
    swap = abs(s11) < 1e-15
    a, b, c = (s22, s12, s11) if swap else (s11, s12, s22)
    disc = np.sqrt(b * b - a * c + 0j)
    r1, r2 = (-b + disc) / a, (-b - disc) / a
    # a*(u - r1 w)(u - r2 w) with (u, w) = (y1, y2), or swapped
    L = np.array([[1.0, -r1], [1.0 / (r1 - r2), -r2 / (r1 - r2)]], dtype=cdtype())
    mu = cscalar(a * (r1 - r2))
    if swap:
        L = L[:, ::-1] * np.array([[1.0], [-1.0]])
        mu = -mu
    return L, mu


def morse_normalize_hamiltonian(H: TruncatedSeries, trunc_y: int | None = None):
    """phi with H o phi^-1 = mu*y1*y2, via a det-1 linear change and the graded Morse recursion.

    H is a series in y (its x^0 slice is used).  Returns (phi, mu) where phi
    has trunc_x = 0 and trunc_y = trunc_y - 1 (degree d of phi needs degree
    d + 1 of H).
    """
    ty = H.trunc_y if trunc_y is None else trunc_y
    H = H.x_coefficient(0).truncate(0, ty)
    if H.constant_term() != 0 or H.y_degree_part(1, 1).coeffs.any():
        raise ValidationError("H must start at order 2")
    L, mu = quadratic_normalizer(H)
    tphi = max(ty - 1, 1)
    if np.array_equal(L, np.eye(2)):
        Hn = H
    else:
        Linv = FiberedDiffeo.linear(inv2(L), 0, ty)
        Hn = compose_many([H], Linv)[0]
    K1, K2 = monomial_exponents(ty)
    deg = K1 + K2
    A = TruncatedSeries.zeros(0, ty)
    B = TruncatedSeries.zeros(0, ty)
    for d in range(2, ty):
        R = Hn.coeffs[0] * (deg == d + 1) / mu - mul(A, B).coeffs[0] * (deg == d + 1)
        toB = (K1 >= K2) & (deg == d + 1)
        rB = TruncatedSeries(np.where(toB, R, 0)[None, :], 0, ty)
        rA = TruncatedSeries(np.where(~toB & (deg == d + 1), R, 0)[None, :], 0, ty)
        B = B + rB.mul_y(-1, 0)
        A = A + rA.mul_y(0, -1)
    y1 = TruncatedSeries.y1(0, ty)
    y2 = TruncatedSeries.y2(0, ty)
    phi = FiberedDiffeo((y1 + A).truncate(0, tphi), (y2 + B).truncate(0, tphi))
    if not np.array_equal(L, np.eye(2)):
        phi = phi.compose(FiberedDiffeo.linear(L, 0, tphi))
    return phi, mu


def _lift(phi: FiberedDiffeo, trunc_x: int, trunc_y: int) -> FiberedDiffeo:
    """Embed an x-independent map at larger bounds (exact: it is a polynomial in y)."""
    return FiberedDiffeo(phi.phi1.with_bounds(trunc_x, trunc_y), phi.phi2.with_bounds(trunc_x, trunc_y))


def restriction_is_factored(Y: FiberedVectorField, tol: float = 1e-12) -> bool:
    X1 = Y.X1.x_coefficient(0)
    X2 = Y.X2.x_coefficient(0)
    try:
        u1 = (-X1).div_y(1, tol)
        u2 = X2.div_y(2, tol)
    except ValidationError:
        return False
    ty = Y.trunc_y - 1
    return u1.truncate(0, ty).max_diff(u2.truncate(0, ty)) <= tol


def normalize_restriction(Y: FiberedVectorField, tol: float = 1e-9):
    """Conjugate so that the restriction to x = 0 is (lam + d(v)) C.

    Requires a diagonal y-linear part at the origin and X(x, 0) = 0.  A
    factored restriction U C is linearized directly; otherwise a formal first
    integral is computed and Morse-normalized first.

    Returns (phi, Y', d, info).
    """
    tx, ty = Y.trunc_x, Y.trunc_y
    lam = Y.lam
    info = {"route": "factored"}
    phi_total = FiberedDiffeo.identity(tx, ty)
    if not restriction_is_factored(Y):
        info["route"] = "first-integral"
        # H to degree ty + 1 needs X only to degree ty; the Morse map is then exact to degree ty
        H = restriction_first_integral(Y.X1, Y.X2, lam, ty + 1, tol)
        phi0, mu = morse_normalize_hamiltonian(H, ty + 1)
        phi = _lift(phi0, tx, ty)
        Y = push_forward(phi, Y)
        phi_total = phi
        info["mu"] = mu
    X2 = Y.X2.x_coefficient(0)
    U = X2.div_y(2, tol=tol * max(1.0, abs(lam))).truncate(0, ty - 1)
    X1 = Y.X1.x_coefficient(0)
    U1 = (-X1).div_y(1, tol=tol * max(1.0, abs(lam))).truncate(0, ty - 1)
    if U1.max_diff(U) > tol * max(1.0, abs(lam)):
        raise NotDivIntegrable(f"restriction is not a multiple of C after Morse normalization "
                               f"(defect {U1.max_diff(U):.3g})")
    gamma, d = linearize_restriction(U)
    if gamma.coeffs.any():
        g = gamma_map(gamma, tx, ty)
        Y = push_forward(g, Y)
        phi_total = g.compose(phi_total)
    # record the resonant radial residual c1 + c2 before cleaning: the x^0
    # slice is now (lam + d(v)) C up to roundoff, and it is stored exactly
    u1 = Y.X1.x_coefficient(0).div_y(1, tol=np.inf) + lam
    u2 = Y.X2.x_coefficient(0).div_y(2, tol=np.inf) - lam
    info["c_sum"] = (u1 + u2).truncate(0, ty - 1).v_profile(0)
    for X, sgn, col in ((Y.X1, -1.0, (1, 0)), (Y.X2, 1.0, (0, 1))):
        X.coeffs[0] = 0.0
        for k, dk in enumerate(d.coeffs):
            if 2 * k + 1 <= ty:
                X.coeffs[0, mono_index(k + col[0], k + col[1])] = sgn * (dk + (lam if k == 0 else 0.0))
    return phi_total, Y, d, info


# ------------------------------------------------------------ linear system
def _linear_entries(Y: FiberedVectorField, lam: complex):
    i1, i2 = mono_index(1, 0), mono_index(0, 1)
    A11 = Y.X1.coeffs[:, i1].copy()
    A12 = Y.X1.coeffs[:, i2].copy()
    A21 = Y.X2.coeffs[:, i1].copy()
    A22 = Y.X2.coeffs[:, i2].copy()
    A11[0] += lam
    A22[0] -= lam
    return A11, A12, A21, A22


def _shift_down(c: np.ndarray) -> np.ndarray:
    """Coefficients of c(x)/x (c(0) must vanish)."""
    out = np.zeros_like(c)
    out[:-1] = c[1:]
    return out


def riccati_coefficients(lam, b1, b2, c1, c2, n_terms: int) -> tuple[np.ndarray, np.ndarray]:
    """Formal solutions of the two Riccati equations for p1, p2.

    x^2 p1' = (2 lam + x b2 - x - x b1) p1 + c2 - x^2 c1 p1^2
    x^2 p2' = (-2 lam + x b1 - x - x b2) p2 + c1 - x^2 c2 p2^2
    """
    def solve(sgn, bb, cc_lin, cc_quad):
        # bb: coefficients of (b_other - b_self - 1), multiplied by x
        p = np.zeros(n_terms, dtype=cdtype())
        for n in range(n_terms):
            acc = -cc_lin[n] if n < len(cc_lin) else 0.0
            if n >= 1:
                acc += (n - 1) * p[n - 1]
                k = np.arange(1, n + 1)
                acc -= np.sum(bb[k - 1] * p[n - k])
            if n >= 2:
                sq = np.convolve(p[: n - 1], p[: n - 1])[: n - 1]
                acc += np.sum(cc_quad[: n - 1][::-1] * sq[: n - 1])
            p[n] = acc / (sgn * 2 * lam)
        return p

    pad = lambda a: np.concatenate([np.asarray(a, dtype=cdtype()), np.zeros(n_terms + 2, dtype=cdtype())])
    b1, b2, c1, c2 = pad(b1), pad(b2), pad(c1), pad(c2)
    e1 = b2 - b1
    e1[0] -= 1.0
    e2 = b1 - b2
    e2[0] -= 1.0
    p1 = solve(+1, e1, c2, c1)
    p2 = solve(-1, e2, c1, c2)
    return p1, p2


def diagonalize_linear(Y: FiberedVectorField):
    """Remove the off-diagonal x-dependent y-linear terms.

    Uses z = P(x) y with P = [[1, x p2], [x p1, 1]] where (p1, p2) solve the
    Riccati equations with p1(0) = -c2(0)/(2 lam), p2(0) = c1(0)/(2 lam).
    Returns (p1, p2, Y', phi, (ahat1, ahat2)).
    """
    tx, ty = Y.trunc_x, Y.trunc_y
    lam = Y.lam
    A11, A12, A21, A22 = _linear_entries(Y, lam)
    b1, b2 = _shift_down(A11), _shift_down(A22)
    c1, c2 = _shift_down(A12), _shift_down(A21)
    nt = max(tx, 1)
    if not (c1.any() or c2.any()):
        p1 = p2 = np.zeros(nt, dtype=cdtype())
        return UniSeries(p1), UniSeries(p2), Y, FiberedDiffeo.identity(tx, ty), (UniSeries(b1), UniSeries(b2))
    p1, p2 = riccati_coefficients(lam, b1, b2, c1, c2, nt)
    ahat1 = UniSeries(b1 + np.concatenate([[0], np.convolve(c1, p1)[: len(b1) - 1]]), tx)
    ahat2 = UniSeries(b2 + np.concatenate([[0], np.convolve(c2, p2)[: len(b2) - 1]]), tx)
    y1 = TruncatedSeries.y1(tx, ty)
    y2 = TruncatedSeries.y2(tx, ty)
    xp1 = np.concatenate([[0], p1])[: tx + 1]
    xp2 = np.concatenate([[0], p2])[: tx + 1]
    Pmap = FiberedDiffeo(y1 + y2.mul_x_poly(xp2), y1.mul_x_poly(xp1) + y2)  # old = P(new)
    phi = Pmap.inverse()
    Yn = push_forward(phi, Y, Pmap)
    i1, i2 = mono_index(1, 0), mono_index(0, 1)
    Yn.X1.coeffs[:, i2] = 0.0
    Yn.X2.coeffs[:, i1] = 0.0
    return UniSeries(p1), UniSeries(p2), Yn, phi, (ahat1, ahat2)


def constant_residue_coeffs(Y: FiberedVectorField):
    """Make the diagonal x-linear coefficients constant with y -> diag(1/q1, 1/q2) y.

    q_i = exp(int_0^x (ahat_i(s) - a_i)/s ds).  Returns (q1, q2, Y', phi, (a1, a2)).
    """
    tx, ty = Y.trunc_x, Y.trunc_y
    lam = Y.lam
    A11, _, _, A22 = _linear_entries(Y, lam)
    ah1, ah2 = _shift_down(A11), _shift_down(A22)
    a1, a2 = ah1[0], ah2[0]
    qs = []
    for ah in (ah1, ah2):
        g = _shift_down(ah - np.concatenate([[ah[0]], np.zeros(len(ah) - 1)]))
        qs.append(UniSeries(g[: max(tx, 1)]).antiderivative())
    if not (qs[0].coeffs.any() or qs[1].coeffs.any()):
        return UniSeries([1.0], 0), UniSeries([1.0], 0), Y, FiberedDiffeo.identity(tx, ty), (a1, a2)
    q1, q2 = qs[0].exp(), qs[1].exp()
    iq1, iq2 = (-qs[0]).exp(), (-qs[1]).exp()
    y1 = TruncatedSeries.y1(tx, ty)
    y2 = TruncatedSeries.y2(tx, ty)
    phi = FiberedDiffeo(y1.mul_x_poly(iq1.coeffs), y2.mul_x_poly(iq2.coeffs))
    inv = FiberedDiffeo(y1.mul_x_poly(q1.coeffs), y2.mul_x_poly(q2.coeffs))
    Yn = push_forward(phi, Y, inv)
    i1, i2 = mono_index(1, 0), mono_index(0, 1)
    Yn.X1.coeffs[:, i1] = 0.0
    Yn.X2.coeffs[:, i2] = 0.0
    Yn.X1.coeffs[0, i1], Yn.X2.coeffs[0, i2] = -lam, lam
    if tx >= 1:
        Yn.X1.coeffs[1, i1], Yn.X2.coeffs[1, i2] = a1, a2
    return q1, q2, Yn, phi, (a1, a2)


@dataclass
class PrenormResult:
    """Output of :func:`prenormalize`.

    The full preparing map is ``map o T o P`` where ``P`` is the constant
    linear change and ``T`` the center-manifold translation y -> y - yhat(x).
    ``map`` itself fixes y = 0, so it is exact on retained monomials.
    """

    P: np.ndarray
    lam: complex
    translation: tuple[UniSeries, UniSeries]
    flat_field: FiberedVectorField
    field: FiberedVectorField
    map: FiberedDiffeo
    a1: complex = 0j
    a2: complex = 0j
    d: UniSeries | None = None
    info: dict = field(default_factory=dict)


def prenormalize(Y: FiberedVectorField, tol: float = 1e-9) -> PrenormResult:
    """Run every preparation stage.

    The center manifold is flattened first: all later maps then fix y = 0, so
    substitution is exact on retained monomials.
    """
    P, Y1, lam, swapped = diagonalize_y_linear_part(Y)
    info = {"swapped": swapped}
    yh1, yh2, Y2, _ = flatten_center_manifold(Y1)
    m2, Y3, d, rinfo = normalize_restriction(Y2, tol)
    info.update(rinfo)
    p1, p2, Y4, m3, _ = diagonalize_linear(Y3)
    info["p"] = (p1, p2)
    q1, q2, Y5, m4, (a1, a2) = constant_residue_coeffs(Y4)
    info["q"] = (q1, q2)
    total = m4.compose(m3.compose(m2))
    return PrenormResult(P=P, lam=lam, translation=(yh1, yh2), flat_field=Y2, field=Y5, map=total,
                         a1=a1, a2=a2, d=d, info=info)
