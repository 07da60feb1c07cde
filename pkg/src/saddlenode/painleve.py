"""The first Painleve equation at infinity.

P_I, z1'' = 6 z1^2 + t, is the Hamiltonian system with
H = 2 z1^3 + t z1 - z2^2/2.  In the Boutroux chart
t = x^(-4/5), z1 = (y1 + zeta) x^(-2/5), z2 = y2 x^(-3/5) with
zeta = i/sqrt(6), the field d/dt + z2 d/dz1 + (6 z1^2 + t) d/dz2 becomes
-5/(4 x^(1/5)) Y for the doubly-resonant saddle-node

    Y = x^2 d/dx + (-4/5 y2 + 2/5 x y1 + 2 zeta/5 x) d/dy1
                 + (-24/5 y1^2 - 48 zeta/5 y1 + 3/5 x y2) d/dy2,

which has residue 1 and is transversally Hamiltonian.  Fractional powers use
the principal branch of x^(1/5).
"""

from __future__ import annotations

import cmath
import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import loggamma

from .errors import BranchViolation, ValidationError
from .series import TruncatedSeries
from .straighten import full_formal_normalize
from .vectorfield import FiberedDiffeo, FiberedVectorField, divergence_defect, residue

ZETA = 1j / math.sqrt(6.0)
# y-linear part at the origin and the constant x-linear diagonal part
A0 = np.array([[0.0, -0.8], [-48 * ZETA / 5, 0.0]], dtype=complex)
B_DIAG = np.array([0.4, 0.6])


def painleve1_field(trunc_x: int = 6, trunc_y: int = 13) -> FiberedVectorField:
    """The field Y above with the given truncation bounds."""
    X1 = TruncatedSeries.from_terms({(0, 0, 1): -0.8, (1, 1, 0): 0.4, (1, 0, 0): 2 * ZETA / 5}, trunc_x, trunc_y)
    X2 = TruncatedSeries.from_terms({(0, 2, 0): -24 / 5, (0, 1, 0): -48 * ZETA / 5, (1, 0, 1): 0.6},
                                    trunc_x, trunc_y)
    return FiberedVectorField(X1, X2)


def linear_eigenvalues() -> np.ndarray:
    """Eigenvalues +-lam of the y-linear part at 0 (lam^2 = 192 zeta/25)."""
    return np.linalg.eigvals(A0)


# ----------------------------------------------------------------- Boutroux chart
def _fifth_root(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if np.any(x == 0):
        raise BranchViolation("x = 0 has no Boutroux preimage")
    return x ** 0.2


def boutroux_chart(t, z1, z2, translate: bool = True):
    """(t, z1, z2) -> (x, y1, y2) with x = t^(-5/4) on the principal branch of x^(1/5).

    The branch requires |arg t| < 4 pi/5 (so that x^(1/5) = t^(-1/4) is the
    principal fifth root); other t raise BranchViolation.
    """
    t = np.asarray(t, dtype=complex)
    if np.any(t == 0):
        raise BranchViolation("t = 0 is not in the chart")
    s = t ** -0.25  # candidate principal x^(1/5)
    if np.any(np.abs(np.angle(s)) >= math.pi / 5):
        raise BranchViolation("t lies outside |arg t| < 4 pi/5, the image of the principal branch")
    x = s ** 5
    y1 = np.asarray(z1, dtype=complex) * s ** 2
    y2 = np.asarray(z2, dtype=complex) * s ** 3
    if translate:
        y1 = y1 - ZETA
    return x, y1, y2


def inverse_chart(x, y1, y2, translate: bool = True):
    """(x, y1, y2) -> (t, z1, z2): t = x^(-4/5), z1 = (y1 + zeta) x^(-2/5), z2 = y2 x^(-3/5)."""
    s = _fifth_root(x)
    y1 = np.asarray(y1, dtype=complex)
    if translate:
        y1 = y1 + ZETA
    return s ** -4, y1 * s ** -2, np.asarray(y2, dtype=complex) * s ** -3


def hamiltonian_field(t, z1, z2):
    """d/dt + z2 d/dz1 + (6 z1^2 + t) d/dz2 as components (1, z2, 6 z1^2 + t)."""
    t = np.asarray(t, dtype=complex)
    z1 = np.asarray(z1, dtype=complex)
    return np.ones_like(t), np.asarray(z2, dtype=complex) * np.ones_like(t), 6 * z1 * z1 + t


def orbital_factor(x) -> np.ndarray:
    """-5/(4 x^(1/5)): the pushed Hamiltonian field equals this multiple of Y."""
    return -5.0 / (4.0 * _fifth_root(x))


def chart_pushforward(x, y1, y2, translate: bool = True):
    """The Hamiltonian field written in (x, y1, y2) through the chart, by the chain rule.

    With s = x^(1/5): dx/dt = -(5/4) s^9, dy1/dt = s^2 dz1/dt + (2/5) z1 s^-3 dx/dt,
    dy2/dt = s^3 dz2/dt + (3/5) z2 s^-2 dx/dt.
    """
    s = _fifth_root(x)
    t, z1, z2 = inverse_chart(x, y1, y2, translate)
    _, dz1, dz2 = hamiltonian_field(t, z1, z2)
    dx = -1.25 * s ** 9
    dy1 = s ** 2 * dz1 + 0.4 * z1 * s ** -3 * dx
    dy2 = s ** 3 * dz2 + 0.6 * z2 * s ** -2 * dx
    return dx, dy1, dy2


# ----------------------------------------------------------------- symplecticity
def check_symplectic(Phi, mode: str = "formal", points: Sequence | None = None, step: float = 1e-6):
    """Transversal symplecticity defect det(D_y Phi) - 1.

    ``formal``: Phi is a FiberedDiffeo (or a normalizing map with a
    ``det_defect`` method); returns the truncated series det - 1.
    ``numeric``: Phi is a callable (x, y1, y2) -> (x, y1', y2'); returns the
    largest |det - 1| at ``points`` from centered differences.
    """
    if mode == "formal":
        if hasattr(Phi, "det_defect"):
            return Phi.det_defect()
        if isinstance(Phi, FiberedDiffeo):
            return Phi.jacobian_det() - 1.0
        raise ValidationError("formal mode needs a FiberedDiffeo")
    if mode != "numeric":
        raise ValidationError(f"unknown mode {mode!r}")
    if points is None:
        raise ValidationError("numeric mode needs sample points")
    worst = 0.0
    for p in points:
        x, y1, y2 = (complex(c) for c in p)
        J = np.empty((2, 2), dtype=complex)
        for col, (d1, d2) in enumerate(((step, 0), (0, step))):
            fp = np.asarray(Phi(x, y1 + d1, y2 + d2), dtype=complex)
            fm = np.asarray(Phi(x, y1 - d1, y2 - d2), dtype=complex)
            J[:, col] = (fp[1:] - fm[1:]) / (2 * step)
        worst = max(worst, abs(np.linalg.det(J) - 1))
    return worst


# ----------------------------------------------------------------- pipeline
def painleve1_pipeline(trunc_x: int = 4, trunc_y: int = 13, tol: float = 1e-9) -> dict:
    """Formal normalization of Y with its residue, c-coefficients and symplecticity defect."""
    Y = painleve1_field(trunc_x + 2, trunc_y)
    res = full_formal_normalize(Y, trunc_x, trunc_y, tol)
    p = res.params
    det = res.map.det_defect()
    return {
        "residue": residue(Y),
        "residue_formal": complex(p.a1 + p.a2),
        "divergence_defect": divergence_defect(Y).max_abs(),
        "lam": complex(p.lam),
        "a1": complex(p.a1),
        "a2": complex(p.a2),
        "c": np.asarray(p.c.coeffs, dtype=complex),
        "c_sum_residual": np.asarray(p.c_sum_residual, dtype=complex),
        "det_defect": det.max_abs(),
        "result": res,
    }


# ----------------------------------------------------------------- Kapaev constant
def kapaev_target() -> complex:
    """e^(i pi/8) 2^(3/8) 3^(1/8) / sqrt(pi), the printed value of Psi_{2,+,0}(0)."""
    return cmath.exp(1j * math.pi / 8) * 2 ** (3 / 8) * 3 ** (1 / 8) / math.sqrt(math.pi)


def compare_kapaev(estimate_2: complex, estimate_1: complex | None = None) -> dict:
    """Deviation of an estimate of Psi_{2,+,0}(0) from the target.

    When an estimate of Psi_{1,-,0}(0) is supplied as well, the relation
    Psi_{2,+,0}(0) = i Psi_{1,-,0}(0) is checked and the scale-free product
    Psi_{2,+,0}(0) Psi_{1,-,0}(0) is compared with -i T^2.
    """
    T = kapaev_target()
    out = {"target": T, "estimate": complex(estimate_2), "abs_dev": abs(estimate_2 - T),
           "rel_dev": abs(estimate_2 - T) / abs(T)}
    if estimate_1 is not None:
        out["i_relation_defect"] = abs(estimate_2 - 1j * estimate_1)
        prod = complex(estimate_2 * estimate_1)
        out["product"] = prod
        out["product_target"] = -1j * T * T
        out["product_rel_dev"] = abs(prod + 1j * T * T) / abs(T * T)
    return out


def center_manifold_coefficients(order: int) -> np.ndarray:
    """Coefficients g_k (k <= order) of the formal center manifold y = g(x) of Y.

    x^2 g' = X(x, g) gives g_k = A0^-1 ((k - 1) g_{k-1} - B g_{k-1} - Q_k - e_k),
    with Q_k the quadratic term and e_1 the constant x-term of X1.
    """
    Ai = np.linalg.inv(A0)
    g = np.zeros((order + 1, 2), dtype=complex)
    for k in range(1, order + 1):
        r = (k - 1) * g[k - 1] - B_DIAG * g[k - 1]
        if k == 1:
            r[0] -= 2 * ZETA / 5
        q = np.dot(g[1:k, 0], g[k - 1:0:-1, 0])
        r[1] += 24 / 5 * q
        g[k] = Ai @ r
    return g


def _large_order_fit(g, ks, mu, beta, mu2, beta2, m):
    """Least-squares fit g_k = sum_j K_j G(k - beta - j) mu^-(k - beta - j) + same at (mu2, beta2)."""
    cols = [np.exp(loggamma(ks - beta - j) - (ks - beta - j) * np.log(mu)) for j in range(m)]
    cols += [np.exp(loggamma(ks - beta2 - j) - (ks - beta2 - j) * np.log(mu2)) for j in range(m)]
    M = np.array(cols).T
    s = np.abs(M).max(axis=1)
    out = np.zeros((2, 2 * m), dtype=complex)
    for c in range(2):
        out[c], *_ = np.linalg.lstsq(M / s[:, None], g[ks, c] / s, rcond=None)
    return out


def kapaev_experimental(order: int = 150, window: int = 60, n_terms: int = 8) -> dict:
    """Experimental estimate of the invariant Psi_{2,+,0}(0) Psi_{1,-,0}(0) of P_I.

    The formal center manifold g has Borel singularities at +-lam; its
    large-order behaviour g_k ~ K+ G(k - a2) lam^-(k - a2) + K- G(k - a1) (-lam)^-(k - a1)
    gives the exponentially small jumps -2 pi i K+ e^(-lam/x) x^a2 across
    arg(lam) and 2 pi i K- e^(lam/x) x^a1 across arg(-lam) of the two
    sectorial center manifolds.  Mapped by the unit-Jacobian linear part of
    the normalizing map, they are the leaf coordinates h2 and h1 of the
    image of the center manifold, so

        Psi_{2,+,0}(0) Psi_{1,-,0}(0) = 4 pi^2 det(K-, K+)

    independently of the remaining scaling freedom (y1, y2) -> (s y1, y2/s).
    The fit is repeated on two windows to estimate its error.
    """
    pipe = painleve1_pipeline(4, 4)
    lam, a1, a2 = pipe["lam"], pipe["a1"], pipe["a2"]
    g = center_manifold_coefficients(order)
    results = []
    for lo in (order - window, order - window // 2 - 10):
        ks = np.arange(lo, order + 1)
        F = _large_order_fit(g, ks, lam, a2, -lam, a1, n_terms)
        Kp, Km = F[:, 0], F[:, n_terms]
        results.append(4 * math.pi ** 2 * (Km[0] * Kp[1] - Km[1] * Kp[0]))
    prod = complex(results[0])
    T = kapaev_target()
    return {
        "lam": lam,
        "a1": a1,
        "a2": a2,
        "product": prod,
        "product_fit_spread": abs(results[0] - results[1]),
        "product_target": -1j * T * T,
        "product_rel_dev": abs(prod + 1j * T * T) / abs(T * T),
        "target": T,
    }


def kapaev_jump_check(x_abs: float = 0.2, order: int = 150, n_coeffs: int = 61, window: int = 60,
                      n_terms: int = 8, tilt: float = 0.3) -> dict:
    """Compare the large-order jump prediction with a direct Borel-Laplace difference.

    The y2-component of g is Borel summed along arg(lam) -+ tilt at
    x = x_abs e^(i arg lam); the difference of the two sums must match
    -2 pi i sum_j K_j e^(-lam/x) x^(a2 + j).
    """
    from .borel import borel, laplace_sum
    from .series import UniSeries

    pipe = painleve1_pipeline(4, 4)
    lam, a1, a2 = pipe["lam"], pipe["a1"], pipe["a2"]
    g = center_manifold_coefficients(order)
    ks = np.arange(order - window, order + 1)
    F = _large_order_fit(g, ks, lam, a2, -lam, a1, n_terms)
    th = cmath.phase(lam)
    x = x_abs * cmath.exp(1j * th)
    G = borel(UniSeries(g[:n_coeffs, 1]), "bis")
    lo, _ = laplace_sum(G, th - tilt, x, "bis")
    hi, _ = laplace_sum(G, th + tilt, x, "bis")
    logx = math.log(x_abs) + 1j * th
    pred = -2j * math.pi * sum(F[1, j] * cmath.exp(-lam / x + (a2 + j) * logx) for j in range(n_terms))
    jump = lo - hi
    return {"x": x, "jump": jump, "predicted": pred, "rel_dev": abs(jump - pred) / abs(pred)}
