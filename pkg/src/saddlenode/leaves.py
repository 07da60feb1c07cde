"""First integrals, leaf coordinates and Stokes coefficients of a normal form.

On a narrow sector bisected by arg(lam) (orientation +1) or arg(-lam)
(orientation -1) the normal form

    Y_norm = x^2 d/dx + (-lam + a1 x - c(v)) y1 d/dy1 + (lam + a2 x + c(v)) y2 d/dy2

has the first integrals w = y1 y2 / x^a and

    h1 = y1 exp(-lam/x + c_m v^m log(x)/x + c~(v)/x) x^(-a1),
    h2 = y2 exp( lam/x - c_m v^m log(x)/x - c~(v)/x) x^(-a2),

with a = a1 + a2, m = 1/a, c_m the coefficient of v^m in c (zero unless m
is a positive integer) and c~(v) = m sum_{k != m} c_k v^k / (k - m).

A sectorial isotropy acts on the leaf coordinates by an x-independent map
Psi = (Psi1, Psi2).  On the + sector Psi_j(h1, h2) = sum_n Psi_{j,n}(h1 h2) h1^n
(in h2^n on the - sector); the coefficient functions are recovered by
trapezoidal quadrature on circles |h1| = rho at fixed (x, w).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (BranchViolation, ContourResolutionInsufficient, HypersurfaceNotAnalytic, OutOfDomain,
                     ValidationError)
from .series import UniSeries

# lowest index n with a nonzero coefficient: N(j, sign)
N_INDEX = {(1, 1): 1, (2, -1): 1, (1, -1): -1, (2, 1): -1}


def _orient(orientation) -> int:
    if orientation in (1, "+", "plus"):
        return 1
    if orientation in (-1, "-", "minus"):
        return -1
    raise ValidationError(f"orientation must be +1 or -1, got {orientation!r}")


@dataclass(frozen=True)
class LeafChart:
    """Leaf coordinates on the narrow sector bisected by arg(orientation * lam).

    The logarithm is the principal branch rotated to the sector bisector; a
    point whose argument differs from the bisector by ``half_opening`` or
    more raises BranchViolation.
    """

    lam: complex
    a1: complex
    a2: complex
    c: tuple = (0.0,)
    orientation: int = 1
    half_opening: float = math.pi

    def __post_init__(self):
        object.__setattr__(self, "orientation", _orient(self.orientation))
        coeffs = np.asarray(self.c, dtype=complex).ravel()
        if coeffs.size and abs(coeffs[0]) > 0:
            raise ValidationError("c must vanish at v = 0")
        object.__setattr__(self, "c", tuple(complex(z) for z in coeffs))
        if self.lam == 0:
            raise ValidationError("lam must be nonzero")
        if not 0 < self.half_opening <= math.pi:
            raise ValidationError("half_opening must lie in (0, pi]")

    @classmethod
    def from_params(cls, params, orientation=1, half_opening: float = math.pi) -> "LeafChart":
        """Chart of a NormalFormParams (lam, a1, a2, c)."""
        c = params.c.coeffs if isinstance(params.c, UniSeries) else params.c
        return cls(complex(params.lam), complex(params.a1), complex(params.a2), tuple(np.asarray(c).tolist()),
                   orientation, half_opening)

    @property
    def a(self) -> complex:
        return self.a1 + self.a2

    @property
    def m(self) -> complex:
        return 1.0 / self.a

    @property
    def m_integer(self) -> int | None:
        """m = 1/a when it is a positive integer (within 1e-10), else None."""
        m = self.m
        r = round(m.real)
        if abs(m - r) < 1e-10 and r >= 1:
            return int(r)
        return None

    @property
    def c_m(self) -> complex:
        k = self.m_integer
        if k is None or k >= len(self.c):
            return 0j
        return self.c[k]

    @property
    def c_tilde(self) -> UniSeries:
        m, mi = self.m, self.m_integer
        out = np.zeros(len(self.c), dtype=complex)
        for k in range(1, len(self.c)):
            if k != mi:
                out[k] = m * self.c[k] / (k - m)
        return UniSeries(out)

    @property
    def bisector(self) -> complex:
        """Unit vector along the sector bisector."""
        u = self.orientation * self.lam
        return u / abs(u)

    @property
    def v_radius(self) -> float:
        """Root-test estimate of the convergence radius of c (inf for short polynomials)."""
        c = np.abs(np.asarray(self.c))
        ks = [k for k in range(1, len(c)) if c[k] > 0]
        if len(ks) < 3:
            return math.inf
        tail = ks[len(ks) // 2:]
        return float(min(c[k] ** (-1.0 / k) for k in tail))

    # -- elementary functions on the chart's branch
    def log(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if np.any(x == 0):
            raise BranchViolation("x = 0 is not in the sector")
        u = self.bisector
        rel = np.angle(x / u)
        if np.any(np.abs(rel) >= self.half_opening - 1e-14):
            raise BranchViolation("x lies outside the sector of the chosen log branch")
        return np.log(np.abs(x)) + 1j * (rel + cmath.phase(u))

    def power(self, x, s) -> np.ndarray:
        return np.exp(s * self.log(x))

    def _ctilde(self, v) -> np.ndarray:
        ct = self.c_tilde.coeffs
        return np.polynomial.polynomial.polyval(v, ct) if len(ct) else np.zeros_like(v)

    def exponent(self, x, v) -> np.ndarray:
        """E(x, v) = -lam/x + c_m v^m log(x)/x + c~(v)/x, so that h1 = y1 e^E x^(-a1)."""
        x = np.asarray(x, dtype=complex)
        v = np.asarray(v, dtype=complex)
        E = -self.lam / x + self._ctilde(v) / x
        mi = self.m_integer
        if mi is not None and self.c_m != 0:
            E = E + self.c_m * v ** mi * self.log(x) / x
        return E

    def f1(self, x, w) -> np.ndarray:
        """y1 = h1 f1(x, w) on the leaf with h1 h2 = w."""
        x = np.asarray(x, dtype=complex)
        return np.exp(-self.exponent(x, np.asarray(w) * self.power(x, self.a))) * self.power(x, self.a1)

    def f2(self, x, w) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        return np.exp(self.exponent(x, np.asarray(w) * self.power(x, self.a))) * self.power(x, self.a2)


def leaf_coordinates(chart: LeafChart, x, y1, y2):
    """(h1, h2, w) of the points (x, y1, y2)."""
    x = np.asarray(x, dtype=complex)
    y1 = np.asarray(y1, dtype=complex)
    y2 = np.asarray(y2, dtype=complex)
    v = y1 * y2
    if np.any(np.abs(v) >= chart.v_radius):
        raise OutOfDomain("|y1 y2| exceeds the convergence radius of c")
    E = chart.exponent(x, v)
    h1 = y1 * np.exp(E) * chart.power(x, -chart.a1)
    h2 = y2 * np.exp(-E) * chart.power(x, -chart.a2)
    w = v * chart.power(x, -chart.a)
    return h1, h2, w


def leaf_inverse(chart: LeafChart, x, h1, h2):
    """(y1, y2) on the leaf (h1, h2) over x."""
    x = np.asarray(x, dtype=complex)
    h1 = np.asarray(h1, dtype=complex)
    h2 = np.asarray(h2, dtype=complex)
    v = h1 * h2 * chart.power(x, chart.a)
    if np.any(np.abs(v) >= chart.v_radius):
        raise OutOfDomain("the leaf leaves the convergence domain of c over this x")
    E = chart.exponent(x, v)
    return h1 * np.exp(-E) * chart.power(x, chart.a1), h2 * np.exp(E) * chart.power(x, chart.a2)


# ----------------------------------------------------------------- isotropies in leaf space
def isotropy_from_leaf_map(chart: LeafChart, Psi: Callable) -> Callable:
    """The sectorial isotropy psi = H^-1 o Psi o H of Y_norm for a leaf-space map Psi(h1, h2)."""

    def psi(x, y1, y2):
        h1, h2, _ = leaf_coordinates(chart, x, y1, y2)
        g1, g2 = Psi(h1, h2)
        z1, z2 = leaf_inverse(chart, x, g1, g2)
        return x, z1, z2

    return psi


def epsilon_leaf_map(eps: complex, orientation=1) -> Callable:
    """Area-preserving leaf map with known coefficients.

    Orientation +1: (h1 + eps h1^2, h2 / (1 + 2 eps h1)), whose Jacobian
    determinant is 1; Psi_{1,2} = eps and Psi_{2,n}(w) = w (-2 eps)^(n+1).
    Orientation -1 exchanges the roles of h1 and h2.
    """
    sign = _orient(orientation)

    def Psi(h1, h2):
        if sign == 1:
            return h1 + eps * h1 * h1, h2 / (1 + 2 * eps * h1)
        return h1 / (1 + 2 * eps * h2), h2 + eps * h2 * h2

    return Psi


def epsilon_ground_truth(eps: complex, orientation, j: int, n: int, w):
    """Exact coefficient Psi_{j,n}(w) of :func:`epsilon_leaf_map`."""
    sign = _orient(orientation)
    w = np.asarray(w, dtype=complex)
    k = j if sign == 1 else 3 - j  # k = 1: the expanded variable's own component
    if k == 1:
        return np.where(n == 1, 1.0 + 0j, np.where(n == 2, eps + 0j, 0j)) * np.ones_like(w)
    if n < -1:
        return np.zeros_like(w)
    return w * (-2 * eps) ** (n + 1)


def leaf_jacobian_det(Psi: Callable, h1: complex, h2: complex, step: float = 1e-6) -> complex:
    """det D Psi at (h1, h2) by centered complex differences."""
    J = np.empty((2, 2), dtype=complex)
    for col, (d1, d2) in enumerate(((step, 0), (0, step))):
        p = np.asarray(Psi(h1 + d1, h2 + d2), dtype=complex)
        m = np.asarray(Psi(h1 - d1, h2 - d2), dtype=complex)
        J[:, col] = (p - m) / (2 * step)
    return complex(np.linalg.det(J))


# ----------------------------------------------------------------- Stokes coefficients
@dataclass
class StokesData:
    """Coefficient functions Psi_{j,sign,n}(w) sampled on a w-grid.

    ``coeffs[(j, sign)]`` has shape (len(n_values), len(w_grid)); j is 1, 2
    or "w" (the product Psi1 Psi2).  ``x_values`` are the points over which
    the contours were taken and ``radii[(sign, x)]`` the contour radii per w.
    """

    w_grid: np.ndarray
    n_values: np.ndarray
    coeffs: dict = field(default_factory=dict)
    x_values: dict = field(default_factory=dict)
    radii: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    x_spread: dict = field(default_factory=dict)
    n_max: int = 0

    def signs(self) -> list[int]:
        return sorted({s for (_, s) in self.coeffs})

    def coeff(self, j, sign, n: int) -> np.ndarray:
        sign = _orient(sign)
        key = (j, sign)
        if key not in self.coeffs:
            raise ValidationError(f"no data for the {'+' if sign == 1 else '-'} sector")
        idx = np.nonzero(self.n_values == n)[0]
        if not idx.size:
            raise ValidationError(f"index n = {n} was not computed")
        return self.coeffs[key][idx[0]]

    def at_zero(self, j, sign, n: int) -> complex:
        k = np.nonzero(np.abs(self.w_grid) == 0)[0]
        if not k.size:
            raise ValidationError("the w-grid does not contain w = 0")
        return complex(self.coeff(j, sign, n)[k[0]])

    def merge(self, other: "StokesData") -> "StokesData":
        if not (np.array_equal(self.w_grid, other.w_grid) and np.array_equal(self.n_values, other.n_values)):
            raise ValidationError("Stokes data on different grids cannot be merged")
        out = StokesData(self.w_grid, self.n_values, dict(self.coeffs), dict(self.x_values), dict(self.radii),
                         dict(self.samples), dict(self.x_spread), max(self.n_max, other.n_max))
        out.coeffs.update(other.coeffs)
        out.x_values.update(other.x_values)
        out.radii.update(other.radii)
        out.samples.update(other.samples)
        out.x_spread.update(other.x_spread)
        return out

    def normalization_defect(self) -> float:
        """Largest deviation from Psi_{j,N(j)} = 1 or w and Psi_{w,0}(w) = w."""
        worst = 0.0
        w = self.w_grid
        for s in self.signs():
            j_own = 1 if s == 1 else 2
            worst = max(worst, float(np.abs(self.coeff(j_own, s, 1) - 1).max()))
            worst = max(worst, float(np.abs(self.coeff(3 - j_own, s, -1) - w).max()))
            worst = max(worst, float(np.abs(self.coeff("w", s, 0) - w).max()))
        return worst

    def index_range_defect(self) -> float:
        """Largest coefficient below the admissible index range (should vanish)."""
        worst = 0.0
        for (j, s), C in self.coeffs.items():
            lo = 0 if j == "w" else N_INDEX[(j, s)]
            mask = self.n_values < lo
            if mask.any():
                worst = max(worst, float(np.abs(C[mask]).max()))
        return worst

    def off_normalization_max(self) -> float:
        """Largest coefficient other than the normalization entries."""
        worst = 0.0
        for (j, s), C in self.coeffs.items():
            if j == "w":
                continue
            j_own = 1 if s == 1 else 2
            for i, n in enumerate(self.n_values):
                if (j == j_own and n == 1) or (j != j_own and n == -1):
                    continue
                worst = max(worst, float(np.abs(C[i]).max()))
        return worst

    def to_dict(self) -> dict:
        def enc(z):
            return [[float(np.real(c)), float(np.imag(c))] for c in np.ravel(z)]

        return {
            "w_grid": enc(self.w_grid),
            "n_values": [int(n) for n in self.n_values],
            "n_max": int(self.n_max),
            "coefficients": {f"{j},{'+' if s == 1 else '-'}": [enc(row) for row in C]
                             for (j, s), C in sorted(self.coeffs.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))},
            "x_values": {("+" if s == 1 else "-"): enc(xs) for s, xs in sorted(self.x_values.items())},
            "contour_samples": {("+" if s == 1 else "-"): int(k) for s, k in sorted(self.samples.items())},
            "x_spread": {("+" if s == 1 else "-"): float(v) for s, v in sorted(self.x_spread.items())},
        }


def default_x_values(chart: LeafChart, scale: float = 0.5) -> list[complex]:
    """Two points on the bisector where |f1| (resp. |f2|) is of moderate size."""
    return [scale * chart.bisector * abs(chart.lam), 1.4 * scale * chart.bisector * abs(chart.lam)]


def _contour_coefficients(chart, Phi_iso, x, w, rho, K, sign, n_values):
    """Fourier coefficients of (Psi1, Psi2, Psi1 Psi2) on |h_own| = rho at fixed (x, w)."""
    th = 2 * math.pi * np.arange(K) / K
    h = rho * np.exp(1j * th)
    if sign == 1:
        h1, h2 = h, w / h
    else:
        h1, h2 = w / h, h
    y1, y2 = leaf_inverse(chart, x, h1, h2)
    _, z1, z2 = Phi_iso(np.full(K, x), y1, y2)
    g1, g2, _ = leaf_coordinates(chart, np.full(K, x), z1, z2)
    out = []
    for g in (g1, g2, g1 * g2):
        F = np.fft.fft(g) / K  # F[n] = coefficient of e^{i n th}
        out.append(np.array([F[n % K] / rho ** n for n in n_values]))
    return np.array(out)


def stokes_coefficients(Phi_iso: Callable, chart: LeafChart, n_max: int, w_grid: Sequence[complex],
                        x_values: Sequence[complex] | None = None, r_tilde: float = 0.3, delta: float = 0.1,
                        n_neg: int = 3, K0: int = 64, K_max: int = 4096, quad_tol: float = 1e-12) -> StokesData:
    """Stokes coefficients Psi_{j,n}(w), -n_neg <= n <= n_max, of a sectorial isotropy.

    For each x in ``x_values`` and each w the contour radius is
    rho = (r_tilde + delta)/|f1(x, w)| (|f2| on the - sector).  The number
    of contour samples doubles until two successive results agree to
    ``quad_tol`` (relative to the size of the map on the contour).  The
    coefficients at the first x are reported; the spread between the x
    values is recorded in ``x_spread`` (the exact values do not depend on x).
    """
    sign = chart.orientation
    w_grid = np.asarray(w_grid, dtype=complex)
    if n_max < 2:
        raise ValidationError("n_max must be >= 2")
    if x_values is None:
        x_values = default_x_values(chart)
    n_values = np.arange(-n_neg, n_max + 1)
    per_x = []
    radii = []
    K_used = K0
    for x in x_values:
        f_own = chart.f1 if sign == 1 else chart.f2
        rhos = (r_tilde + delta) / np.abs(f_own(x, w_grid))
        radii.append(rhos)
        cols = []
        for w, rho in zip(w_grid, rhos):
            K = K0
            prev = _contour_coefficients(chart, Phi_iso, x, w, rho, K, sign, n_values)
            while True:
                K *= 2
                if K > K_max:
                    raise ContourResolutionInsufficient(
                        f"contour quadrature did not converge with {K_max} samples at x = {x}, w = {w}")
                cur = _contour_coefficients(chart, Phi_iso, x, w, rho, K, sign, n_values)
                scale = np.abs(prev * rho ** n_values[None, :]).max() + 1e-300
                if np.abs((cur - prev) * rho ** n_values[None, :]).max() <= quad_tol * scale:
                    break
                prev = cur
            K_used = max(K_used, K)
            cols.append(cur)
        per_x.append(np.stack(cols, axis=-1))  # (3, n, w)
    data = StokesData(w_grid, n_values, n_max=n_max)
    first = per_x[0]
    for idx, j in enumerate((1, 2, "w")):
        data.coeffs[(j, sign)] = first[idx]
    data.x_values[sign] = np.asarray(x_values, dtype=complex)
    data.radii[sign] = np.array(radii)
    data.samples[sign] = K_used
    spread = 0.0
    for other in per_x[1:]:
        d = np.abs(other[:2] - first[:2])
        spread = max(spread, float(d.max()))
    data.x_spread[sign] = spread
    return data


# ----------------------------------------------------------------- growth bounds
def _family(j, sign):
    """(f index, bound kind) of the family E_{j, sign}: kind 'flat' uses |f|^(n-1), 'wide' uses |f|^(n+1)/|x^a|."""
    own = 1 if sign == 1 else 2
    return own, ("flat" if j == own else "wide")


def growth_bound_check(data: StokesData, chart_plus: LeafChart, r_tilde: float, delta: float,
                       chart_minus: LeafChart | None = None, r_prime: float = 1.0,
                       x_samples: Sequence[complex] | None = None, slack: float = 1.05) -> dict:
    """Check the geometric growth bounds of the four coefficient families.

    E_{1,+}: |Psi_n(w)| < C r' |f1|^(n-1)/(r~+delta)^n for n >= 2,
    E_{2,+}: |Psi_n(w)| < C r' |f1|^(n+1)/(|x^a| (r~+delta)^n) for n >= 0,
    and symmetrically with f2 on the - sector.  For each family C is fitted
    at its lowest index over all samples; the other indices must then obey
    the bound with that C (times ``slack``).  Samples are (x, w) with x on
    the sector bisector and edges, |x| up to the contour points, and
    |w x^a| <= r~^2.
    """
    report = {"families": {}, "violations": []}
    charts = {1: chart_plus, -1: chart_minus if chart_minus is not None else
              LeafChart(chart_plus.lam, chart_plus.a1, chart_plus.a2, chart_plus.c, -1, chart_plus.half_opening)}
    for sign in data.signs():
        chart = charts[sign]
        xs_ref = np.abs(data.x_values[sign]).max()
        if x_samples is None:
            rad = np.geomspace(xs_ref / 3, xs_ref, 5)
            ang = np.linspace(-math.pi / 4, math.pi / 4, 5)
            xs = (rad[:, None] * np.exp(1j * ang[None, :])).ravel() * chart.bisector
        else:
            xs = np.asarray(x_samples, dtype=complex)
        for j in (1, 2):
            f_idx, kind = _family(j, sign)
            lo = 2 if kind == "flat" else 0
            ns = [n for n in data.n_values if n >= lo]
            ratios = {}
            for n in ns:
                vals = np.abs(data.coeff(j, sign, n))
                rs = []
                for x in xs:
                    f = (chart.f1 if f_idx == 1 else chart.f2)(x, data.w_grid)
                    xa = np.abs(chart.power(x, chart.a))
                    ok = np.abs(data.w_grid) * xa <= r_tilde ** 2 * (1 + 1e-12)
                    if kind == "flat":
                        B = r_prime * np.abs(f) ** (n - 1) / (r_tilde + delta) ** n
                    else:
                        B = r_prime * np.abs(f) ** (n + 1) / (xa * (r_tilde + delta) ** n)
                    rs.append(np.where(ok, vals / B, 0.0))
                ratios[n] = np.array(rs)
            C = float(ratios[ns[0]].max())
            fam = f"E_{j},{'+' if sign == 1 else '-'}"
            bad = []
            for n in ns[1:]:
                worst = float(ratios[n].max())
                if worst > slack * C + 1e-300 and worst > 1e-14:
                    bad.append({"n": int(n), "ratio": worst})
            report["families"][fam] = {"C": C, "max_ratio": max(float(r.max()) for r in ratios.values())}
            report["violations"].extend({"family": fam, **b} for b in bad)
    report["ok"] = not report["violations"]
    return report


# ----------------------------------------------------------------- invariant varieties
def invariant_variety_test(data: StokesData, tol: float = 1e-6) -> dict:
    """Convergence of the center variety and of the hypersurfaces H1, H2 from w = 0 values.

    center: Psi_{2,+,0}(0) = Psi_{1,-,0}(0) = 0; H1: Psi_{1,-,n}(0) = 0 for
    0 <= n <= n_max; H2: Psi_{2,+,n}(0) = 0 for 0 <= n <= n_max.
    """
    ns = [n for n in data.n_values if 0 <= n <= data.n_max]
    center = abs(data.at_zero(2, 1, 0)) < tol and abs(data.at_zero(1, -1, 0)) < tol
    H1 = all(abs(data.at_zero(1, -1, n)) < tol for n in ns)
    H2 = all(abs(data.at_zero(2, 1, n)) < tol for n in ns)
    return {"center": bool(center), "H1": bool(H1), "H2": bool(H2)}


def martinet_ramis_restriction(data: StokesData, tol: float = 1e-6) -> dict:
    """Invariants of the restriction to H1: h2 + Psi_{2,+,0}(0) and h2 + sum_{n>=2} Psi_{2,-,n}(0) h2^n."""
    if not invariant_variety_test(data, tol)["H1"]:
        raise HypersurfaceNotAnalytic("the hypersurface H1 is not analytic (some Psi_{1,-,n}(0) != 0)")
    shift = data.at_zero(2, 1, 0)
    diffeo = [data.at_zero(2, -1, n) for n in data.n_values if 2 <= n <= data.n_max]
    return {"affine": (1.0 + 0j, shift), "diffeo": diffeo}
