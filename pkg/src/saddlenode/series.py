"""Truncated power series in (x, y1, y2) and in a single variable.

A :class:`TruncatedSeries` keeps every monomial x^k0 y1^k1 y2^k2 with
k0 <= trunc_x and k1 + k2 <= trunc_y.  Coefficients live in a dense complex
array of shape ``(trunc_x + 1, n_monomials(trunc_y))``; the y-monomials are
ordered by total degree, so truncating in y is a slice.  Within total degree
d the monomial y1^k1 y2^k2 sits at offset k2, i.e. at column
``d*(d+1)//2 + k2``.
"""

from __future__ import annotations

import contextvars
import json
import math
from contextlib import contextmanager
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NonzeroConstantTerm, ValidationError

FORMAT_VERSION = "1.0"

_DTYPES = {"double": np.complex128, "extended": np.clongdouble}
_precision = contextvars.ContextVar("saddlenode_precision", default="double")


def cdtype():
    """Complex coefficient type selected by :func:`precision` (complex128 by default)."""
    return _DTYPES[_precision.get()]


def cscalar(z):
    """z as a scalar of the current coefficient type."""
    return cdtype()(z)


@contextmanager
def precision(name: str):
    """Run a block with "double" (complex128) or "extended" (long double) coefficients.

    The setting is a context variable, so concurrent threads and tasks keep
    their own choice.
    """
    if name not in _DTYPES:
        raise ValidationError(f"unknown precision {name!r}; expected one of {sorted(_DTYPES)}")
    token = _precision.set(name)
    try:
        yield
    finally:
        _precision.reset(token)


def det2(M) -> complex:
    return M[0][0] * M[1][1] - M[0][1] * M[1][0]


def inv2(M) -> np.ndarray:
    """Inverse of a 2x2 matrix (works for every numpy complex type)."""
    M = np.asarray(M)
    d = det2(M)
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]]) / d


def n_monomials(trunc_y: int) -> int:
    return (trunc_y + 1) * (trunc_y + 2) // 2


def mono_index(k1: int, k2: int) -> int:
    d = k1 + k2
    return d * (d + 1) // 2 + k2


@lru_cache(maxsize=None)
def monomial_exponents(trunc_y: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays (K1, K2) of the y-exponents of each column."""
    k1s, k2s = [], []
    for d in range(trunc_y + 1):
        for k2 in range(d + 1):
            k1s.append(d - k2)
            k2s.append(k2)
    k1 = np.array(k1s, dtype=int)
    k2 = np.array(k2s, dtype=int)
    k1.setflags(write=False)
    k2.setflags(write=False)
    return k1, k2


@lru_cache(maxsize=None)
def _product_table(trunc_y: int, low_a: int = 0, low_b: int = 0):
    """Pairs of columns whose product survives truncation, grouped by target.

    Only columns of degree >= low_a (first factor) and >= low_b (second
    factor) take part.  Returns (ii, jj, targets, starts): the products
    A[:, ii] * B[:, jj] summed over each run starting at ``starts`` land in
    the columns ``targets``.
    """
    K1, K2 = monomial_exponents(trunc_y)
    deg = K1 + K2
    ok = (deg[:, None] + deg[None, :] <= trunc_y) & (deg[:, None] >= low_a) & (deg[None, :] >= low_b)
    ii, jj = np.nonzero(ok)
    kk = np.array([mono_index(a, b) for a, b in zip(K1[ii] + K1[jj], K2[ii] + K2[jj])], dtype=int)
    order = np.argsort(kk, kind="stable")
    ii, jj, kk = ii[order], jj[order], kk[order]
    targets, starts = np.unique(kk, return_index=True)
    return ii, jj, targets, starts


@lru_cache(maxsize=None)
def _column_degrees(trunc_y: int) -> np.ndarray:
    K1, K2 = monomial_exponents(trunc_y)
    return K1 + K2


def _low_orders(C: np.ndarray, trunc_y: int) -> tuple[int, int]:
    """(lowest x-row, lowest y-degree) carrying a nonzero coefficient."""
    nz = C != 0
    rows = np.flatnonzero(nz.any(axis=1))
    cols = np.flatnonzero(nz.any(axis=0))
    if rows.size == 0:
        return -1, -1
    return int(rows[0]), int(_column_degrees(trunc_y)[cols].min())


@lru_cache(maxsize=None)
def _shift_table(trunc_y: int, d1: int, d2: int):
    """Source/target columns for multiplication by y1^d1 y2^d2 (d may be negative)."""
    K1, K2 = monomial_exponents(trunc_y)
    t1, t2 = K1 + d1, K2 + d2
    ok = (t1 >= 0) & (t2 >= 0) & (t1 + t2 <= trunc_y)
    src = np.nonzero(ok)[0]
    dst = np.array([mono_index(a, b) for a, b in zip(t1[ok], t2[ok])], dtype=int)
    return src, dst


class TruncatedSeries:
    """Formal power series in (x, y1, y2) truncated at (trunc_x, total y-degree trunc_y)."""

    __slots__ = ("coeffs", "trunc_x", "trunc_y")

    def __init__(self, coeffs: np.ndarray, trunc_x: int, trunc_y: int):
        coeffs = np.asarray(coeffs, dtype=cdtype())
        if coeffs.shape != (trunc_x + 1, n_monomials(trunc_y)):
            raise ValueError(f"coefficient array has shape {coeffs.shape}, expected "
                             f"{(trunc_x + 1, n_monomials(trunc_y))}")
        self.coeffs = coeffs
        self.trunc_x = int(trunc_x)
        self.trunc_y = int(trunc_y)

    # ----------------------------------------------------------- constructors
    @classmethod
    def zeros(cls, trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        return cls(np.zeros((trunc_x + 1, n_monomials(trunc_y)), dtype=cdtype()), trunc_x, trunc_y)

    @classmethod
    def constant(cls, value: complex, trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        s = cls.zeros(trunc_x, trunc_y)
        s.coeffs[0, 0] = value
        return s

    @classmethod
    def monomial(cls, k0: int, k1: int, k2: int, trunc_x: int, trunc_y: int,
                 coeff: complex = 1.0) -> "TruncatedSeries":
        s = cls.zeros(trunc_x, trunc_y)
        if k0 <= trunc_x and k1 + k2 <= trunc_y:
            s.coeffs[k0, mono_index(k1, k2)] = coeff
        return s

    @classmethod
    def x(cls, trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        return cls.monomial(1, 0, 0, trunc_x, trunc_y)

    @classmethod
    def y1(cls, trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        return cls.monomial(0, 1, 0, trunc_x, trunc_y)

    @classmethod
    def y2(cls, trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        return cls.monomial(0, 0, 1, trunc_x, trunc_y)

    @classmethod
    def from_terms(cls, terms: Mapping[tuple[int, int, int], complex] | Iterable,
                   trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        """Build from ``{(k0, k1, k2): coeff}``; out-of-range terms are dropped."""
        s = cls.zeros(trunc_x, trunc_y)
        items = terms.items() if isinstance(terms, Mapping) else terms
        for (k0, k1, k2), c in items:
            if min(k0, k1, k2) < 0:
                raise ValidationError(f"negative exponent {(k0, k1, k2)}")
            if k0 <= trunc_x and k1 + k2 <= trunc_y:
                s.coeffs[k0, mono_index(k1, k2)] += c
        return s

    @classmethod
    def from_x_coeffs(cls, coeffs: Sequence[complex], trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        """Series depending on x only."""
        s = cls.zeros(trunc_x, trunc_y)
        c = np.asarray(coeffs, dtype=cdtype())[: trunc_x + 1]
        s.coeffs[: len(c), 0] = c
        return s

    @classmethod
    def from_v_coeffs(cls, coeffs: Sequence[complex], trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        """Series sum_k c_k (y1 y2)^k."""
        s = cls.zeros(trunc_x, trunc_y)
        for k, c in enumerate(coeffs):
            if 2 * k <= trunc_y:
                s.coeffs[0, mono_index(k, k)] = c
        return s

    # ------------------------------------------------------------- accessors
    def copy(self) -> "TruncatedSeries":
        return TruncatedSeries(self.coeffs.copy(), self.trunc_x, self.trunc_y)

    def __getitem__(self, key: tuple[int, int, int]) -> complex:
        k0, k1, k2 = key
        if k0 > self.trunc_x or k1 + k2 > self.trunc_y:
            raise KeyError(f"{key} outside truncation bounds")
        return self.coeffs[k0, mono_index(k1, k2)]

    @property
    def terms(self) -> dict[tuple[int, int, int], complex]:
        K1, K2 = monomial_exponents(self.trunc_y)
        rows, cols = np.nonzero(self.coeffs)
        return {(int(r), int(K1[c]), int(K2[c])): complex(self.coeffs[r, c]) for r, c in zip(rows, cols)}

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_abs() <= tol

    def constant_term(self) -> complex:
        return self.coeffs[0, 0]

    def min_y_degree(self) -> int:
        """Smallest total y-degree carrying a nonzero coefficient (trunc_y+1 if none)."""
        K1, K2 = monomial_exponents(self.trunc_y)
        nz = np.nonzero(np.any(self.coeffs != 0, axis=0))[0]
        return int((K1 + K2)[nz].min()) if nz.size else self.trunc_y + 1

    # ------------------------------------------------------------ truncation
    def truncate(self, trunc_x: int | None = None, trunc_y: int | None = None) -> "TruncatedSeries":
        tx = self.trunc_x if trunc_x is None else min(trunc_x, self.trunc_x)
        ty = self.trunc_y if trunc_y is None else min(trunc_y, self.trunc_y)
        return TruncatedSeries(self.coeffs[: tx + 1, : n_monomials(ty)].copy(), tx, ty)

    def with_bounds(self, trunc_x: int, trunc_y: int) -> "TruncatedSeries":
        """Re-embed with new bounds, zero-filling.  Only exact for polynomials."""
        out = TruncatedSeries.zeros(trunc_x, trunc_y)
        tx, nm = min(trunc_x, self.trunc_x), n_monomials(min(trunc_y, self.trunc_y))
        out.coeffs[: tx + 1, :nm] = self.coeffs[: tx + 1, :nm]
        return out

    def prune(self, threshold: float) -> "TruncatedSeries":
        c = self.coeffs.copy()
        c[np.abs(c) < threshold] = 0
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def y_degree_part(self, lo: int, hi: int | None = None) -> "TruncatedSeries":
        """Keep only monomials with lo <= total y-degree <= hi."""
        hi = self.trunc_y if hi is None else hi
        K1, K2 = monomial_exponents(self.trunc_y)
        deg = K1 + K2
        c = self.coeffs * ((deg >= lo) & (deg <= hi))[None, :]
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def x_part(self, lo: int, hi: int | None = None) -> "TruncatedSeries":
        """Keep only monomials with lo <= x-degree <= hi."""
        hi = self.trunc_x if hi is None else hi
        c = np.zeros_like(self.coeffs)
        c[lo: hi + 1] = self.coeffs[lo: hi + 1]
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def x_coefficient(self, k0: int) -> "TruncatedSeries":
        """The y-series multiplying x^k0, returned with trunc_x = 0."""
        return TruncatedSeries(self.coeffs[k0: k0 + 1].copy(), 0, self.trunc_y)

    def at_y0(self) -> np.ndarray:
        """Coefficients of the x-only part (the series evaluated at y = 0)."""
        return self.coeffs[:, 0].copy()

    def linear_y_coeffs(self) -> tuple[np.ndarray, np.ndarray]:
        """x-coefficient arrays of y1 and y2."""
        if self.trunc_y < 1:
            z = np.zeros(self.trunc_x + 1, dtype=cdtype())
            return z, z.copy()
        return self.coeffs[:, mono_index(1, 0)].copy(), self.coeffs[:, mono_index(0, 1)].copy()

    def v_profile(self, k0: int = 0) -> np.ndarray:
        """Coefficients of (y1y2)^k in the x^k0 slice."""
        return np.array([self.coeffs[k0, mono_index(k, k)] for k in range(self.trunc_y // 2 + 1)])

    # ------------------------------------------------------------ arithmetic
    def _coerce(self, other) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            return other
        if np.isscalar(other):
            return TruncatedSeries.constant(other, self.trunc_x, self.trunc_y)
        return NotImplemented

    def _common(self, other: "TruncatedSeries"):
        tx = min(self.trunc_x, other.trunc_x)
        ty = min(self.trunc_y, other.trunc_y)
        nm = n_monomials(ty)
        return tx, ty, self.coeffs[: tx + 1, :nm], other.coeffs[: tx + 1, :nm]

    def __add__(self, other):
        if np.isscalar(other):
            out = self.copy()
            out.coeffs[0, 0] += other
            return out
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        tx, ty, a, b = self._common(other)
        return TruncatedSeries(a + b, tx, ty)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(-self.coeffs, self.trunc_x, self.trunc_y)

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-other)
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        tx, ty, a, b = self._common(other)
        return TruncatedSeries(a - b, tx, ty)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return TruncatedSeries(self.coeffs * other, self.trunc_x, self.trunc_y)
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return TruncatedSeries(self.coeffs / other, self.trunc_x, self.trunc_y)
        if isinstance(other, TruncatedSeries):
            return mul(self, reciprocal(other))
        return NotImplemented

    def __pow__(self, n: int):
        if n < 0:
            return reciprocal(self) ** (-n)
        out = TruncatedSeries.constant(1.0, self.trunc_x, self.trunc_y)
        base = self
        while n:
            if n & 1:
                out = mul(out, base)
            n >>= 1
            if n:
                base = mul(base, base)
        return out

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (self.trunc_x, self.trunc_y) == (other.trunc_x, other.trunc_y) and np.array_equal(
            self.coeffs, other.coeffs)

    __hash__ = None

    def __repr__(self) -> str:
        terms = self.terms
        shown = ", ".join(f"{k}: {v:.6g}" for k, v in sorted(terms.items())[:8])
        more = "" if len(terms) <= 8 else f", ... ({len(terms)} terms)"
        return f"TruncatedSeries(trunc=({self.trunc_x}, {self.trunc_y}), {{{shown}{more}}})"

    def max_diff(self, other: "TruncatedSeries") -> float:
        tx, ty, a, b = self._common(other)
        return float(np.max(np.abs(a - b))) if a.size else 0.0

    # ------------------------------------------------------------- calculus
    def dx(self) -> "TruncatedSeries":
        c = np.zeros_like(self.coeffs)
        k = np.arange(1, self.trunc_x + 1)[:, None]
        c[:-1] = self.coeffs[1:] * k
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def x_dx(self) -> "TruncatedSeries":
        """x * d/dx (exact, keeps bounds)."""
        k = np.arange(self.trunc_x + 1)[:, None]
        return TruncatedSeries(self.coeffs * k, self.trunc_x, self.trunc_y)

    def x2_dx(self) -> "TruncatedSeries":
        """x^2 * d/dx (exact, keeps bounds)."""
        c = np.zeros_like(self.coeffs)
        if self.trunc_x >= 1:
            k = np.arange(1, self.trunc_x)[:, None]
            c[2:] = self.coeffs[1:-1] * k
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def _dy(self, which: int) -> "TruncatedSeries":
        K1, K2 = monomial_exponents(self.trunc_y)
        d1, d2 = (-1, 0) if which == 1 else (0, -1)
        src, dst = _shift_table(self.trunc_y, d1, d2)
        factor = (K1 if which == 1 else K2)[src]
        c = np.zeros_like(self.coeffs)
        c[:, dst] = self.coeffs[:, src] * factor[None, :]
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def dy1(self) -> "TruncatedSeries":
        return self._dy(1)

    def dy2(self) -> "TruncatedSeries":
        return self._dy(2)

    def euler_y(self) -> tuple["TruncatedSeries", "TruncatedSeries"]:
        """(y1 d/dy1, y2 d/dy2): exact, keeps bounds."""
        K1, K2 = monomial_exponents(self.trunc_y)
        return (TruncatedSeries(self.coeffs * K1[None, :], self.trunc_x, self.trunc_y),
                TruncatedSeries(self.coeffs * K2[None, :], self.trunc_x, self.trunc_y))

    def mul_y(self, d1: int, d2: int) -> "TruncatedSeries":
        """Multiply by y1^d1 y2^d2 (negative exponents divide; dropped terms must be zero)."""
        src, dst = _shift_table(self.trunc_y, d1, d2)
        c = np.zeros_like(self.coeffs)
        c[:, dst] = self.coeffs[:, src]
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def div_y(self, which: int, tol: float = 0.0) -> "TruncatedSeries":
        """Exact division by y1 (which=1) or y2 (which=2).

        The top y-degree of the quotient is unknown and set to zero, so the
        result is exact up to total y-degree trunc_y - 1.
        """
        K1, K2 = monomial_exponents(self.trunc_y)
        K = K1 if which == 1 else K2
        rest = np.abs(self.coeffs[:, K == 0])
        if rest.size and rest.max() > tol:
            raise ValidationError(f"series is not divisible by y{which} (residual {rest.max():.3g})")
        return self.mul_y(-1, 0) if which == 1 else self.mul_y(0, -1)

    def mul_x(self, n: int = 1) -> "TruncatedSeries":
        c = np.zeros_like(self.coeffs)
        if n <= self.trunc_x:
            c[n:] = self.coeffs[: self.trunc_x + 1 - n]
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def div_x(self, n: int = 1, tol: float = 0.0) -> "TruncatedSeries":
        """Exact division by x^n; the top n x-orders of the quotient are zero-filled."""
        low = np.abs(self.coeffs[:n])
        if low.size and low.max() > tol:
            raise ValidationError(f"series is not divisible by x^{n} (residual {low.max():.3g})")
        c = np.zeros_like(self.coeffs)
        c[: self.trunc_x + 1 - n] = self.coeffs[n:]
        return TruncatedSeries(c, self.trunc_x, self.trunc_y)

    def mul_x_poly(self, xcoeffs: np.ndarray) -> "TruncatedSeries":
        """Multiply by a polynomial in x given by its coefficient array."""
        out = np.zeros_like(self.coeffs)
        tx = self.trunc_x
        for k, c in enumerate(np.asarray(xcoeffs)[: tx + 1]):
            if c != 0:
                out[k:] += c * self.coeffs[: tx + 1 - k]
        return TruncatedSeries(out, tx, self.trunc_y)

    # ------------------------------------------------------------ evaluation
    def __call__(self, x, y1, y2):
        return self.evaluate(x, y1, y2)

    def evaluate(self, x, y1, y2):
        x, y1, y2 = np.broadcast_arrays(np.asarray(x, dtype=complex), np.asarray(y1, dtype=complex),
                                        np.asarray(y2, dtype=complex))
        K1, K2 = monomial_exponents(self.trunc_y)
        xp = x[..., None] ** np.arange(self.trunc_x + 1)
        ym = y1[..., None] ** K1 * y2[..., None] ** K2
        out = np.einsum("...a,am,...m->...", xp, self.coeffs, ym)
        return out[()] if out.ndim == 0 else out

    # -------------------------------------------------------------------- IO
    def to_dict(self) -> dict:
        terms = sorted(self.terms.items())
        return {
            "trunc_x": self.trunc_x,
            "trunc_y": self.trunc_y,
            "terms": [{"k": list(k), "re": float(c.real), "im": float(c.imag)} for k, c in terms],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TruncatedSeries":
        try:
            tx, ty = int(data["trunc_x"]), int(data["trunc_y"])
            items = [(tuple(int(v) for v in t["k"]), complex(t.get("re", 0.0), t.get("im", 0.0)))
                     for t in data["terms"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed series record: {exc}") from exc
        if tx < 0 or ty < 0:
            raise ValidationError("truncation bounds must be nonnegative")
        for k, _ in items:
            if len(k) != 3 or k[0] > tx or k[1] + k[2] > ty:
                raise ValidationError(f"term {k} outside truncation bounds ({tx}, {ty})")
        return cls.from_terms(items, tx, ty)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TruncatedSeries":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


# ---------------------------------------------------------------- operations
def mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product, truncated to the smaller of each pair of bounds."""
    tx = min(a.trunc_x, b.trunc_x)
    ty = min(a.trunc_y, b.trunc_y)
    nm = n_monomials(ty)
    A = a.coeffs[: tx + 1, :nm]
    B = b.coeffs[: tx + 1, :nm]
    xa, da = _low_orders(A, ty)
    xb, db = _low_orders(B, ty)
    out = np.zeros((tx + 1, nm), dtype=cdtype())
    if xa < 0 or xb < 0 or xa + xb > tx or da + db > ty:
        return TruncatedSeries(out, tx, ty)
    ii, jj, targets, starts = _product_table(ty, da, db)
    Ai = A[:, ii]
    Bj = B[:, jj]
    U = np.zeros((tx + 1, ii.size), dtype=out.dtype)
    for x1 in range(xa, tx + 1 - xb):
        row = Ai[x1]
        if row.any():
            U[x1 + xb:] += row * Bj[xb: tx + 1 - x1]
    out[:, targets] = np.add.reduceat(U, starts, axis=1)
    return TruncatedSeries(out, tx, ty)


def _components(phi) -> tuple[TruncatedSeries, TruncatedSeries]:
    if hasattr(phi, "phi1"):
        return phi.phi1, phi.phi2
    p1, p2 = phi
    return p1, p2


_TAYLOR_MAX_ORDER = 4


def _taylor_order(h1: TruncatedSeries, h2: TruncatedSeries) -> int:
    """Largest k for which k-fold products of h = phi - y survive truncation."""
    tx, ty = h1.trunc_x, h1.trunc_y
    xs, ds = [], []
    for h in (h1, h2):
        xh, dh = _low_orders(h.coeffs, ty)
        if xh >= 0:
            xs.append(xh)
            ds.append(dh)
    if not xs:
        return 0
    xh, dh = min(xs), min(ds)
    if dh == 0:
        return ty + tx + 1  # y-degree-0 terms: no bound from the y-filtration
    k = ty // dh
    if xh > 0:
        k = min(k, tx // xh)
    return k


def _compose_taylor(fs, h1, h2, order, tx, ty):
    """sum over |alpha| <= order of d^alpha f / alpha! * h^alpha (y <- y + h)."""
    out = [f.truncate(tx, min(f.trunc_y, ty)) for f in fs]
    # hp[a1] = h1^a1 h2^(k-a1) / (a1! (k-a1)!) and df[i][a1] = d1^a1 d2^(k-a1) f_i
    hp = [TruncatedSeries.constant(1.0, tx, ty)]
    df = [[f.with_bounds(tx, ty) if f.trunc_y < ty else f.truncate(tx, ty)] for f in fs]
    for k in range(1, order + 1):
        hp = [mul(hp[0], h2) / k] + [mul(hp[a1 - 1], h1) / a1 for a1 in range(1, k + 1)]
        for i, f in enumerate(fs):
            prev = df[i]
            cur = [prev[0].dy2()] + [prev[a1 - 1].dy1() for a1 in range(1, k + 1)]
            df[i] = cur
            acc = out[i]
            for a1 in range(k + 1):
                if hp[a1].coeffs.any() and cur[a1].coeffs.any():
                    acc = acc + mul(cur[a1], hp[a1]).truncate(tx, acc.trunc_y)
            out[i] = acc
    return out


def compose_many(fs: Sequence[TruncatedSeries], phi) -> list[TruncatedSeries]:
    """Substitute y <- phi(x, y) in each of ``fs`` (sharing the powers of phi)."""
    p1, p2 = _components(phi)
    for p in (p1, p2):
        if p.constant_term() != 0:
            raise NonzeroConstantTerm("substituted series must vanish at the origin")
    tx = min([p1.trunc_x, p2.trunc_x] + [f.trunc_x for f in fs])
    ty = min(p1.trunc_y, p2.trunc_y, max(f.trunc_y for f in fs))
    p1, p2 = p1.truncate(tx, ty), p2.truncate(tx, ty)
    h1 = p1 - TruncatedSeries.y1(tx, ty)
    h2 = p2 - TruncatedSeries.y2(tx, ty)
    order = _taylor_order(h1, h2)
    if order <= _TAYLOR_MAX_ORDER:
        return _compose_taylor(fs, h1, h2, order, tx, ty)
    one = TruncatedSeries.constant(1.0, tx, ty)
    pow1, pow2 = [one], [one]
    for _ in range(ty):
        pow1.append(mul(pow1[-1], p1))
        pow2.append(mul(pow2[-1], p2))
    out = []
    for f in fs:
        tyf = min(f.trunc_y, ty)
        acc = TruncatedSeries.zeros(tx, ty)
        for k1 in range(tyf + 1):
            inner = None
            for k2 in range(tyf - k1 + 1):
                col = f.coeffs[: tx + 1, mono_index(k1, k2)]
                if col.any():
                    term = pow2[k2].mul_x_poly(col)
                    inner = term if inner is None else inner + term
            if inner is not None:
                acc = acc + (inner if k1 == 0 else mul(inner, pow1[k1]))
        out.append(acc.truncate(tx, tyf))
    return out


def compose_fibered(f: TruncatedSeries, phi) -> TruncatedSeries:
    """f(x, phi1(x, y), phi2(x, y)), truncated to the common bounds."""
    return compose_many([f], phi)[0]


def exp_series(s: TruncatedSeries) -> TruncatedSeries:
    """exp(s) for a series without constant term."""
    if s.constant_term() != 0:
        raise NonzeroConstantTerm("exp_series requires s(0,0,0) = 0")
    out = TruncatedSeries.constant(1.0, s.trunc_x, s.trunc_y)
    term = out
    for n in range(1, s.trunc_x + s.trunc_y + 2):
        term = mul(term, s) / n
        if not term.coeffs.any():
            break
        out = out + term
    return out


def reciprocal(u: TruncatedSeries) -> TruncatedSeries:
    """1/u for a unit u (nonzero constant term)."""
    u0 = u.constant_term()
    if u0 == 0:
        raise ValidationError("reciprocal of a non-unit series")
    w = u * (1.0 / u0) - 1.0
    out = TruncatedSeries.constant(1.0, u.trunc_x, u.trunc_y)
    term = out
    for _ in range(u.trunc_x + u.trunc_y + 1):
        term = -mul(term, w)
        if not term.coeffs.any():
            break
        out = out + term
    return out * (1.0 / u0)


def log_unit(u: TruncatedSeries) -> TruncatedSeries:
    """log(u / u(0)) for a unit u; the constant term of the result is zero."""
    u0 = u.constant_term()
    if u0 == 0:
        raise ValidationError("log of a non-unit series")
    w = u * (1.0 / u0) - 1.0
    out = TruncatedSeries.zeros(u.trunc_x, u.trunc_y)
    term = TruncatedSeries.constant(1.0, u.trunc_x, u.trunc_y)
    for n in range(1, u.trunc_x + u.trunc_y + 2):
        term = mul(term, w)
        if not term.coeffs.any():
            break
        out = out + term * (-1) ** (n + 1) / n
    return out


def split_resonant(f: TruncatedSeries) -> tuple[TruncatedSeries, TruncatedSeries]:
    """Split into the k1 == k2 part and the rest."""
    K1, K2 = monomial_exponents(f.trunc_y)
    mask = (K1 == K2)[None, :]
    return (TruncatedSeries(f.coeffs * mask, f.trunc_x, f.trunc_y),
            TruncatedSeries(f.coeffs * ~mask, f.trunc_x, f.trunc_y))


def apply_cc_inverse(f: TruncatedSeries, tol: float = 0.0) -> TruncatedSeries:
    """Solve (-y1 d1 + y2 d2) g = f for g supported on k1 != k2.

    The operator multiplies y1^k1 y2^k2 by (k2 - k1); the resonant part of f
    must vanish (up to ``tol``).
    """
    K1, K2 = monomial_exponents(f.trunc_y)
    res = K1 == K2
    if np.abs(f.coeffs[:, res]).max(initial=0.0) > tol:
        raise ValidationError("resonant part is not in the range of the linear operator")
    div = (K2 - K1).astype(float)
    div[res] = 1.0
    c = f.coeffs / div[None, :]
    c[:, res] = 0
    return TruncatedSeries(c, f.trunc_x, f.trunc_y)


def apply_cc(f: TruncatedSeries) -> TruncatedSeries:
    """(-y1 d1 + y2 d2) f."""
    K1, K2 = monomial_exponents(f.trunc_y)
    return TruncatedSeries(f.coeffs * (K2 - K1)[None, :], f.trunc_x, f.trunc_y)


# ---------------------------------------------------------- univariate series
class UniSeries:
    """Dense truncated power series in one variable."""

    __slots__ = ("coeffs", "trunc")

    def __init__(self, coeffs: Sequence[complex], trunc: int | None = None):
        c = np.asarray(coeffs, dtype=cdtype()).ravel()
        if trunc is None:
            trunc = max(len(c) - 1, 0)
        out = np.zeros(trunc + 1, dtype=cdtype())
        n = min(len(c), trunc + 1)
        out[:n] = c[:n]
        self.coeffs = out
        self.trunc = int(trunc)

    @classmethod
    def zeros(cls, trunc: int) -> "UniSeries":
        return cls(np.zeros(trunc + 1), trunc)

    def __len__(self) -> int:
        return self.trunc + 1

    def __getitem__(self, k: int) -> complex:
        return self.coeffs[k] if 0 <= k <= self.trunc else cscalar(0)

    def copy(self) -> "UniSeries":
        return UniSeries(self.coeffs.copy(), self.trunc)

    def _other(self, other):
        if isinstance(other, UniSeries):
            t = min(self.trunc, other.trunc)
            return t, self.coeffs[: t + 1], other.coeffs[: t + 1]
        if np.isscalar(other):
            o = np.zeros(self.trunc + 1, dtype=cdtype())
            o[0] = other
            return self.trunc, self.coeffs, o
        return None

    def __add__(self, other):
        r = self._other(other)
        if r is None:
            return NotImplemented
        t, a, b = r
        return UniSeries(a + b, t)

    __radd__ = __add__

    def __sub__(self, other):
        r = self._other(other)
        if r is None:
            return NotImplemented
        t, a, b = r
        return UniSeries(a - b, t)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return UniSeries(-self.coeffs, self.trunc)

    def __mul__(self, other):
        if np.isscalar(other):
            return UniSeries(self.coeffs * other, self.trunc)
        if not isinstance(other, UniSeries):
            return NotImplemented
        t = min(self.trunc, other.trunc)
        return UniSeries(np.convolve(self.coeffs[: t + 1], other.coeffs[: t + 1])[: t + 1], t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return UniSeries(self.coeffs / other, self.trunc)
        return NotImplemented

    def __repr__(self) -> str:
        return f"UniSeries({np.array2string(self.coeffs, precision=6)}, trunc={self.trunc})"

    def derivative(self) -> "UniSeries":
        k = np.arange(1, self.trunc + 1)
        return UniSeries(self.coeffs[1:] * k, max(self.trunc - 1, 0)) if self.trunc else UniSeries([0], 0)

    def antiderivative(self) -> "UniSeries":
        """Antiderivative with zero constant term (trunc grows by one)."""
        c = np.zeros(self.trunc + 2, dtype=cdtype())
        c[1:] = self.coeffs / np.arange(1, self.trunc + 2)
        return UniSeries(c, self.trunc + 1)

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), self.coeffs)

    def exp(self) -> "UniSeries":
        """exp of a series with zero constant term."""
        if self.coeffs[0] != 0:
            raise NonzeroConstantTerm("exp requires a zero constant term")
        out = np.zeros(self.trunc + 1, dtype=cdtype())
        out[0] = 1.0
        # E' = s' E  ->  n E_n = sum_k k s_k E_{n-k}
        for n in range(1, self.trunc + 1):
            k = np.arange(1, n + 1)
            out[n] = np.sum(k * self.coeffs[k] * out[n - k]) / n
        return UniSeries(out, self.trunc)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def to_list(self) -> list[dict]:
        return [{"re": float(c.real), "im": float(c.imag)} for c in self.coeffs]

    @classmethod
    def from_list(cls, data: Sequence[Mapping]) -> "UniSeries":
        return cls([complex(d.get("re", 0.0), d.get("im", 0.0)) for d in data])
