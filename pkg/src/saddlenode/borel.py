"""Borel transforms, weighted Borel norms and directional Laplace summation.

Conventions:

* ``borel(f, "standard")`` gives B(f)(t) = sum f_k t^k / k!; its Laplace
  transform is L_theta(g)(x) = int_{e^{i theta} R+} g(t) e^{-t/x} dt / x.
* ``borel(f, "bis")`` gives B~(f)(t) = sum f_{k+1} t^k / k!; it is inverted by
  the Laplace transform without the 1/x factor, and it turns products of
  series without constant term into convolutions.

Continuation of a truncated Borel transform beyond its disc of convergence
uses diagonal Pade approximants computed with an SVD-based degree reduction
(spurious pole/zero pairs are removed before the denominator is formed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.linalg import svd, toeplitz
from scipy.special import beta as beta_fn

from .errors import (ContinuationFailure, DivergentIntegrand, NonpositiveRealPart,
                     ValidationError, VariantMismatch, ZeroEigenvalue)
from .series import TruncatedSeries, UniSeries, monomial_exponents

VARIANTS = ("standard", "bis")

# Constant of the a-priori bound for the irregular model equation.
MODEL_BOUND_C = 2 * math.e ** 2 / 5 + 5


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ValidationError(f"unknown Borel variant {variant!r}; expected one of {VARIANTS}")


def _factorials(n: int) -> np.ndarray:
    return np.array([math.factorial(k) for k in range(n)], dtype=float)


# ----------------------------------------------------------------- Pade
def pade_coefficients(c, m: int, n: int, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Pade approximant p/q of type [m/n] for the Taylor coefficients ``c``.

    Degrees are reduced while the Toeplitz block is rank deficient, so exact
    rational inputs give their reduced form instead of a singular system.
    The denominator is normalized by q(0) = 1.
    """
    c = np.asarray(c, dtype=complex).ravel()
    if len(c) < m + n + 1:
        c = np.concatenate([c, np.zeros(m + n + 1 - len(c), dtype=complex)])
    c = c[: m + n + 1]
    ts = tol * np.linalg.norm(c)
    if np.linalg.norm(c[: m + 1]) <= ts:
        return np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
    while True:
        col = c[: m + n + 1]
        Z = toeplitz(col, np.concatenate([[col[0]], np.zeros(n, dtype=complex)]))
        if n == 0:
            q = np.ones(1, dtype=complex)
            break
        C = Z[m + 1:, :]
        _, s, Vh = svd(C)
        rho = int(np.sum(s > ts))
        if rho == n:
            q = Vh[-1].conj()
            break
        m -= n - rho
        n = rho
        if m < 0:
            m, n = 0, 0
    p = Z[: m + 1, : n + 1] @ q
    if abs(q[0]) < 1e-300:
        raise ContinuationFailure("Pade denominator vanishes at the origin")
    p, q = p / q[0], q / q[0]
    # strip trailing zeros
    lim = ts if ts > 0 else 0.0
    while len(p) > 1 and abs(p[-1]) <= lim:
        p = p[:-1]
    while len(q) > 1 and abs(q[-1]) <= tol:
        q = q[:-1]
    return p, q


@dataclass(frozen=True)
class PadeContinuation:
    """Rational continuation p(t)/q(t) of a truncated Taylor series."""

    p: np.ndarray
    q: np.ndarray

    @property
    def poles(self) -> np.ndarray:
        if len(self.q) < 2:
            return np.zeros(0, dtype=complex)
        return np.polynomial.polynomial.polyroots(self.q)

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        P = np.polynomial.polynomial
        return P.polyval(t, self.p) / P.polyval(t, self.q)

    def check_points(self, t, margin: float = 1e-6) -> None:
        """Raise ContinuationFailure if a pole is within ``margin (1+|t|)`` of a point."""
        poles = self.poles
        if poles.size == 0:
            return
        t = np.asarray(t, dtype=complex).ravel()
        d = np.abs(t[:, None] - poles[None, :])
        if np.any(d < margin * (1.0 + np.abs(t))[:, None]):
            raise ContinuationFailure("a Pade pole lies on the sampled set")

    def check_ray(self, theta: float, margin: float = 1e-6) -> None:
        """Raise ContinuationFailure if a pole lies on the ray e^{i theta} R+."""
        w = np.exp(1j * theta)
        for z in self.poles:
            s = (z / w).real
            dist = abs(z) if s <= 0 else abs((z / w).imag)
            if dist < margin * (1.0 + abs(z)):
                raise ContinuationFailure(f"Pade pole {z} lies on the ray arg t = {theta}")


# ----------------------------------------------------------------- Borel series
@dataclass(frozen=True)
class BorelSeries:
    """Taylor coefficients of a Borel transform.

    ``coeffs[k]`` multiplies t^k.  For the ``bis`` variant the constant term
    of the original series is kept in ``constant`` so that the inverse
    transform is exact.
    """

    coeffs: np.ndarray
    variant: str = "standard"
    constant: complex = 0.0
    radius: float = field(default=math.inf)

    def __post_init__(self):
        _check_variant(self.variant)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=complex), self.coeffs)

    def continuation(self, m: int | None = None, n: int | None = None) -> PadeContinuation:
        N = len(self.coeffs) - 1
        if m is None and n is None:
            n = N // 2
            m = N - n
        elif m is None:
            m = N - n
        elif n is None:
            n = N - m
        if m < 0 or n < 0 or m + n > N:
            raise ValidationError(f"Pade type [{m}/{n}] needs more than {N + 1} coefficients")
        p, q = pade_coefficients(self.coeffs, m, n)
        return PadeContinuation(p, q)

    def inverse(self) -> UniSeries:
        """Term-by-term inverse Borel transform."""
        N = len(self.coeffs)
        f = self.coeffs * _factorials(N)
        if self.variant == "bis":
            f = np.concatenate([[self.constant], f])
        return UniSeries(f)


def radius_estimate(coeffs) -> float:
    """Root-test estimate of the radius of convergence from the upper half of the coefficients."""
    c = np.abs(np.asarray(coeffs, dtype=complex))
    ks = np.arange(len(c))
    sel = (ks >= max(1, len(c) // 2)) & (c > 0)
    if not sel.any():
        return math.inf
    roots = c[sel] ** (-1.0 / ks[sel])
    return float(np.min(roots))


def borel(f: UniSeries, variant: str = "standard") -> BorelSeries:
    """Borel transform of a univariate series, coefficient by coefficient."""
    _check_variant(variant)
    c = np.asarray(f.coeffs, dtype=complex)
    if variant == "standard":
        b = c / _factorials(len(c))
        return BorelSeries(b, "standard", 0.0, radius_estimate(b))
    b = c[1:] / _factorials(len(c) - 1)
    if len(b) == 0:
        b = np.zeros(1, dtype=complex)
    return BorelSeries(b, "bis", complex(c[0]), radius_estimate(b))


def convolve(g: BorelSeries, h: BorelSeries) -> BorelSeries:
    """(g * h)(t) = int_0^t g(s) h(t - s) ds on Taylor coefficients (bis variant only).

    t^a * t^b = B(a+1, b+1) t^(a+b+1).  The result keeps as many
    coefficients as the shorter factor determines.
    """
    if g.variant != "bis" or h.variant != "bis":
        raise VariantMismatch("convolution is defined on the bis variant of the Borel transform")
    N = min(len(g), len(h))
    out = np.zeros(N, dtype=complex)
    a = np.arange(N)
    for n in range(1, N):
        i = a[:n]
        j = n - 1 - i
        out[n] = np.sum(g.coeffs[i] * h.coeffs[j] * beta_fn(i + 1, j + 1))
    return BorelSeries(out, "bis", 0.0, radius_estimate(out))


# ----------------------------------------------------------------- domains and norms
@dataclass(frozen=True)
class RayDomain:
    """Sector {|arg t - theta| < delta/2} union the disc D(0, rho)."""

    theta: float
    delta: float
    rho: float

    def __post_init__(self):
        if not (self.delta > 0 and self.rho > 0):
            raise ValidationError("RayDomain needs delta > 0 and rho > 0")

    def contains(self, t: complex) -> bool:
        return self.distance(t) == 0.0

    def distance(self, z: complex) -> float:
        """Euclidean distance from z to the domain."""
        z = complex(z)
        r = abs(z)
        d_disc = max(r - self.rho, 0.0)
        if r == 0.0:
            return 0.0
        half = self.delta / 2
        if half >= math.pi:
            return 0.0
        phi = abs((np.angle(z) - self.theta + math.pi) % (2 * math.pi) - math.pi)
        if phi < half:
            return 0.0
        off = phi - half
        d_sector = r if off >= math.pi / 2 else r * math.sin(off)
        return min(d_disc, d_sector)

    def grid(self, r_max: float, n_radial: int = 160, n_angular: int = 25,
             n_disc: int = 48) -> np.ndarray:
        """Sample points of the sector (truncated at ``r_max``) and of the disc."""
        half = min(self.delta / 2, math.pi)
        ang = self.theta + np.linspace(-half, half, n_angular + 2)[1:-1]
        rad = np.linspace(0.0, r_max, n_radial)
        sector = (rad[:, None] * np.exp(1j * ang)[None, :]).ravel()
        dr = np.linspace(0.0, self.rho, max(n_disc // 3, 2))[1:-1]
        da = np.linspace(0.0, 2 * math.pi, n_disc, endpoint=False)
        disc = (dr[:, None] * np.exp(1j * da)[None, :]).ravel()
        return np.concatenate([sector, disc])


def _weight(t, beta: float, variant: str) -> np.ndarray:
    r = np.abs(t)
    w = np.exp(-beta * r)
    if variant == "bis":
        w = w * (1.0 + beta ** 2 * r ** 2)
    return w


def borel_norm(f: UniSeries, beta: float, domain: RayDomain, variant: str = "bis",
               r_max: float | None = None, borel_fn: Callable | None = None,
               n_radial: int = 160, n_angular: int = 25) -> float:
    """Grid estimate (a lower bound) of the weighted Borel norm of ``f``.

    standard: sup |B(f)(t)| e^{-beta|t|};  bis: sup |B~(f)(t)| (1 + beta^2|t|^2) e^{-beta|t|},
    both over the domain.  The Borel transform is evaluated with its Pade
    continuation unless a callable ``borel_fn`` is supplied.
    """
    _check_variant(variant)
    if beta <= 0:
        raise ValidationError("beta must be positive")
    if r_max is None:
        r_max = max(domain.rho, 60.0 / beta)
    pts = domain.grid(r_max, n_radial=n_radial, n_angular=n_angular)
    if borel_fn is None:
        B = borel(f, variant)
        if not np.any(B.coeffs):
            return 0.0
        cont = B.continuation()
        cont.check_points(pts)
        vals = cont(pts)
    else:
        vals = np.asarray(borel_fn(pts), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise ContinuationFailure("non-finite Borel values on the grid")
    return float(np.max(np.abs(vals) * _weight(pts, beta, variant)))


def irregular_model_bound(k: complex, alpha: complex, beta: float, domain: RayDomain) -> float:
    """The factor beta / (beta d_k - C |alpha k|) with d_k = dist(-k, domain)."""
    d = domain.distance(-complex(k))
    den = beta * d - MODEL_BOUND_C * abs(alpha * k)
    if den <= 0:
        raise ValidationError("the bound needs beta * dist(-k, domain) > C |alpha k|")
    return beta / den


# ----------------------------------------------------------------- model equations
def solve_irregular_model(k: complex, alpha: complex, b: UniSeries) -> UniSeries:
    """Formal solution of x^2 a' + (1 + alpha x) k a = b."""
    k = complex(k)
    if k == 0:
        raise ZeroEigenvalue("the irregular model equation needs k != 0")
    bc = b.coeffs
    a = np.zeros_like(bc)
    a[0] = bc[0] / k
    for n in range(1, len(bc)):
        a[n] = (bc[n] - (n - 1 + alpha * k) * a[n - 1]) / k
    return UniSeries(a, b.trunc)


def solve_regular_model(k: complex, b: UniSeries) -> UniSeries:
    """Formal solution of x a' + k a = b, a_j = b_j / (j + k)."""
    k = complex(k)
    if k.real <= 0:
        raise NonpositiveRealPart("the regular model equation needs Re(k) > 0")
    j = np.arange(len(b.coeffs))
    return UniSeries(b.coeffs / (j + k), b.trunc)


# ----------------------------------------------------------------- Laplace summation
def _as_function(g, theta: float, continuation: str) -> Callable:
    if isinstance(g, BorelSeries):
        if continuation == "polynomial":
            return g
        if continuation != "pade":
            raise ValidationError(f"unknown continuation {continuation!r}")
        cont = g.continuation()
        cont.check_ray(theta)
        return cont
    if isinstance(g, PadeContinuation):
        g.check_ray(theta)
        return g
    if callable(g):
        return g
    raise ValidationError("laplace_sum needs a BorelSeries, a PadeContinuation or a callable")


def laplace_sum(g, theta: float, x: complex, variant: str = "standard",
                growth: float = 0.0, rel_tol: float = 1e-10, decay: float = 1e-16,
                max_radius: float = 1e6, continuation: str = "pade") -> tuple[complex, float]:
    """Laplace transform of ``g`` along the ray arg t = theta.

    ``variant="standard"`` integrates g(t) e^{-t/x} dt/x, ``"bis"`` drops the
    1/x.  ``growth`` is an exponential growth rate of g along the ray.  The
    ray is truncated where the integrand has decayed below ``decay`` times its
    maximum; returns (value, error estimate).

    A BorelSeries is continued along the ray by its diagonal Pade approximant
    (``continuation="pade"``) or used as the polynomial it stores
    (``continuation="polynomial"``, exact for Borel transforms of polynomials).
    """
    _check_variant(variant)
    x = complex(x)
    if x == 0:
        raise ValidationError("x must be nonzero")
    if isinstance(g, BorelSeries) and g.variant != variant:
        raise VariantMismatch(f"{g.variant} Borel series summed with the {variant} Laplace transform")
    w = np.exp(1j * theta)
    rate = (w / x).real - growth
    if rate <= 0:
        raise DivergentIntegrand(f"Re(e^(i theta)/x) = {(w / x).real:.3g} does not exceed the growth rate {growth:.3g}")
    fn = _as_function(g, theta, continuation)
    pref = w / x if variant == "standard" else w

    def integrand(r):
        t = r * w
        return complex(fn(t)) * np.exp(-t / x) * pref

    R = math.log(1.0 / decay) / rate
    probe = np.linspace(0.0, R, 400)
    mags = np.abs([integrand(r) for r in probe])
    if not np.all(np.isfinite(mags)):
        raise DivergentIntegrand("integrand is not finite along the ray")
    peak = mags.max()
    while mags[-1] > decay * max(peak, 1e-300):
        R *= 2
        if R > max_radius:
            raise DivergentIntegrand("integrand does not decay along the ray")
        probe = np.linspace(0.0, R, 400)
        mags = np.abs([integrand(r) for r in probe])
        peak = max(peak, mags.max())
    # panels of a few decay lengths each
    scale = 1.0 / rate
    edges = [0.0]
    while edges[-1] < R:
        edges.append(min(R, edges[-1] + 4 * scale * (1 + len(edges) // 4)))
    total, err = 0.0j, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = quad(integrand, a, b, complex_func=True, epsabs=0.0,
                      epsrel=rel_tol, limit=200)
        total += val
        err += abs(e)
    return complex(total), float(err + decay * peak * R)


# ----------------------------------------------------------------- multivariate
def x_column(F: TruncatedSeries, k1: int, k2: int) -> UniSeries:
    """The x-series multiplying y1^k1 y2^k2 in F."""
    d = k1 + k2
    return UniSeries(F.coeffs[:, d * (d + 1) // 2 + k2], F.trunc_x)


def growth_report(F: TruncatedSeries) -> dict:
    """Fit |f_{n,k}| <= C A^n n! B^|k| over the stored coefficients.

    A is the largest geometric rate of |f_n| / n! over the y-monomials (a
    least-squares fit of the logarithm over the upper half of the stored
    orders, so constant factors do not bias it); B and C are then the
    smallest constants consistent with the data.  Reported, not asserted: a
    finite truncation cannot prove uniform growth.
    """
    K1, K2 = monomial_exponents(F.trunc_y)
    fact = _factorials(F.trunc_x + 1)
    A = 0.0
    for j in range(len(K1)):
        col = np.abs(np.asarray(F.coeffs[:, j], dtype=complex)) / fact
        n = np.arange(len(col))
        sel = (n >= max(1, len(col) // 2)) & (col > 0)
        if sel.sum() >= 2:
            slope = np.polyfit(n[sel], np.log(col[sel]), 1)[0]
            A = max(A, math.exp(slope))
        elif sel.sum() == 1:
            A = max(A, float(col[sel][0] ** (1.0 / n[sel][0])))
    A = max(A, 1e-12)
    n = np.arange(F.trunc_x + 1)
    scaled = np.abs(np.asarray(F.coeffs, dtype=complex)) / (fact * A ** n)[:, None]
    per_mono = scaled.max(axis=0)
    C = float(per_mono[0]) if per_mono[0] > 0 else float(per_mono.max(initial=0.0))
    C = max(C, 1e-300)
    deg = K1 + K2
    B = 0.0
    for j in range(len(K1)):
        if deg[j] > 0 and per_mono[j] > 0:
            B = max(B, (per_mono[j] / C) ** (1.0 / deg[j]))
    return {"A": float(A), "B": float(B), "C": float(C)}


def borel_sum_series(F: TruncatedSeries, theta: float, x: complex, y1: complex = 0.0,
                     y2: complex = 0.0, growth: float = 0.0) -> tuple[complex, float, dict]:
    """Weak 1-summation of F at (x, y1, y2): sum each y-monomial's x-series separately.

    Uses the standard Borel transform per monomial; returns
    (value, error estimate, growth report).
    """
    K1, K2 = monomial_exponents(F.trunc_y)
    total, err = 0.0j, 0.0
    for j in range(len(K1)):
        col = UniSeries(F.coeffs[:, j], F.trunc_x)
        if not np.any(col.coeffs):
            continue
        mono = complex(y1) ** int(K1[j]) * complex(y2) ** int(K2[j])
        if mono == 0:
            continue
        v, e = laplace_sum(borel(col, "standard"), theta, x, "standard", growth=growth)
        total += v * mono
        err += e * abs(mono)
    return total, err, growth_report(F)
