"""Sectorial normalization: stable domains, asymptotic paths, homological equations.

A prepared field is handled as

    Z = Y0 + C(x, y) C + R(x, y) Rad,   Y0 = lam C + x (x d/dx + a1 y1 d/dy1 + a2 y2 d/dy2),

with C = -y1 d/dy1 + y2 d/dy2 and Rad = y1 d/dy1 + y2 d/dy2.  Asymptotic
paths are real-time trajectories of X = (+-i / kappa) Z with
kappa = lam + b x + C and b = (a2 - a1)/2, so that y2/y1 turns at unit rate
and x(t) tends to 0 inside the sector S+ (bisected by i lam) or S- (bisected
by -i lam).

Stable domains are described in the reduced coordinate x~ = x/lam (for
which the field has lam = 1); the orientation "-" is reduced to "+" by
x~ -> -x~ together with the swap y1 <-> y2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainExit, StepSizeUnderflow, ValidationError
from .series import TruncatedSeries, log_unit, monomial_exponents
from .straighten import MAP_X_LAG, NormalizationResult, OrderNField, normalize_to_order, normalize_up_to_order
from .vectorfield import FiberedVectorField

RTOL = 1e-10
TAIL_TOL = 1e-12


def _orient(orientation) -> int:
    if orientation in (1, "+", "plus"):
        return 1
    if orientation in (-1, "-", "minus"):
        return -1
    raise ValidationError(f"orientation must be + or -, got {orientation!r}")


# ----------------------------------------------------------------- stable domain
@dataclass(frozen=True)
class StableDomainParams:
    """Constants of the stable domain Omega (reduced coordinates, lam = 1)."""

    a: complex
    r: float
    eps: float
    omega: float
    omega_p: float
    mu: float
    delta: float
    delta_p: float
    orientation: int = 1
    lam: complex = 1.0
    r1: float | None = None
    r2: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "orientation", _orient(self.orientation))
        if self.r1 is None:
            object.__setattr__(self, "r1", self.r)
        if self.r2 is None:
            object.__setattr__(self, "r2", self.r)
        self.validate()

    @classmethod
    def auto(cls, a: complex, r: float, eps: float, orientation=1, lam: complex = 1.0,
             r1: float | None = None, r2: float | None = None) -> "StableDomainParams":
        """Pick the constants inside their admissible intervals.

        omega' = 0.9 Re(a)/|a|, omega and mu at the midpoints of their
        intervals, delta = min(omega, mu)/2, delta' = omega'/2.
        """
        a = complex(a)
        if a.real <= 0:
            raise ValidationError("a stable domain needs Re(a) > 0")
        wp = 0.9 * a.real / abs(a)
        lo = math.cos(math.acos(wp) - abs(np.angle(a)))
        w = 0.5 * (lo + 1.0)
        mu = 0.5 * math.sqrt(1.0 - w * w)
        return cls(a, r, eps, w, wp, mu, 0.5 * min(w, mu), 0.5 * wp, orientation, lam, r1, r2)

    def validate(self) -> None:
        a = complex(self.a)
        checks = [
            (a.real > 0, "Re(a) > 0"),
            (0 < self.omega_p < a.real / abs(a), "omega' in (0, Re(a)/|a|)"),
            (math.cos(math.acos(self.omega_p) - abs(np.angle(a))) < self.omega < 1, "omega in (cos(arccos omega' - |arg a|), 1)"),
            (0 < self.mu < math.sqrt(1 - self.omega ** 2), "mu in (0, sqrt(1 - omega^2))"),
            (0 < self.eps < math.acos(self.mu), "eps in (0, arccos mu)"),
            (0 < self.delta < min(self.omega, self.mu), "delta in (0, min(omega, mu))"),
            (0 < self.delta_p < self.omega_p, "delta' in (0, omega')"),
            (self.r > 0 and self.r1 > 0 and self.r2 > 0, "positive radii"),
        ]
        for ok, what in checks:
            if not ok:
                raise ValidationError(f"stable-domain constants violate {what}")

    @property
    def k_x(self) -> float:
        return (1 + self.delta) / (self.mu - self.delta)

    @property
    def k_y(self) -> float:
        return (abs(self.a / 2) + self.delta_p) / (self.mu - self.delta)

    @property
    def span(self) -> float:
        """eps + arcsin(omega): the largest argument offset outside Sigma."""
        return self.eps + math.asin(self.omega)

    @property
    def r_prime(self) -> float:
        return self.r * math.exp(-self.k_x * self.span)

    @property
    def r1_prime(self) -> float:
        return self.r1 * math.exp(-self.k_y * self.span)

    @property
    def r2_prime(self) -> float:
        return self.r2 * math.exp(-self.k_y * self.span)

    def reduce(self, x, y1, y2):
        """Map to the reduced "+" picture: (x~, y1~, y2~)."""
        xt = np.asarray(x, dtype=complex) / self.lam
        if self.orientation == 1:
            return xt, np.asarray(y1, dtype=complex), np.asarray(y2, dtype=complex)
        return -xt, np.asarray(y2, dtype=complex), np.asarray(y1, dtype=complex)

    def unreduce_x(self, xt):
        xt = np.asarray(xt, dtype=complex)
        return (xt if self.orientation == 1 else -xt) * self.lam


def _arg_plus(xt) -> np.ndarray:
    """Argument on the branch (-pi/2, 3pi/2], which contains the whole sector S+."""
    th = np.angle(xt)
    return np.where(th <= -math.pi / 2, th + 2 * math.pi, th)


def in_sector(x, r: float, eps: float, params: StableDomainParams) -> np.ndarray:
    """Membership of x in S(r, eps) for the orientation of ``params``."""
    xt, _, _ = params.reduce(x, 0.0, 0.0)
    th = _arg_plus(xt)
    return (np.abs(xt) < r) & (th > -eps) & (th < math.pi + eps) & (xt != 0)


def in_sigma(x, params: StableDomainParams) -> np.ndarray:
    """Membership of x in Sigma(1, r, omega): Im(x~) > omega |x~|."""
    xt, _, _ = params.reduce(x, 0.0, 0.0)
    return (np.abs(xt) < params.r) & (xt.imag > params.omega * np.abs(xt))


def in_stable_domain(x, y1, y2, params: StableDomainParams, verbatim: bool = False) -> np.ndarray:
    """Membership in Omega.

    Points must lie in S(r, eps) x D(0, r).  Outside Sigma (Im x~ < omega|x~|)
    the modulus of x and of each y_j must stay below an exponential wedge in
    arg(x~): on the right arc the exponent is arg x~ - arcsin(omega), on the
    left arc pi - arcsin(omega) - arg x~ (both negative there).

    ``verbatim=True`` applies the wedges under the case conditions exactly as
    printed (Im x~ >= omega|x~| and Im x~ <= -omega|x~|); there the exponents
    are non-negative or the case is empty, so the wedges never bind.
    """
    xt, u1, u2 = params.reduce(x, y1, y2)
    th = _arg_plus(xt)
    ax = np.abs(xt)
    ok = in_sector(x, params.r, params.eps, params) & (np.abs(u1) < params.r1) & (np.abs(u2) < params.r2)
    asw = math.asin(params.omega)
    if verbatim:
        upper = xt.imag >= params.omega * ax
        lower = xt.imag <= -params.omega * ax
        e_right = np.where(upper, th - asw, 0.0)
        e_left = np.where(lower, math.pi - asw - th, 0.0)
        e = e_right + e_left
    else:
        outside = xt.imag < params.omega * ax
        right = outside & (xt.real >= 0)
        left = outside & (xt.real < 0)
        e = np.where(right, th - asw, 0.0) + np.where(left, math.pi - asw - th, 0.0)
    ok &= ax <= params.r * np.exp(params.k_x * e)
    ok &= np.abs(u1) <= params.r1 * np.exp(params.k_y * e)
    ok &= np.abs(u2) <= params.r2 * np.exp(params.k_y * e)
    return ok


def entry_time_bound(x0: complex, params: StableDomainParams) -> float:
    """Upper bound on the time needed to enter Sigma from x0."""
    xt, _, _ = params.reduce(x0, 0.0, 0.0)
    return math.exp(params.k_x * params.span) / ((1 + params.delta) * abs(complex(xt)))


def sandwich_grid(params: StableDomainParams, n: int = 1000, seed: int = 0):
    """Random samples of S(r', eps) x D(0, r') and of S(r, eps) x D(0, r).

    Returns (inner_points, outer_points) as arrays of shape (n, 3).
    """
    rng = np.random.default_rng(seed)

    def sample(rx, ry1, ry2):
        th = rng.uniform(-params.eps, math.pi + params.eps, n)
        rad = rx * np.sqrt(rng.uniform(0, 1, n)) * (1 - 1e-12)
        xt = rad * np.exp(1j * th)
        x = params.unreduce_x(xt)
        z1 = ry1 * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * math.pi * rng.uniform(0, 1, n)) * (1 - 1e-12)
        z2 = ry2 * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * math.pi * rng.uniform(0, 1, n)) * (1 - 1e-12)
        y1, y2 = (z1, z2) if params.orientation == 1 else (z2, z1)
        return np.stack([x, y1, y2], axis=1)

    return sample(params.r_prime, params.r1_prime, params.r2_prime), sample(params.r, params.r1, params.r2)


def domain_point_cloud(params: StableDomainParams, n: int = 101, y1: complex = 0.0, y2: complex = 0.0):
    """Grid of x over D(0, r) with the Omega flag at fixed y: rows (re x, im x, flag)."""
    re = np.linspace(-params.r, params.r, n)
    X = (re[:, None] + 1j * re[None, :]).ravel() * params.lam / abs(params.lam)
    flag = in_stable_domain(X, y1, y2, params)
    return np.stack([X.real, X.imag, flag.astype(float)], axis=1)


# ----------------------------------------------------------------- fields
def _poly_evaluator(S: TruncatedSeries) -> Callable:
    """Fast scalar evaluator of a truncated series."""
    C = np.asarray(S.coeffs, dtype=complex)
    K1, K2 = monomial_exponents(S.trunc_y)
    nx = S.trunc_x + 1
    ny = S.trunc_y + 1
    ex = np.arange(nx)
    ey = np.arange(ny)

    def f(x, y1, y2):
        xp = x ** ex
        p1 = y1 ** ey
        p2 = y2 ** ey
        return complex(xp @ C @ (p1[K1] * p2[K2]))

    return f


@dataclass
class SectorialField:
    """Z = Y0 + C C + R Rad with callables C(x, y1, y2) and R(x, y1, y2).

    ``c`` is the resonant profile c(v) (coefficients, c[0] ignored) of the
    normal form the field is to be conjugated to.
    """

    lam: complex
    a1: complex
    a2: complex
    C: Callable
    R: Callable
    c: np.ndarray

    @property
    def a(self) -> complex:
        return self.a1 + self.a2

    @property
    def b(self) -> complex:
        return (self.a2 - self.a1) / 2

    def c_of(self, v: complex) -> complex:
        return complex(np.polynomial.polynomial.polyval(v, np.concatenate([[0], self.c[1:]])))

    @classmethod
    def from_order_n(cls, state: OrderNField) -> "SectorialField":
        c = np.asarray(state.d(), dtype=complex).copy()
        c[0] = 0
        return cls(complex(state.lam), complex(state.a1), complex(state.a2),
                   _poly_evaluator(state.D), _poly_evaluator(state.R), c)

    @classmethod
    def normal_form(cls, lam: complex, a1: complex, a2: complex, c=(0.0,)) -> "SectorialField":
        c = np.asarray(c, dtype=complex).copy()
        if c.size:
            c[0] = 0
        else:
            c = np.zeros(1, dtype=complex)
        cf = lambda x, y1, y2: complex(np.polynomial.polynomial.polyval(y1 * y2, c))
        return cls(complex(lam), complex(a1), complex(a2), cf, lambda x, y1, y2: 0j, c)

    def vector(self, x, y1, y2) -> tuple[complex, complex, complex]:
        Cv = self.C(x, y1, y2)
        Rv = self.R(x, y1, y2)
        return (x * x, y1 * (-self.lam + self.a1 * x - Cv + Rv), y2 * (self.lam + self.a2 * x + Cv + Rv))

    def kappa(self, x, y1, y2) -> complex:
        return self.lam + self.b * x + self.C(x, y1, y2)


def field_function(Y) -> Callable:
    """A callable (x, y1, y2) -> (x^2, X1, X2) from a field-like object."""
    if isinstance(Y, SectorialField):
        return Y.vector
    if isinstance(Y, FiberedVectorField):
        e1, e2 = _poly_evaluator(Y.X1), _poly_evaluator(Y.X2)
        return lambda x, y1, y2: (x * x, e1(x, y1, y2), e2(x, y1, y2))
    if callable(Y):
        return Y
    raise ValidationError("expected a SectorialField, a FiberedVectorField or a callable")


# ----------------------------------------------------------------- asymptotic paths
@dataclass
class Trajectory:
    """Samples of an asymptotic path; ``sol`` is the dense output in log-time s = log(1 + t)."""

    t: np.ndarray
    x: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    sol: object = None
    aux: np.ndarray | None = None


def _run(rhs, u0, s_end, rtol, atol, dense=True):
    sol = solve_ivp(rhs, (0.0, s_end), u0, method="DOP853", rtol=rtol, atol=atol, dense_output=dense)
    if sol.status != 0:
        if "step size" in (sol.message or "").lower():
            raise StepSizeUnderflow(sol.message)
        raise StepSizeUnderflow(f"integration failed: {sol.message}")
    return sol


def _unrotate(s, u1, u2, sign: int):
    """Actual (y1, y2) from the rotating-frame values u_j = y_j e^(-+i t)."""
    rot = np.exp(-1j * sign * np.expm1(s))
    return u1 * rot, u2 / rot


def _path_rhs(Z: SectorialField, sign: int, extra: Callable | None = None):
    """Path equations in log-time s = log(1 + t) and rotating-frame y.

    Along X = (+-i/kappa) Z one has d log y1/dt = -+i + (+-i)(a x/2 + R)/kappa
    and d log y2/dt = +-i + (+-i)(a x/2 + R)/kappa, so u1 = y1 e^(+-i t) and
    u2 = y2 e^(-+i t) carry no unit-rate rotation; for normal forms the right
    hand side is then smooth on the whole (very long) path.
    """
    si = 1j * sign
    half_a = 0.5 * (Z.a1 + Z.a2)

    def rhs(s, u):
        x = u[0]
        y1, y2 = _unrotate(s, u[1], u[2], sign)
        Cv = Z.C(x, y1, y2)
        Rv = Z.R(x, y1, y2)
        k = Z.lam + Z.b * x + Cv
        g = si / k * math.exp(s)  # dt/ds = 1 + t = e^s
        w = g * (half_a * x + Rv)
        out = [g * x * x, u[1] * w, u[2] * w]
        if extra is not None:
            out.extend(extra(x, y1, y2, Cv, Rv, k, g))
        return out

    return rhs


def flow_asymptotic_path(Z: SectorialField, p0: Sequence[complex], T: float, orientation=1,
                         params: StableDomainParams | None = None, n_samples: int = 400,
                         rtol: float = RTOL) -> Trajectory:
    """Integrate dx/dt = +-i x^2/kappa (and the y equations) for t in [0, T].

    Time is reparametrized by s = log(1 + t).  When ``params`` is given every
    sample is checked against the stable domain and DomainExit is raised on
    the first sample outside it.
    """
    sign = _orient(orientation)
    u0 = np.array(p0, dtype=complex)
    scale = max(abs(u0[0]), 1e-300)
    atol = 1e-14 * np.array([scale, max(abs(u0[1]), 1e-12), max(abs(u0[2]), 1e-12)])
    s_end = math.log1p(T)
    sol = _run(_path_rhs(Z, sign), u0, s_end, rtol, atol)
    s = np.linspace(0.0, s_end, n_samples)
    U = sol.sol(s)
    y1, y2 = _unrotate(s, U[1], U[2], sign)
    traj = Trajectory(np.expm1(s), U[0], y1, y2, sol)
    if params is not None:
        ok = in_stable_domain(traj.x, traj.y1, traj.y2, params)
        if not ok.all():
            k = int(np.argmin(ok))
            raise DomainExit(f"trajectory left the stable domain at t = {traj.t[k]:.6g}")
    return traj


def model_flow_closed_form(x0: complex, t: np.ndarray, lam: complex, b: complex, orientation=1) -> np.ndarray:
    """x(t) for dx/dt = +-i x^2/(lam + b x), from -lam/x + b log x = -lam/x0 + b log x0 +- i t.

    Solved by Newton's method continued along t (the logarithm is followed
    continuously from x0).
    """
    sign = _orient(orientation)
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape, dtype=complex)
    x = complex(x0)
    L0 = -lam / x0 + b * np.log(x0)
    logx = np.log(x0)
    for i, ti in enumerate(t):
        target = L0 + sign * 1j * ti
        # predictor: model without the log term
        for _ in range(60):
            lx = logx + np.log(x / np.exp(logx))
            F = -lam / x + b * lx - target
            dF = lam / x ** 2 + b / x
            dx = F / dF
            x -= dx
            if abs(dx) < 1e-16 * abs(x):
                break
        logx = logx + np.log(x / np.exp(logx))
        out[i] = x
    return out


# ----------------------------------------------------------------- homological equation
def _tail_done(F_end: complex, t_end: float, M: int, value: complex) -> bool:
    """The tail of an integrand decaying like t^-(M+1) beyond t_end is about |F| t / M."""
    tail = abs(F_end) * (1 + t_end) / max(M, 1)
    return tail < TAIL_TOL * max(abs(value), 1e-300) or tail < 1e-300


def solve_homological_sectorial(Z: SectorialField, A: Callable, M: int, p0: Sequence[complex],
                                orientation=1, T0: float | None = None, rtol: float = RTOL,
                                max_T: float = 1e14) -> complex:
    """alpha(p0) = -(+-i) int_0^inf x^(M+1) A(x, y) / kappa dt along the asymptotic path.

    Solves L_Z(alpha) = x^(M+1) A.  The integration horizon grows until the
    t^-(M+1) tail estimate falls below 1e-12 relative.
    """
    sign = _orient(orientation)
    u0 = np.array(list(p0) + [0.0], dtype=complex)
    if A is None:
        return 0j

    def extra(x, y1, y2, Cv, Rv, k, g):
        return [-g * x ** (M + 1) * A(x, y1, y2)]

    rhs = _path_rhs(Z, sign, extra)
    T = T0 if T0 is not None else 1e3 / max(abs(u0[0]), 1e-12)
    scale = abs(u0[0])
    ymag = max(abs(u0[1]), abs(u0[2]), 1e-12)
    atol = np.array([1e-14 * scale, 1e-14 * ymag, 1e-14 * ymag, 1e-16 * scale ** M * ymag])
    s0, u = 0.0, u0
    while True:
        s_end = math.log1p(T)
        sol = solve_ivp(rhs, (s0, s_end), u, method="DOP853", rtol=rtol, atol=atol)
        if sol.status != 0:
            raise StepSizeUnderflow(sol.message)
        u = sol.y[:, -1]
        value = u[3]
        x = u[0]
        y1, y2 = _unrotate(s_end, u[1], u[2], sign)
        F = x ** (M + 1) * A(x, y1, y2) / Z.kappa(x, y1, y2)
        if _tail_done(F, T, M, value) or T >= max_T:
            return complex(value)
        s0, T = s_end, T * 100


# ----------------------------------------------------------------- sectorial maps
@dataclass
class FormalTail:
    """Formal solutions rho^, chi~^ used for the part of a path close to x = 0.

    ``top`` holds the two highest retained x-orders; their size at a point
    estimates the truncation error of the formal evaluation there.
    """

    rho: Callable
    chi: Callable
    top_rho: Callable
    top_chi: Callable

    @classmethod
    def from_map(cls, M, reliable_x: int) -> "FormalTail":
        l1 = log_unit(M.phi1.div_y(1, 1e-9))
        l2 = log_unit(M.phi2.div_y(2, 1e-9))
        rho = ((l1 + l2) * 0.5).truncate(reliable_x, None)
        chi = ((l2 - l1) * 0.5).truncate(reliable_x, None)
        return cls(_poly_evaluator(rho), _poly_evaluator(chi),
                   _poly_evaluator(rho.x_part(reliable_x - 1)), _poly_evaluator(chi.x_part(reliable_x - 1)))

    def error(self, x, y1, y2) -> float:
        return abs(self.top_rho(x, y1, y2)) + abs(self.top_chi(x, y1, y2))


@dataclass
class SectorialMap:
    """Phi = Psi o Phi_hat: formal prefix map followed by the sectorial part.

    Psi(x, y) = (x, y1 e^(rho - chi), y2 e^(rho + chi)) where rho solves
    L_Z rho = -R and chi~ = chi o phi solves L_Z chi~ = -(C - c(y1 y2 e^(2 rho))).
    Both are path integrals along the asymptotic path; once the path is close
    enough to x = 0 that the formal solutions are accurate to ``switch_tol``,
    the rest of the path is replaced by their values (without a formal tail
    the integrals run until the t^-(M+1) tail bound drops below 1e-12).
    """

    Z: SectorialField
    orientation: int
    N: int
    prefix: Callable | None = None
    tail: FormalTail | None = None
    rtol: float = RTOL
    switch_tol: float = 1e-17

    def psi(self, x, y1, y2) -> tuple[complex, complex, complex]:
        rho, chi = self.exponents(x, y1, y2)
        return complex(x), y1 * np.exp(rho - chi), y2 * np.exp(rho + chi)

    def _path(self, x, y1, y2):
        """Integrate the path with q(t) = +-i int_0^t R/kappa until the switch point."""
        Z, sign = self.Z, self.orientation

        def extra(xx, u1, u2, Cv, Rv, k, g):
            return [g * Rv]

        rhs = _path_rhs(Z, sign, extra)
        ymag = max(abs(y1), abs(y2))
        scale = abs(x)
        atol = np.array([1e-14 * scale, 1e-14 * ymag, 1e-14 * ymag, 1e-18 * ymag])
        u = np.array([x, y1, y2, 0j])
        pieces = []
        s0, ds = 0.0, 0.25
        M = self.N + 1
        while True:
            sol = _run(rhs, u, s0 + ds, self.rtol, atol) if s0 == 0.0 else None
            if sol is None:
                sol = solve_ivp(rhs, (s0, s0 + ds), u, method="DOP853", rtol=self.rtol, atol=atol,
                                dense_output=True)
                if sol.status != 0:
                    raise StepSizeUnderflow(sol.message)
            pieces.append(sol)
            s0 += ds
            u = sol.y[:, -1]
            v1, v2 = _unrotate(s0, u[1], u[2], sign)
            end = np.array([u[0], v1, v2, u[3]])
            if self.tail is not None:
                if self.tail.error(u[0], v1, v2) < self.switch_tol:
                    return pieces, end, True
            else:
                F = Z.R(u[0], v1, v2) / Z.kappa(u[0], v1, v2)
                if _tail_done(F, math.expm1(s0), M, u[3]):
                    return pieces, end, False
            if s0 > 40.0:
                raise StepSizeUnderflow("asymptotic path did not reach the switch region")
            ds = min(2 * ds, 1.0)

    def exponents(self, x, y1, y2) -> tuple[complex, complex]:
        """(rho, chi~) at (x, y) in the prepared coordinates."""
        Z, sign = self.Z, self.orientation
        x, y1, y2 = complex(x), complex(y1), complex(y2)
        if y1 == 0 and y2 == 0:
            return 0j, 0j
        si = 1j * sign
        pieces, u1, switched = self._path(x, y1, y2)
        rho_end = self.tail.rho(u1[0], u1[1], u1[2]) if switched else 0j
        chi_end = self.tail.chi(u1[0], u1[1], u1[2]) if switched else 0j
        rho0 = complex(u1[3] + rho_end)

        def dense(s):
            for p in pieces:
                if s <= p.t[-1] + 1e-15:
                    return p.sol(s)
            return pieces[-1].sol(s)

        def rhs2(s, w):
            xx, w1, w2, q = dense(s)
            v1, v2 = _unrotate(s, w1, w2, sign)
            rho = rho0 - q
            Cv = Z.C(xx, v1, v2)
            k = Z.lam + Z.b * xx + Cv
            return [si / k * math.exp(s) * (Cv - Z.c_of(v1 * v2 * np.exp(2 * rho)))]

        ymag = max(abs(y1), abs(y2))
        total = 0j
        for p in pieces:
            sol2 = solve_ivp(rhs2, (p.t[0], p.t[-1]), [0j], method="DOP853", rtol=self.rtol,
                             atol=1e-18 * ymag)
            total += sol2.y[0, -1]
        return rho0, complex(total + chi_end)

    def __call__(self, x, y1, y2):
        if self.prefix is not None:
            x, y1, y2 = self.prefix(x, y1, y2)
        return self.psi(complex(np.asarray(x)), complex(np.asarray(y1)), complex(np.asarray(y2)))


@dataclass
class SectorialNormalization:
    formal: NormalizationResult
    Z: SectorialField
    plus: SectorialMap
    minus: SectorialMap
    N: int

    def target_field(self) -> SectorialField:
        p = self.formal.params
        return SectorialField.normal_form(p.lam, p.a1, p.a2, self.Z.c)

    def map(self, orientation) -> SectorialMap:
        return self.plus if _orient(orientation) == 1 else self.minus


def sectorial_normalize(Y: FiberedVectorField, N: int, tol: float = 1e-9, rtol: float = RTOL,
                        formal_tail: bool = True) -> SectorialNormalization:
    """Sectorial normalizing maps Phi+ and Phi- for a polynomial field Y.

    Y is first normalized formally up to order N + 2 (the remainders D, R of
    the prepared field are then O(x^(N+2)) and are used as polynomials); the
    sectorial part then removes them by the radial (rho) and tangential (chi)
    homological equations solved along asymptotic paths.
    """
    if N < 1:
        raise ValidationError("the remainder order N must be >= 1")
    formal = normalize_up_to_order(Y, N + 2, tol)
    p = formal.params
    if complex(p.a1 + p.a2).real <= 0:
        raise ValidationError("sectorial normalization needs Re(a1 + a2) > 0")
    Z = SectorialField.from_order_n(formal.state)
    tail = None
    if formal_tail:
        tx = formal.state.D.trunc_x
        Mhat, _ = normalize_to_order(formal.state, tx + 1)
        tail = FormalTail.from_map(Mhat, max(tx - MAP_X_LAG, N + 2))
    prefix = formal.map.evaluate
    return SectorialNormalization(formal, Z, SectorialMap(Z, 1, N, prefix, tail, rtol),
                                  SectorialMap(Z, -1, N, prefix, tail, rtol), N)


def conjugacy_residual(Phi: Callable, Y, Y_norm, points, step: float = 1e-6) -> float:
    """max over points of |D Phi . Y - Y_norm o Phi| (centered difference along Y).

    Phi is holomorphic, so D Phi(p) . v is the derivative of Phi(p + h v) in
    the real parameter h; the step is ``step`` times the size of p.
    """
    fY = field_function(Y)
    fN = field_function(Y_norm)
    worst = 0.0
    for p in points:
        p = np.asarray(p, dtype=complex)
        v = np.asarray(fY(*p), dtype=complex)
        scale = max(np.abs(p).max(), 1e-300)
        h = step * scale / max(np.abs(v).max(), 1e-300)
        fp = np.asarray(Phi(*(p + h * v)), dtype=complex)
        fm = np.asarray(Phi(*(p - h * v)), dtype=complex)
        d = (fp - fm) / (2 * h)
        q = np.asarray(Phi(*p), dtype=complex)
        n = np.asarray(fN(*q), dtype=complex)
        worst = max(worst, float(np.abs(d - n).max()))
    return worst


def flatness_fit(xs, diffs) -> tuple[float, float]:
    """Least-squares fit log|diff| = A - B/|x|; returns (A, B)."""
    xs = np.abs(np.asarray(xs, dtype=complex))
    d = np.asarray(diffs, dtype=float)
    M = np.stack([np.ones_like(xs), -1.0 / xs], axis=1)
    (A, B), *_ = np.linalg.lstsq(M, np.log(d), rcond=None)
    return float(A), float(B)
