"""Characteristic function of the linearised infectious equation at E0.

    Delta(r, c) = d (e^r + e^-r - 2) - c r + beta1 S0 + beta2 V0 - mu3

Its tangency point (r*, c*) gives the critical wave speed.  For c > c* the
function has two positive roots r1 < r* < r2; for 0 < c < c* it is positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .errors import AtOrBelowCritical, ConvergenceError, DegenerateDiffusion, SubcriticalError
from .model import ModelParams, basic_reproduction_number, derived_rates, disease_free_equilibrium, infection_pressure

ROOT_TOL = 1e-10
OPTIMALITY_TOL = 1e-9
GOLDEN_WIDTH = 1e-6
R_MAX = 700.0
# |c - c*| <= CRITICAL_RTOL * c* counts as c == c*
CRITICAL_RTOL = 1e-12

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _cosh_term(r: float) -> float:
    # e^r + e^-r - 2 without cancellation near r = 0
    return 4.0 * math.sinh(0.5 * r) ** 2


def delta(r: float, c: float, p: ModelParams) -> float:
    return p.d * _cosh_term(r) - c * r + infection_pressure(p) - derived_rates(p).mu3


def delta_dr(r: float, c: float, p: ModelParams) -> float:
    return 2.0 * p.d * math.sinh(r) - c


def delta_drr(r: float, p: ModelParams) -> float:
    return 2.0 * p.d * math.cosh(r)


def upsilon(kappa: float, c: float, p: ModelParams) -> float:
    """d (e^k + e^-k - 2) - c k - mu3: the characteristic function without infection pressure."""
    return p.d * _cosh_term(kappa) - c * kappa - derived_rates(p).mu3


def speed_of_root(r: float, p: ModelParams) -> float:
    """The speed c(r) at which r is a root of Delta(., c)."""
    return (p.d * _cosh_term(r) + infection_pressure(p) - derived_rates(p).mu3) / r


def _require_supercritical(p: ModelParams) -> None:
    if p.d <= 0:
        raise DegenerateDiffusion(f"d must be > 0, got {p.d!r}")
    R0 = basic_reproduction_number(p)
    if R0 <= 1.0:
        raise SubcriticalError(f"R0 = {R0!r} <= 1: no critical wave speed")


def _golden_min(f, lo: float, hi: float, width: float) -> float:
    a, b = lo, hi
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > width:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _safe_newton(f, fprime, lo: float, hi: float, x0: float, tol: float, max_iter: int = 200) -> float:
    """Newton iteration kept inside a sign-change bracket [lo, hi], bisecting when a step leaves it."""
    flo = f(lo)
    x = x0
    for _ in range(max_iter):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx > 0) == (flo > 0):
            lo, flo = x, fx
        else:
            hi = x
        dfx = fprime(x)
        x_new = x - fx / dfx if dfx != 0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 4e-16 * max(1.0, abs(x)) and abs(f(x_new)) <= tol:
            return x_new
        x = x_new
        if hi - lo <= 4e-16 * max(1.0, abs(x)):
            return x
    if abs(f(x)) <= tol:
        return x
    raise ConvergenceError(f"root not converged: |f| = {abs(f(x)):.3e}")


def _doubling_bracket(pred, start: float = 1.0) -> float:
    r = start
    while not pred(r):
        r *= 2.0
        if r > R_MAX:
            raise ConvergenceError(f"bracket search exceeded r = {R_MAX:g}")
    return min(r, R_MAX)


def critical_speed(p: ModelParams) -> tuple[float, float]:
    """Return (c*, r*), the tangency point of Delta.

    c* is the minimum over r > 0 of :func:`speed_of_root`.  The minimiser is
    located by golden-section search on a doubling bracket and polished by
    Newton's method on the optimality condition c'(r) = 0.
    """
    _require_supercritical(p)
    K = infection_pressure(p) - derived_rates(p).mu3

    # r^2 c'(r) = 2 d r sinh r - d (e^r + e^-r - 2) - K, increasing on r > 0
    def opt(r):
        return 2.0 * p.d * r * math.sinh(r) - p.d * _cosh_term(r) - K

    def opt_prime(r):
        return 2.0 * p.d * r * math.cosh(r)

    hi = _doubling_bracket(lambda r: opt(r) > 0.0)
    r0 = _golden_min(lambda r: speed_of_root(r, p), hi * 1e-12, hi, GOLDEN_WIDTH)
    lo = 0.5 * r0
    while opt(lo) >= 0.0:
        lo *= 0.5
    r_star = _safe_newton(opt, opt_prime, lo, hi, r0, tol=1e-12 * max(1.0, K))
    c_star = speed_of_root(r_star, p)
    if abs(delta_dr(r_star, c_star, p)) > OPTIMALITY_TOL or abs(delta(r_star, c_star, p)) > OPTIMALITY_TOL:
        raise ConvergenceError("critical pair does not satisfy the tangency conditions")
    return c_star, r_star


def lambda_roots(c: float, p: ModelParams, critical: Optional[tuple[float, float]] = None) -> tuple[float, float]:
    """Roots r1 < r2 of Delta(., c) for c > c*.

    Raises :class:`AtOrBelowCritical` for c <= c*; when c equals c* the
    exception's ``tangent_root`` holds r*.
    """
    c_star, r_star = critical if critical is not None else critical_speed(p)
    if abs(c - c_star) <= CRITICAL_RTOL * c_star:
        raise AtOrBelowCritical(f"c = {c!r} equals c*: single tangential root", tangent_root=r_star)
    if c < c_star:
        raise AtOrBelowCritical(f"c = {c!r} < c* = {c_star!r}: Delta has no real root")

    def f(r):
        return delta(r, c, p)

    def fp(r):
        return delta_dr(r, c, p)

    # Delta(0, c) > 0 > Delta(r*, c); convexity gives exactly one root on each side of r*
    r1 = _safe_newton(f, fp, 0.0, r_star, 0.5 * r_star, tol=ROOT_TOL)
    hi = _doubling_bracket(lambda r: r > r_star and f(r) > 0.0, start=max(1.0, r_star))
    r2 = _safe_newton(f, fp, r_star, hi, hi, tol=ROOT_TOL)
    return r1, r2


def kappa0(c: float, p: ModelParams, r2: Optional[float] = None) -> float:
    """Unique positive root of :func:`upsilon`; checks r2 < kappa0 when r2 is given."""
    if c <= 0 or p.d <= 0:
        raise ValueError("kappa0 needs c > 0 and d > 0")
    hi = _doubling_bracket(lambda k: upsilon(k, c, p) > 0.0)
    k0 = _safe_newton(
        lambda k: upsilon(k, c, p), lambda k: 2.0 * p.d * math.sinh(k) - c, 0.0, hi, hi, tol=ROOT_TOL
    )
    if r2 is not None and not r2 < k0:
        raise ConvergenceError(f"expected r2 < kappa0, got r2 = {r2!r}, kappa0 = {k0!r}")
    return k0


@dataclass(frozen=True)
class DispersionResult:
    c_star: float
    r_star: float
    c: Optional[float] = None
    r1: Optional[float] = None
    r2: Optional[float] = None


def dispersion_result(p: ModelParams, c: Optional[float] = None) -> DispersionResult:
    c_star, r_star = critical_speed(p)
    if c is None:
        return DispersionResult(c_star, r_star)
    r1, r2 = lambda_roots(c, p, critical=(c_star, r_star))
    return DispersionResult(c_star, r_star, c, r1, r2)


# -- sensitivities -----------------------------------------------------------

SWEEP_PARAMS = ("Lambda", "beta1", "beta2", "alpha", "mu", "gamma", "gamma1", "d")


def delta_param_derivative(r: float, p: ModelParams, name: str) -> float:
    """Partial derivative of Delta(r, c) with respect to one model parameter."""
    L, a = p.Lambda, p.alpha
    mu1, mu2, _ = derived_rates(p)
    S0, V0, _ = disease_free_equilibrium(p)
    # (dS0, dV0, dmu3) for each parameter
    partials = {
        "Lambda": (1.0 / mu1, a / (mu1 * mu2), 0.0),
        "alpha": (-L / mu1**2, L / (mu1 * mu2) - L * a / (mu1**2 * mu2), 0.0),
        "mu": (-L / mu1**2, -L * a / (mu1**2 * mu2) - L * a / (mu1 * mu2**2), 1.0),
        "gamma": (0.0, 0.0, 1.0),
        "gamma1": (0.0, -L * a / (mu1 * mu2**2), 0.0),
    }
    if name == "d":
        return _cosh_term(r)
    if name == "beta1":
        return S0
    if name == "beta2":
        return V0
    if name not in partials:
        raise KeyError(f"unknown parameter {name!r}")
    dS0, dV0, dmu3 = partials[name]
    return p.beta1 * dS0 + p.beta2 * dV0 - dmu3


class SensitivityReport(NamedTuple):
    dc_dgamma1: float
    dc_dd: float
    dc_dbeta1: float
    dc_dbeta2: float
    dc_dR0: float  # R0 varied through beta1 S0 + beta2 V0 at fixed mu3


def speed_sensitivity(p: ModelParams, name: str, critical: Optional[tuple[float, float]] = None) -> float:
    """dc*/dtheta = (dDelta/dtheta)(r*, c*) / r*  (envelope identity)."""
    _, r_star = critical if critical is not None else critical_speed(p)
    return delta_param_derivative(r_star, p, name) / r_star


def _fd_speed(p: ModelParams, name: str) -> float:
    x = getattr(p, name)
    h = 1e-5 * x if x > 0 else 1e-7
    lo = x - h if x - h >= 0 else x
    hi = x + h
    return (critical_speed(p.replace(**{name: hi}))[0] - critical_speed(p.replace(**{name: lo}))[0]) / (hi - lo)


def _fd_speed_r0(p: ModelParams) -> float:
    # scale both transmission rates: R0 -> (1 + s) R0 at fixed mu3
    h = 1e-5
    R0 = basic_reproduction_number(p)
    up = p.replace(beta1=p.beta1 * (1 + h), beta2=p.beta2 * (1 + h))
    dn = p.replace(beta1=p.beta1 * (1 - h), beta2=p.beta2 * (1 - h))
    return (critical_speed(up)[0] - critical_speed(dn)[0]) / (2 * h * R0)


def fd_speed_sensitivities(p: ModelParams) -> SensitivityReport:
    """Central finite-difference counterpart of :func:`speed_sensitivities`."""
    return SensitivityReport(
        _fd_speed(p, "gamma1"), _fd_speed(p, "d"), _fd_speed(p, "beta1"), _fd_speed(p, "beta2"), _fd_speed_r0(p)
    )


def speed_sensitivities(p: ModelParams, verify: bool = True, rtol: float = 1e-4) -> SensitivityReport:
    crit = critical_speed(p)
    mu3 = derived_rates(p).mu3
    report = SensitivityReport(
        speed_sensitivity(p, "gamma1", crit),
        speed_sensitivity(p, "d", crit),
        speed_sensitivity(p, "beta1", crit),
        speed_sensitivity(p, "beta2", crit),
        mu3 / crit[1],
    )
    if verify:
        fd = fd_speed_sensitivities(p)
        for name, a, b in zip(report._fields, report, fd):
            if a == 0.0:
                ok = abs(b) <= 1e-8
            else:
                ok = abs(a - b) <= rtol * abs(a)
            if not ok:
                raise ConvergenceError(f"{name}: analytic {a!r} vs finite difference {b!r}")
    return report
