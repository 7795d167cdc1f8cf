"""Sub- and super-solutions for the wave-profile system and their verification.

Upper functions:  S+ = S0,  V+ = V0,  I+ = exp(r1 z)
Lower functions:  S- = max(S0 (1 - M1 e^{eps1 z}), 0)
                  V- = max(V0 (1 - M2 e^{eps2 z}), 0)
                  I- = max(e^{r1 z} (1 - M3 e^{eps3 z}), 0)

Each lower function has a kink at X_i = -ln(M_i) / eps_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dispersion import critical_speed, delta, lambda_roots
from .errors import ConvergenceError
from .model import ModelParams, derived_rates, disease_free_equilibrium

SLACK = 1e-12
INEQUALITIES = ("super_S", "super_V", "super_I", "sub_S", "sub_V", "sub_I")

# eps1 = eps2 = EPS_FRACTION * min(r1, r2 - r1), eps3 = EPS3_FRACTION * min(eps1, eps2)
EPS_FRACTION = 0.9
EPS3_FRACTION = 0.9
SAFETY = 2.0
M_FLOOR = 1.1


def _ch(e):
    return 4.0 * np.sinh(0.5 * np.asarray(e, dtype=float)) ** 2


@dataclass(frozen=True)
class BoundConstants:
    eps1: float
    eps2: float
    eps3: float
    M1: float
    M2: float
    M3: float
    r1: float
    r2: float
    c: float

    @property
    def X1(self) -> float:
        return -math.log(self.M1) / self.eps1

    @property
    def X2(self) -> float:
        return -math.log(self.M2) / self.eps2

    @property
    def X3(self) -> float:
        return -math.log(self.M3) / self.eps3

    @property
    def kinks(self) -> tuple[float, float, float]:
        return self.X1, self.X2, self.X3

    def with_overrides(self, **changes) -> "BoundConstants":
        values = dict(self.__dict__)
        values.update({k: float(v) for k, v in changes.items()})
        return BoundConstants(**values)


def m1_lower_bound(p: ModelParams, c: float, eps1: float) -> float:
    """Smallest M1 for which the S- inequality holds on z < X1 < 0.

    Uses mu (not mu1) in the denominator, which is the conservative choice.
    """
    den = p.mu + c * eps1 - _ch(eps1)
    if den <= 0:
        raise ConvergenceError("eps1 too large: mu + c eps1 - (e^eps1 + e^-eps1 - 2) <= 0")
    return p.beta1 / float(den)


def m2_lower_bound(p: ModelParams, c: float, eps2: float, M1: float) -> float:
    mu2 = derived_rates(p).mu2
    den = c * eps2 + mu2 - _ch(eps2)
    if den <= 0:
        raise ConvergenceError("M2 denominator c eps2 + mu2 - (e^eps2 + e^-eps2 - 2) <= 0")
    return (mu2 * M1 + p.beta2) / float(den)


def m3_lower_bound(p: ModelParams, c: float, r1: float, eps1, eps2, eps3, M1, M2) -> float:
    """max of the kink-ordering and amplitude requirements on M3."""
    S0, V0, _ = disease_free_equilibrium(p)
    neg = -delta(r1 + eps3, c, p)
    if neg <= 0:
        raise ConvergenceError("Delta(r1 + eps3, c) must be negative")
    amplitude = (p.beta1 * S0 * M1 + p.beta2 * V0 * M2) / neg
    ordering = math.exp(eps3 * max(math.log(M1) / eps1, math.log(M2) / eps2))
    return max(amplitude, ordering)


def choose_bound_constants(
    p: ModelParams, c: float, roots: Optional[tuple[float, float]] = None
) -> BoundConstants:
    """Admissible (eps_i, M_i) for speed c > c*, each M_i a safety factor above its requirement."""
    r1, r2 = roots if roots is not None else lambda_roots(c, p)
    eps1 = EPS_FRACTION * min(r1, r2 - r1)
    while p.mu + c * eps1 - _ch(eps1) <= 0:
        eps1 *= 0.5
    eps2 = eps1
    for _ in range(11):
        mu2 = derived_rates(p).mu2
        if c * eps2 + mu2 - _ch(eps2) > 0:
            break
        eps2 *= 0.5
    else:
        raise ConvergenceError("could not make the M2 denominator positive after 10 halvings of eps2")
    eps3 = EPS3_FRACTION * min(eps1, eps2)

    M1 = max(SAFETY * m1_lower_bound(p, c, eps1), M_FLOOR)
    M2 = max(SAFETY * m2_lower_bound(p, c, eps2, M1), M_FLOOR)
    M3 = max(SAFETY * m3_lower_bound(p, c, r1, eps1, eps2, eps3, M1, M2), M_FLOOR)
    return BoundConstants(eps1, eps2, eps3, M1, M2, M3, r1, r2, c)


# -- evaluation ---------------------------------------------------------------


@dataclass(frozen=True)
class BoundValues:
    S_plus: np.ndarray
    V_plus: np.ndarray
    I_plus: np.ndarray
    S_minus: np.ndarray
    V_minus: np.ndarray
    I_minus: np.ndarray

    def __iter__(self):
        return iter((self.S_plus, self.V_plus, self.I_plus, self.S_minus, self.V_minus, self.I_minus))


def _below_kink(z, X, smooth):
    # exactly zero from the kink on, so no rounding residue at z = X
    return np.where(z < X, np.maximum(smooth, 0.0), 0.0)


def eval_bounds(z, k: BoundConstants, p: ModelParams) -> BoundValues:
    z = np.asarray(z, dtype=float)
    S0, V0, _ = disease_free_equilibrium(p)
    Ip = np.exp(k.r1 * z)
    return BoundValues(
        np.full_like(z, S0),
        np.full_like(z, V0),
        Ip,
        _below_kink(z, k.X1, S0 * (1.0 - k.M1 * np.exp(k.eps1 * z))),
        _below_kink(z, k.X2, V0 * (1.0 - k.M2 * np.exp(k.eps2 * z))),
        _below_kink(z, k.X3, Ip * (1.0 - k.M3 * np.exp(k.eps3 * z))),
    )


def lower_bounds(z, k: BoundConstants, p: ModelParams) -> np.ndarray:
    """(3, n) array of S-, V-, I-."""
    b = eval_bounds(z, k, p)
    return np.array([b.S_minus, b.V_minus, b.I_minus])


def upper_bounds(z, k: BoundConstants, p: ModelParams) -> np.ndarray:
    b = eval_bounds(z, k, p)
    return np.array([b.S_plus, b.V_plus, b.I_plus])


def _bound_derivatives(z, k: BoundConstants, p: ModelParams):
    # one-sided: the smooth branch below the kink, zero above
    S0, V0, _ = disease_free_equilibrium(p)
    dSm = np.where(z < k.X1, -S0 * k.M1 * k.eps1 * np.exp(k.eps1 * z), 0.0)
    dVm = np.where(z < k.X2, -V0 * k.M2 * k.eps2 * np.exp(k.eps2 * z), 0.0)
    dIm = np.where(
        z < k.X3,
        k.r1 * np.exp(k.r1 * z) - k.M3 * (k.r1 + k.eps3) * np.exp((k.r1 + k.eps3) * z),
        0.0,
    )
    dIp = k.r1 * np.exp(k.r1 * z)
    return dIp, dSm, dVm, dIm


def subsuper_residuals(z, k: BoundConstants, p: ModelParams, c: float) -> np.ndarray:
    """(n, 6) array; column j is the signed violation of inequality INEQUALITIES[j] (<= 0 means satisfied)."""
    z = np.asarray(z, dtype=float)
    mu1, mu2, mu3 = derived_rates(p)
    Sp, Vp, Ip, Sm, Vm, Im = eval_bounds(z, k, p)
    SpR, VpR, IpR, SmR, VmR, ImR = eval_bounds(z + 1.0, k, p)
    SpL, VpL, IpL, SmL, VmL, ImL = eval_bounds(z - 1.0, k, p)
    dIp, dSm, dVm, dIm = _bound_derivatives(z, k, p)

    def lap(r, m, l):
        return r - 2.0 * m + l

    out = np.empty((z.size, 6))
    # super-solutions: rhs - c u' <= 0
    out[:, 0] = lap(SpR, Sp, SpL) + p.Lambda - mu1 * Sp - p.beta1 * Sp * Im
    out[:, 1] = lap(VpR, Vp, VpL) + p.alpha * Sp - p.beta2 * Vp * Im - mu2 * Vp
    out[:, 2] = p.d * lap(IpR, Ip, IpL) + (p.beta1 * Sp + p.beta2 * Vp) * Ip - mu3 * Ip - c * dIp
    # sub-solutions: c u' - rhs <= 0
    out[:, 3] = c * dSm - (lap(SmR, Sm, SmL) + p.Lambda - mu1 * Sm - p.beta1 * Sm * Ip)
    out[:, 4] = c * dVm - (lap(VmR, Vm, VmL) + p.alpha * Sm - p.beta2 * Vm * Ip - mu2 * Vm)
    out[:, 5] = c * dIm - (p.d * lap(ImR, Im, ImL) + (p.beta1 * Sm + p.beta2 * Vm) * Im - mu3 * Im)
    return out


def kink_free_grid(k: BoundConstants, lo: float, hi: float, n: int) -> np.ndarray:
    """Uniform grid on [lo, hi] with nodes closer than one step to a kink removed."""
    z = np.linspace(lo, hi, n)
    step = (hi - lo) / (n - 1)
    keep = np.ones(n, dtype=bool)
    for X in k.kinks:
        keep &= np.abs(z - X) >= step
    return z[keep]


@dataclass
class SubSuperReport:
    passed: bool
    max_violation: float
    worst_zeta: float
    worst_inequality: str
    zeta: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)

    def failures(self, slack: float = SLACK) -> list[tuple[str, float, float]]:
        """(inequality, zeta, residual) for every violated point."""
        rows, cols = np.nonzero(self.residuals > slack)
        return [(INEQUALITIES[j], float(self.zeta[i]), float(self.residuals[i, j])) for i, j in zip(rows, cols)]

    def violated(self, name: str, slack: float = SLACK) -> bool:
        return bool(np.any(self.residuals[:, INEQUALITIES.index(name)] > slack))


def verify_subsuper(k: BoundConstants, p: ModelParams, c: float, grid, slack: float = SLACK) -> SubSuperReport:
    """Evaluate all six differential inequalities at every grid point.

    The grid should avoid the kinks X1, X2, X3 (see :func:`kink_free_grid`);
    derivatives are taken from the branch on which each point lies.
    """
    z = np.asarray(grid, dtype=float)
    res = subsuper_residuals(z, k, p, c)
    i, j = np.unravel_index(np.argmax(res), res.shape)
    worst = float(res[i, j])
    return SubSuperReport(worst <= slack, worst, float(z[i]), INEQUALITIES[j], z, res)


def default_bounds(p: ModelParams, c: float) -> BoundConstants:
    c_star, _ = critical_speed(p)
    if c <= c_star:
        raise ValueError(f"sub/super-solutions need c > c* = {c_star!r}")
    return choose_bound_constants(p, c)
