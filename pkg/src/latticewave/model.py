"""Model parameters, equilibria and R0 for the lattice SVIR model.

The homogeneous (patch-free) system is

    S' = Lambda - beta1 S I - mu1 S
    V' = alpha S - beta2 V I - mu2 V
    I' = beta1 S I + beta2 V I - mu3 I

with mu1 = alpha + mu, mu2 = gamma1 + mu, mu3 = gamma + mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, NoEndemicEquilibrium, ParameterError

# config-file key -> attribute name
PARAM_KEYS = {
    "lambda": "Lambda",
    "beta1": "beta1",
    "beta2": "beta2",
    "alpha": "alpha",
    "mu": "mu",
    "gamma": "gamma",
    "gamma1": "gamma1",
    "d": "d",
}

EQUILIBRIUM_TOL = 1e-10
NEWTON_SWITCH_WIDTH = 1e-6


@dataclass(frozen=True)
class ModelParams:
    Lambda: float  # recruitment rate
    beta1: float  # transmission S <-> I
    beta2: float  # transmission V <-> I
    alpha: float  # vaccination rate
    mu: float  # natural death rate
    gamma: float  # recovery rate
    gamma1: float  # vaccine-immunity rate
    d: float = 1.0  # infectious diffusivity

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ParameterError(f"{f.name} must be a real number, got {value!r}") from None
            if not math.isfinite(value):
                raise ParameterError(f"{f.name} must be finite, got {value!r}")
            object.__setattr__(self, f.name, value)
        for name in ("Lambda", "mu", "d"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)!r}")
        for name in ("beta1", "beta2", "alpha", "gamma", "gamma1"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.beta1 + self.beta2 <= 0:
            raise ParameterError("beta1 + beta2 must be > 0")

    @classmethod
    def canonical(cls) -> "ModelParams":
        """Reference parameter set used throughout the test-suite (R0 = 10/3)."""
        return cls(Lambda=1.0, beta1=0.3, beta2=0.1, alpha=0.2, mu=0.1, gamma=0.3, gamma1=0.1, d=1.0)

    @classmethod
    def _unchecked(cls, **values) -> "ModelParams":
        # bypasses validation; only for analytic edge-case checks
        obj = object.__new__(cls)
        for f in fields(cls):
            object.__setattr__(obj, f.name, float(values.get(f.name, f.default)))
        return obj

    def replace(self, **changes) -> "ModelParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return type(self)(**values)


class DerivedRates(NamedTuple):
    mu1: float
    mu2: float
    mu3: float


class Equilibrium(NamedTuple):
    S: float
    V: float
    I: float

    def as_array(self) -> np.ndarray:
        return np.array([self.S, self.V, self.I], dtype=float)


def derived_rates(p: ModelParams) -> DerivedRates:
    return DerivedRates(p.alpha + p.mu, p.gamma1 + p.mu, p.gamma + p.mu)


def disease_free_equilibrium(p: ModelParams) -> Equilibrium:
    mu1, mu2, _ = derived_rates(p)
    return Equilibrium(p.Lambda / mu1, p.Lambda * p.alpha / (mu1 * mu2), 0.0)


def infection_pressure(p: ModelParams) -> float:
    """beta1*S0 + beta2*V0, the per-capita infection rate at E0."""
    S0, V0, _ = disease_free_equilibrium(p)
    return p.beta1 * S0 + p.beta2 * V0


def basic_reproduction_number(p: ModelParams) -> float:
    return infection_pressure(p) / derived_rates(p).mu3


def ode_rhs(p: ModelParams, state) -> np.ndarray:
    """Right-hand side of the homogeneous SVI system; accepts (3,) or (3, n) arrays."""
    S, V, I = np.asarray(state, dtype=float)
    mu1, mu2, mu3 = derived_rates(p)
    return np.array(
        [
            p.Lambda - p.beta1 * S * I - mu1 * S,
            p.alpha * S - p.beta2 * V * I - mu2 * V,
            p.beta1 * S * I + p.beta2 * V * I - mu3 * I,
        ]
    )


def _s_of_i(p: ModelParams, I: float) -> float:
    return p.Lambda / (p.beta1 * I + p.alpha + p.mu)


def _v_of_i(p: ModelParams, I: float) -> float:
    return p.alpha * _s_of_i(p, I) / (p.beta2 * I + p.gamma1 + p.mu)


def endemic_balance(p: ModelParams, I: float) -> float:
    """h(I) = beta1 S(I) + beta2 V(I) - mu3, with S, V eliminated via the equilibrium equations.

    h is strictly decreasing on I >= 0, h(0) = mu3 (R0 - 1) and h -> -mu3 as I -> inf.
    """
    return p.beta1 * _s_of_i(p, I) + p.beta2 * _v_of_i(p, I) - (p.gamma + p.mu)


def _endemic_balance_prime(p: ModelParams, I: float) -> float:
    mu1, mu2, _ = derived_rates(p)
    a = p.beta1 * I + mu1
    b = p.beta2 * I + mu2
    S = p.Lambda / a
    dS = -p.beta1 * p.Lambda / a**2
    dV = p.alpha * dS / b - p.alpha * S * p.beta2 / b**2
    return p.beta1 * dS + p.beta2 * dV


def endemic_equilibrium(p: ModelParams, max_iter: int = 400) -> Equilibrium:
    """Positive equilibrium E* for R0 > 1.

    Brackets the root of :func:`endemic_balance` by doubling from I = 1,
    bisects down to a width of 1e-6 and polishes with Newton steps.

    Raises :class:`NoEndemicEquilibrium` when R0 <= 1.
    """
    if basic_reproduction_number(p) <= 1.0:
        raise NoEndemicEquilibrium(f"R0 = {basic_reproduction_number(p)!r} <= 1")
    lo, hi = 0.0, 1.0
    while endemic_balance(p, hi) >= 0.0:
        lo, hi = hi, 2.0 * hi
        if not math.isfinite(hi):
            raise ConvergenceError("could not bracket the endemic infectious level")
    it = 0
    while hi - lo > NEWTON_SWITCH_WIDTH and it < max_iter:
        mid = 0.5 * (lo + hi)
        if endemic_balance(p, mid) > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    I = 0.5 * (lo + hi)
    for _ in range(50):
        step = endemic_balance(p, I) / _endemic_balance_prime(p, I)
        I_new = I - step
        if not lo <= I_new <= hi:
            break
        I = I_new
        if abs(step) <= 1e-16 * max(1.0, I):
            break
    eq = Equilibrium(_s_of_i(p, I), _v_of_i(p, I), I)
    res = np.max(np.abs(ode_rhs(p, eq)))
    if not res <= EQUILIBRIUM_TOL:
        raise ConvergenceError(f"endemic equilibrium residual {res:.3e} exceeds {EQUILIBRIUM_TOL:g}")
    return eq
