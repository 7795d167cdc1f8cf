"""Lyapunov functional along a wave profile.

    V(z) = W1 + S* W2 + V* W3 + d I* W4,   g(x) = x - 1 - ln x

W1 is the pointwise entropy term; W2..W4 are differences of unit window
integrals of g over [z - 1, z] and [z, z + 1].  Along an exact profile,
dV/dz is a sum of non-positive terms and vanishes only at E*.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import LatticeWaveError
from .model import Equilibrium, ModelParams, derived_rates
from .profile import Profile

NONPOSITIVE_TOL = 1e-12
AGREEMENT_RTOL = 1e-4
AGREEMENT_ATOL = 1e-10
SMALL_DERIVATIVE = 1e-8
SIGMA_RTOL = 1e-10


class LyapunovFailure(LatticeWaveError):
    pass


def g(x):
    """x - 1 - ln x for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("g is defined only for x > 0")
    out = x - 1.0 - np.log(x)
    return out.item() if out.ndim == 0 else out


def _window_integrals(G: np.ndarray, h: float, m: int) -> np.ndarray:
    # trapezoid over [z-1, z] minus over [z, z+1] on nodes m .. n-1-m
    C = np.concatenate([[0.0], np.cumsum(0.5 * h * (G[1:] + G[:-1]))])
    j = np.arange(m, len(G) - m)
    return (C[j] - C[j - m]) - (C[j + m] - C[j])


def lyapunov_components(pr: Profile, p: ModelParams, Estar: Equilibrium):
    """(j, W1, W2, W3, W4) on every node at least one unit from both ends."""
    Ss, Vs, Is = Estar
    S, V, I = pr.S, pr.V, pr.I
    m = pr.shift
    j = np.arange(m, pr.n - m)
    for name, arr in (("S", S), ("V", V), ("I", I)):
        if np.any(arr <= 0):
            raise ValueError(f"compartment {name} must be positive on the window band")
    gS, gV, gI = g(S / Ss), g(V / Vs), g(I / Is)
    W1 = pr.c * (Ss * gS[j] + Vs * gV[j] + Is * gI[j])
    W2 = _window_integrals(gS, pr.h, m)
    W3 = _window_integrals(gV, pr.h, m)
    W4 = _window_integrals(gI, pr.h, m)
    return j, W1, W2, W3, W4


def lyapunov_values(pr: Profile, p: ModelParams, Estar: Equilibrium):
    j, W1, W2, W3, W4 = lyapunov_components(pr, p, Estar)
    Ss, Vs, Is = Estar
    return j, W1 + Ss * W2 + Vs * W3 + p.d * Is * W4


def lyapunov_value(pr: Profile, node: int, p: ModelParams, Estar: Equilibrium) -> float:
    """V at grid node index ``node`` (must be at least one unit from both ends)."""
    m = pr.shift
    if not m <= node <= pr.n - 1 - m:
        raise IndexError(f"node {node} is within one unit of the domain boundary")
    lo, hi = node - m, node + m + 1
    sub = Profile(1.0, pr.h, pr.c, pr.S[lo:hi], pr.V[lo:hi], pr.I[lo:hi])
    _, vals = lyapunov_values(sub, p, Estar)
    return float(vals[0])


def lyapunov_derivative(S, V, I, S_left, S_right, V_left, V_right, I_left, I_right, p: ModelParams, Estar):
    """Closed-form dV/dz from node values and their unit shifts."""
    Ss, Vs, Is = Estar
    mu2 = derived_rates(p).mu2
    a = Ss / S
    b = S / Ss
    v = V / Vs
    q = S * Vs / (Ss * V)
    return (
        p.mu * Ss * (2.0 - a - b)
        + mu2 * Vs * (3.0 - a - v - q)
        - p.beta1 * Ss * Is * (g(a) + g(b))
        - p.beta2 * Vs * Is * (g(a) + g(q) + g(v))
        - Ss * (g(S_left / S) + g(S_right / S))
        - Vs * (g(V_left / V) + g(V_right / V))
        - p.d * Is * (g(I_left / I) + g(I_right / I))
    )


@dataclass
class LyapunovTrace:
    zeta: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    dV_fd: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    W3: np.ndarray
    W4: np.ndarray
    max_dV: float = 0.0
    max_increase: float = 0.0
    worst_agreement: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["zeta", "V", "dVdzeta", "W1", "W2", "W3", "W4"])
            for row in zip(self.zeta, self.V, self.dV, self.W1, self.W2, self.W3, self.W4):
                w.writerow([f"{x:.17g}" for x in row])


def lyapunov_derivative_check(pr: Profile, p: ModelParams, Estar: Equilibrium, raise_on_failure: bool = False):
    """Trace of V and dV/dz over the interior band with the certification checks.

    Checks: dV/dz <= 1e-12 at every node, V non-increasing node to node, and
    the closed-form derivative matches the centred difference of V (relative
    1e-4 where |dV/dz| > 1e-8, absolute 1e-10 elsewhere).
    """
    j, W1, W2, W3, W4 = lyapunov_components(pr, p, Estar)
    Ss, Vs, Is = Estar
    Vals = W1 + Ss * W2 + Vs * W3 + p.d * Is * W4
    m = pr.shift
    S, V, I = pr.S, pr.V, pr.I
    dV = lyapunov_derivative(S[j], V[j], I[j], S[j - m], S[j + m], V[j - m], V[j + m], I[j - m], I[j + m], p, Estar)

    # centred difference is available on all but the outermost band nodes
    fd = np.full_like(Vals, np.nan)
    fd[1:-1] = (Vals[2:] - Vals[:-2]) / (2.0 * pr.h)

    z = pr.z[j]
    failures = []
    bad = np.nonzero(dV > NONPOSITIVE_TOL)[0]
    if bad.size:
        failures.append(("nonpositive", float(z[bad[0]]), float(dV[bad[0]])))
    inc = np.diff(Vals)
    bad = np.nonzero(inc > NONPOSITIVE_TOL)[0]
    if bad.size:
        failures.append(("nonincreasing", float(z[bad[0]]), float(inc[bad[0]])))
    inner = slice(1, -1)
    err = np.abs(dV[inner] - fd[inner])
    big = np.abs(dV[inner]) > SMALL_DERIVATIVE
    rel = np.where(big, err / np.maximum(np.abs(dV[inner]), 1e-300), 0.0)
    ok = np.where(big, rel <= AGREEMENT_RTOL, err <= AGREEMENT_ATOL)
    bad = np.nonzero(~ok)[0]
    if bad.size:
        failures.append(("agreement", float(z[inner][bad[0]]), float(err[bad[0]])))
    trace = LyapunovTrace(
        z, Vals, dV, fd, W1, W2, W3, W4,
        max_dV=float(np.max(dV)),
        max_increase=float(np.max(inc)) if inc.size else 0.0,
        worst_agreement=float(np.max(rel)) if rel.size else 0.0,
        failures=failures,
    )
    if raise_on_failure and failures:
        kind, zeta, value = failures[0]
        raise LyapunovFailure(f"{kind} check failed at zeta = {zeta:.6g} (value {value:.3e})")
    return trace


# -- the Sigma identity -------------------------------------------------------


def sigma_raw(S, V, I, p: ModelParams, Estar: Equilibrium):
    """Reaction part of dW1/dz before using the equilibrium relations."""
    Ss, Vs, Is = Estar
    mu1, mu2, mu3 = derived_rates(p)
    return (
        (1.0 - Ss / S) * (p.Lambda - mu1 * S - p.beta1 * S * I)
        + (1.0 - Vs / V) * (p.alpha * S - p.beta2 * V * I - mu2 * V)
        + (1.0 - Is / I) * ((p.beta1 * S + p.beta2 * V) * I - mu3 * I)
    )


def sigma_regrouped(S, V, I, p: ModelParams, Estar: Equilibrium):
    """Same quantity rewritten with E* as a sum of sign-definite terms."""
    Ss, Vs, Is = Estar
    mu2 = derived_rates(p).mu2
    a, b, v, q = Ss / S, S / Ss, V / Vs, S * Vs / (Ss * V)
    return (
        p.mu * Ss * (2.0 - a - b)
        + mu2 * Vs * (3.0 - a - v - q)
        - p.beta1 * Ss * Is * (g(a) + g(b))
        - p.beta2 * Vs * Is * (g(a) + g(q) + g(v))
    )


def sigma(S, V, I, p: ModelParams, Estar: Equilibrium, rtol: float = SIGMA_RTOL):
    """Sigma at state(s) (S, V, I); raises if the two algebraic forms disagree."""
    raw = np.asarray(sigma_raw(S, V, I, p, Estar), dtype=float)
    reg = np.asarray(sigma_regrouped(S, V, I, p, Estar), dtype=float)
    # absolute floor covers cancellation when Sigma itself is ~0
    scale = np.maximum(np.abs(raw), np.abs(reg))
    floor = 1e-13 * (1.0 + np.abs(S) + np.abs(V) + np.abs(I) + np.abs(1.0 / I))
    bad = np.abs(raw - reg) > rtol * scale + floor
    if np.any(bad):
        idx = np.argmax(bad)
        raise LyapunovFailure(
            f"Sigma forms disagree: raw {raw.ravel()[idx]!r} vs regrouped {reg.ravel()[idx]!r}"
        )
    return raw.item() if raw.ndim == 0 else raw


def sigma_at(pr: Profile, node: int, p: ModelParams, Estar: Equilibrium) -> float:
    return sigma(pr.S[node], pr.V[node], pr.I[node], p, Estar)
