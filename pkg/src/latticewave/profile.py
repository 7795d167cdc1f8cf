"""Wave profiles on a truncated domain [-B, B].

The profile is the fixed point of the solution operator of three linear
first-order equations

    c S' + (2 + mu1 + rho1) S = S^(z+1) + S^(z-1) + Lambda + rho1 phi - beta1 phi psi
    c V' + (2 + mu2 + rho2) V = V^(z+1) + V^(z-1) + alpha phi + rho2 vphi - beta2 vphi psi
    c I' + (2d + mu3) I       = d (I^(z+1) + I^(z-1)) + (beta1 phi + beta2 vphi) psi

started from the lower functions at z = -B.  The hat extension (^) holds the
value at B constant to the right and uses the lower function to the left.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .bounds import BoundConstants, choose_bound_constants, lower_bounds, upper_bounds
from .dispersion import critical_speed
from .errors import ConvergenceError, EnvelopeViolation
from .model import ModelParams, derived_rates, disease_free_equilibrium, endemic_equilibrium

ENVELOPE_TOL = 1e-9
RHO_MARGIN = 1.1


@dataclass
class Profile:
    B: float
    h: float
    c: float
    S: np.ndarray
    V: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        self.I = np.asarray(self.I, dtype=float)
        n = self.n
        if not (self.S.shape == self.V.shape == self.I.shape == (n,)):
            raise ValueError(f"profile arrays must have {n} nodes")

    @property
    def shift(self) -> int:
        """Number of grid steps in one lattice unit."""
        return shift_nodes(self.h)

    @property
    def n(self) -> int:
        return int(round(2.0 * self.B / self.h)) + 1

    @property
    def z(self) -> np.ndarray:
        return -self.B + self.h * np.arange(self.n)

    def stacked(self) -> np.ndarray:
        return np.array([self.S, self.V, self.I])

    def interior(self) -> slice:
        """Nodes with -B + 1 < z < B - 1."""
        m = self.shift
        return slice(m + 1, self.n - m - 1)

    def to_csv(self, path) -> None:
        write_profile_csv(path, self)


def shift_nodes(h: float) -> int:
    m = int(round(1.0 / h))
    if m < 1 or abs(m * h - 1.0) > 1e-9:
        raise ValueError(f"1/h must be an integer, got h = {h!r}")
    return m


def write_profile_csv(path, pr: Profile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zeta", "S", "V", "I"])
        for row in zip(pr.z, pr.S, pr.V, pr.I):
            w.writerow([f"{x:.17g}" for x in row])


def read_profile_csv(path, c: float) -> Profile:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["zeta", "S", "V", "I"]:
        raise ValueError(f"{path}: expected header zeta,S,V,I")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    z = data[:, 0]
    h = float((z[-1] - z[0]) / (len(z) - 1))
    B = float(-z[0])
    if abs(B - z[-1]) > 1e-9 * max(1.0, B):
        raise ValueError(f"{path}: grid is not symmetric about 0")
    return Profile(B=B, h=h, c=c, S=data[:, 1], V=data[:, 2], I=data[:, 3])


# -- operator -----------------------------------------------------------------


def solve_linear_first_order(H: np.ndarray, K: float, c: float, h: float, u0: float) -> np.ndarray:
    """Solve c u' + K u = H(z) on a uniform grid with u(z_0) = u0.

    Uses the exact integrating factor with H interpolated linearly between
    nodes, so constant and linear forcings are integrated exactly.
    """
    a = K / c
    x = a * h
    E = math.exp(-x)
    one_minus_E = -math.expm1(-x)
    w0 = (one_minus_E - x * E) / (a * a * h * c)
    w1 = one_minus_E / (a * c) - w0
    f = w0 * H[:-1] + w1 * H[1:]
    out = np.empty_like(H, dtype=float)
    out[0] = u0
    out[1:], _ = lfilter([1.0], [1.0, -E], f, zi=[E * u0])
    return out


@dataclass(frozen=True)
class _Grid:
    z: np.ndarray
    h: float
    m: int
    lower: np.ndarray  # (3, n)
    upper: np.ndarray
    lower_left_ext: np.ndarray  # lower functions at z - 1 for the first m nodes


def _make_grid(B: float, h: float, k: BoundConstants, p: ModelParams) -> _Grid:
    m = shift_nodes(h)
    n = int(round(2.0 * B / h)) + 1
    z = -B + h * np.arange(n)
    return _Grid(z, h, m, lower_bounds(z, k, p), upper_bounds(z, k, p), lower_bounds(z[:m] - 1.0, k, p))


def _hat_shifts(u: np.ndarray, left_ext: np.ndarray, m: int):
    right = np.concatenate([u[m:], np.full(m, u[-1])])
    left = np.concatenate([left_ext, u[:-m]])
    return right, left


def default_rho(p: ModelParams, psi: np.ndarray) -> tuple[float, float]:
    """Smallest-safe relaxation constants: rho_i = 1.1 beta_i max(psi)."""
    top = float(np.max(psi))
    return RHO_MARGIN * p.beta1 * top, RHO_MARGIN * p.beta2 * top


def _check_envelope(u: np.ndarray, g: _Grid) -> None:
    below = g.lower - u
    above = u - g.upper
    worst = max(float(below.max()), float(above.max()))
    if worst > ENVELOPE_TOL:
        comp, j = np.unravel_index(np.argmax(np.maximum(below, above)), u.shape)
        raise EnvelopeViolation(
            f"{'SVI'[comp]} leaves the envelope by {worst:.3e} at z = {g.z[j]:.6g}"
        )
    if np.max(np.abs(u[:, 0] - g.lower[:, 0])) > ENVELOPE_TOL:
        raise EnvelopeViolation("left endpoint is not pinned to the lower functions")


def _apply(u: np.ndarray, p: ModelParams, c: float, g: _Grid, rho=None) -> np.ndarray:
    phi, vphi, psi = u
    mu1, mu2, mu3 = derived_rates(p)
    rho1, rho2 = default_rho(p, psi) if rho is None else rho
    m = g.m
    SR, SL = _hat_shifts(phi, g.lower_left_ext[0], m)
    VR, VL = _hat_shifts(vphi, g.lower_left_ext[1], m)
    IR, IL = _hat_shifts(psi, g.lower_left_ext[2], m)
    H1 = SR + SL + p.Lambda + rho1 * phi - p.beta1 * phi * psi
    H2 = VR + VL + p.alpha * phi + rho2 * vphi - p.beta2 * vphi * psi
    H3 = p.d * (IR + IL) + (p.beta1 * phi + p.beta2 * vphi) * psi
    out = np.array(
        [
            solve_linear_first_order(H1, 2.0 + mu1 + rho1, c, g.h, g.lower[0, 0]),
            solve_linear_first_order(H2, 2.0 + mu2 + rho2, c, g.h, g.lower[1, 0]),
            solve_linear_first_order(H3, 2.0 * p.d + mu3, c, g.h, g.lower[2, 0]),
        ]
    )
    return np.clip(out, g.lower, g.upper)


def apply_operator(pr: Profile, p: ModelParams, k: BoundConstants, rho=None) -> Profile:
    """One application of the truncated wave operator to ``pr``.

    ``rho`` defaults to :func:`default_rho` of the input infectious component.
    Raises :class:`EnvelopeViolation` if the input is not in the envelope set.
    """
    g = _make_grid(pr.B, pr.h, k, p)
    u = pr.stacked()
    _check_envelope(u, g)
    S, V, I = _apply(u, p, pr.c, g, rho)
    return Profile(pr.B, pr.h, pr.c, S, V, I)


# -- solver -------------------------------------------------------------------


@dataclass
class ResidualInfo:
    value: float
    zeta: float
    equation: str


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    change: float
    residual: ResidualInfo
    left_gap: float
    right_gap: float
    left_I_monotone: bool = True
    changes: list = field(default_factory=list, repr=False)


def residual(pr: Profile, p: ModelParams, c: Optional[float] = None) -> ResidualInfo:
    """Max absolute residual of the full wave equations over interior nodes.

    Derivatives are centred differences; unit shifts are exact grid offsets.
    """
    c = pr.c if c is None else c
    res = residual_arrays(pr, p, c)
    comp, j = np.unravel_index(np.argmax(np.abs(res)), res.shape)
    z = pr.z[pr.interior()]
    return ResidualInfo(float(np.abs(res[comp, j])), float(z[j]), "SVI"[comp])


def residual_arrays(pr: Profile, p: ModelParams, c: float) -> np.ndarray:
    m, h, n = pr.shift, pr.h, pr.n
    mu1, mu2, mu3 = derived_rates(p)
    j = np.arange(m + 1, n - m - 1)

    def d1(x):
        return (x[j + 1] - x[j - 1]) / (2.0 * h)

    def lap(x):
        return x[j + m] - 2.0 * x[j] + x[j - m]

    S, V, I = pr.S, pr.V, pr.I
    s, v, i = S[j], V[j], I[j]
    return np.array(
        [
            c * d1(S) - (lap(S) + p.Lambda - mu1 * s - p.beta1 * s * i),
            c * d1(V) - (lap(V) + p.alpha * s - p.beta2 * v * i - mu2 * v),
            c * d1(I) - (p.d * lap(I) + (p.beta1 * s + p.beta2 * v) * i - mu3 * i),
        ]
    )


def _end_gaps(pr: Profile, p: ModelParams) -> tuple[float, float]:
    E0 = disease_free_equilibrium(p).as_array()
    Es = endemic_equilibrium(p).as_array()
    u = pr.stacked()
    return float(np.sum(np.abs(u[:, 0] - E0))), float(np.max(np.abs(u[:, -1] - Es)))


def solve_truncated(
    p: ModelParams,
    c: float,
    B: float = 30.0,
    h: float = 0.01,
    tol: float = 1e-10,
    max_iter: int = 500,
    k: Optional[BoundConstants] = None,
    rho=None,
) -> tuple[Profile, SolveReport]:
    """Fixed-point iteration of the truncated operator from the lower functions.

    Stops when the joint sup-norm change of (S, V, I) drops to ``tol``.  Does
    not raise on non-convergence; check ``report.converged``.
    """
    c_star, _ = critical_speed(p)
    if not c > c_star:
        raise ValueError(f"c = {c!r} must exceed c* = {c_star!r}")
    if k is None:
        k = choose_bound_constants(p, c)
    if B < abs(k.X3) + 10.0:
        raise ValueError(f"B = {B!r} must be at least |X3| + 10 = {abs(k.X3) + 10.0:.6g}")
    g = _make_grid(B, h, k, p)
    u = g.lower.copy()
    n_left = max(2, len(g.z) // 10)
    monotone = True
    changes = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = _apply(u, p, c, g, rho)
        if np.any(new[2, :n_left] < u[2, :n_left] - 1e-14):
            monotone = False
        change = float(np.max(np.abs(new - u)))
        u = new
        changes.append(change)
        if change <= tol:
            converged = True
            break
    pr = Profile(B, h, c, *u)
    left, right = _end_gaps(pr, p)
    report = SolveReport(converged, it, changes[-1], residual(pr, p), left, right, monotone, changes)
    return pr, report


def require_converged(report: SolveReport) -> None:
    if not report.converged:
        raise ConvergenceError(f"no convergence after {report.iterations} iterations (last change {report.change:.3e})")


# -- boundary behaviour and diagnostics ---------------------------------------


@dataclass
class BoundaryReport:
    passed: bool
    left_gap: np.ndarray
    left_allowed: float
    right_gap: np.ndarray
    right_allowed: float
    failures: list


def left_envelope_gap(p: ModelParams, k: BoundConstants, B: float) -> float:
    """Bound on |(S, V, I)(-B) - E0| implied by the lower/upper functions."""
    S0, V0, _ = disease_free_equilibrium(p)
    return S0 * k.M1 * math.exp(-k.eps1 * B) + V0 * k.M2 * math.exp(-k.eps2 * B) + math.exp(-k.r1 * B)


def boundary_check(
    pr: Profile, p: ModelParams, tolL: float, tolR: float, k: Optional[BoundConstants] = None
) -> BoundaryReport:
    """Compare the profile ends with E0 (left) and E* (right)."""
    if k is None:
        k = choose_bound_constants(p, pr.c)
    E0 = disease_free_equilibrium(p).as_array()
    Es = endemic_equilibrium(p).as_array()
    u = pr.stacked()
    lg = np.abs(u[:, 0] - E0)
    rg = np.abs(u[:, -1] - Es)
    allowed_left = tolL + left_envelope_gap(p, k, pr.B)
    failures = []
    if lg.sum() > allowed_left:
        worst = int(np.argmax(lg))
        failures.append(("left", "SVI"[worst], float(lg[worst])))
    for i in range(3):
        if rg[i] > tolR:
            failures.append(("right", "SVI"[i], float(rg[i])))
    return BoundaryReport(not failures, lg, allowed_left, rg, tolR, failures)


def left_decay_rate(pr: Profile, fraction: float = 0.1) -> float:
    """Least-squares slope of ln I over the leftmost ``fraction`` of nodes."""
    nl = max(2, int(fraction * pr.n))
    return float(np.polyfit(pr.z[:nl], np.log(pr.I[:nl]), 1)[0])


def profile_diagnostics(pr: Profile, p: ModelParams, k: BoundConstants) -> dict:
    """Runtime checks of positivity, envelope membership, derivative and shift-ratio bounds."""
    mu1, mu2, mu3 = derived_rates(p)
    S0, V0, _ = disease_free_equilibrium(p)
    c, d, m = pr.c, p.d, pr.shift
    sl = pr.interior()
    g = _make_grid(pr.B, pr.h, k, p)
    u = pr.stacked()
    X = pr.B - 1.0
    grow = math.exp(k.r1 * X)
    dS = np.gradient(pr.S, pr.h)[sl]
    dV = np.gradient(pr.V, pr.h)[sl]
    dI = np.gradient(pr.I, pr.h)[sl]
    kappa = (2.0 + mu3) / c
    I = pr.I
    ratio_up = I[m:] / I[:-m]
    ratio_down = I[:-m] / I[m:]
    out = {
        "in_envelope": bool(np.all(u >= g.lower - ENVELOPE_TOL) and np.all(u <= g.upper + ENVELOPE_TOL)),
        "strict_bounds": bool(
            np.all(pr.S[sl] > 0) and np.all(pr.S[sl] < S0) and np.all(pr.V[sl] > 0)
            and np.all(pr.V[sl] < V0) and np.all(pr.I[sl] > 0)
        ),
        "max_dS": float(np.max(np.abs(dS))),
        "bound_dS": ((4 + mu1) * S0 + p.Lambda + p.beta1 * S0 * grow) / c,
        "max_dV": float(np.max(np.abs(dV))),
        "bound_dV": ((4 + mu2) * V0 + p.alpha * S0 + p.beta2 * V0 * grow) / c,
        "max_dI": float(np.max(np.abs(dI))),
        "bound_dI": (4 * d + mu3 + p.beta1 * S0 + p.beta2 * V0) * grow / c,
        "max_ratio_up": float(np.max(ratio_up)),
        "bound_ratio_up": 4.0 * (c / d) ** 4 * math.exp(3.0 * kappa),
        "max_ratio_down": float(np.max(ratio_down)),
        "bound_ratio_down": math.exp(kappa),
    }
    out["derivatives_bounded"] = (
        out["max_dS"] <= out["bound_dS"] and out["max_dV"] <= out["bound_dV"] and out["max_dI"] <= out["bound_dI"]
    )
    out["ratios_bounded"] = (
        out["max_ratio_up"] <= out["bound_ratio_up"] and out["max_ratio_down"] <= out["bound_ratio_down"]
    )
    return out
