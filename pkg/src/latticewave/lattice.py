"""Time integration of the four-compartment lattice model and the homogeneous ODE.

Per patch n (S, V, R diffuse with unit rate, I with rate d):

    S_n' = L[S]_n + Lambda - beta1 S_n I_n - mu1 S_n
    V_n' = L[V]_n + alpha S_n - beta2 V_n I_n - mu2 V_n
    I_n' = d L[I]_n + beta1 S_n I_n + beta2 V_n I_n - mu3 I_n
    R_n' = L[R]_n + gamma1 V_n + gamma I_n - mu R_n

with L[u]_n = u_{n+1} - 2 u_n + u_{n-1} and no-flux ghost patches at n = +-N.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import FrontError, InstabilityError, ParameterError
from .model import Equilibrium, ModelParams, derived_rates, disease_free_equilibrium

UNDERSHOOT = 1e-12
BLOWUP_FACTOR = 10.0
FRONT_MARGIN = 10
MIN_FRONT_ADVANCE = 20.0


@dataclass
class LatticeState:
    N: int
    t: float
    S: np.ndarray
    V: np.ndarray
    I: np.ndarray
    R: np.ndarray
    clamps: int = 0  # cumulative count of clamped undershoots

    def __post_init__(self):
        size = 2 * self.N + 1
        for name in ("S", "V", "I", "R"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (size,):
                raise ValueError(f"{name} must have length 2N+1 = {size}, got shape {arr.shape}")
            setattr(self, name, arr)

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def stacked(self) -> np.ndarray:
        return np.array([self.S, self.V, self.I, self.R])

    @classmethod
    def from_stacked(cls, N, t, u, clamps=0) -> "LatticeState":
        return cls(N, t, u[0], u[1], u[2], u[3], clamps)

    def copy(self) -> "LatticeState":
        return LatticeState.from_stacked(self.N, self.t, self.stacked(), self.clamps)


def initial_localized(p: ModelParams, N: int, k: int, I0: float) -> LatticeState:
    """Disease-free background with I = I0 on the patches |n| <= k."""
    if N < 1:
        raise ParameterError("N must be >= 1")
    if not 0 <= k < N:
        raise ParameterError(f"seed half-width k must satisfy 0 <= k < N, got k={k}, N={N}")
    if I0 < 0:
        raise ParameterError("I0 must be >= 0")
    S0, V0, _ = disease_free_equilibrium(p)
    size = 2 * N + 1
    n = np.arange(-N, N + 1)
    I = np.where(np.abs(n) <= k, float(I0), 0.0)
    return LatticeState(N, 0.0, np.full(size, S0), np.full(size, V0), I, np.zeros(size))


def _laplacian(u: np.ndarray) -> np.ndarray:
    # no-flux ghosts: u_{-N-1} = u_{-N}, u_{N+1} = u_N
    out = np.empty_like(u)
    out[..., 1:-1] = u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]
    out[..., 0] = u[..., 1] - u[..., 0]
    out[..., -1] = u[..., -2] - u[..., -1]
    return out


def lattice_rhs(p: ModelParams, u: np.ndarray) -> np.ndarray:
    """Time derivative of the stacked (4, 2N+1) state."""
    mu1, mu2, mu3 = derived_rates(p)
    S, V, I, R = u
    lap = _laplacian(u)
    SI = S * I
    VI = V * I
    return np.array(
        [
            lap[0] + p.Lambda - p.beta1 * SI - mu1 * S,
            lap[1] + p.alpha * S - p.beta2 * VI - mu2 * V,
            p.d * lap[2] + p.beta1 * SI + p.beta2 * VI - mu3 * I,
            lap[3] + p.gamma1 * V + p.gamma * I - p.mu * R,
        ]
    )


def dt_max(p: ModelParams, state: LatticeState) -> float:
    mu3 = derived_rates(p).mu3
    return 0.25 / (2.0 * max(1.0, p.d) + p.beta1 * state.S.max() + p.beta2 * state.V.max() + mu3)


@dataclass(frozen=True)
class Envelope:
    S: float
    V: float
    I: float
    R: float

    def as_column(self) -> np.ndarray:
        return np.array([[self.S], [self.V], [self.I], [self.R]])


def envelope(p: ModelParams, init: LatticeState) -> Envelope:
    """Reference levels for the blow-up check (10x any of these counts as unstable)."""
    S0, V0, _ = disease_free_equilibrium(p)
    supS = max(init.S.max(), S0)
    supV = max(init.V.max(), V0 * (1.0 + init.S.max() / S0))
    supI = max(init.I.max(), p.Lambda * (p.beta1 + p.beta2) / (p.mu * derived_rates(p).mu3))
    total = (init.S + init.V + init.I + init.R).max()
    supR = max(init.R.max(), total, p.Lambda / p.mu)
    return Envelope(supS, supV, supI, supR)


def _rk4(f, u, dt):
    k1 = f(u)
    k2 = f(u + 0.5 * dt * k1)
    k3 = f(u + 0.5 * dt * k2)
    k4 = f(u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(p, u, dt, t, env_col):
    u = _rk4(lambda x: lattice_rhs(p, x), u, dt)
    if not np.all(np.isfinite(u)):
        raise InstabilityError(f"non-finite density at t = {t + dt:.6g}", t + dt)
    neg = u < 0.0
    clamps = 0
    if neg.any():
        if u.min() < -UNDERSHOOT:
            raise InstabilityError(f"density {u.min():.3e} below -{UNDERSHOOT:g} at t = {t + dt:.6g}", t + dt)
        clamps = int(neg.sum())
        u[neg] = 0.0
    if env_col is not None and np.any(u > BLOWUP_FACTOR * env_col):
        raise InstabilityError(f"density exceeds {BLOWUP_FACTOR:g}x its envelope at t = {t + dt:.6g}", t + dt)
    return u, clamps


def _check_dt(p, state, dt):
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    limit = dt_max(p, state)
    if dt > limit:
        raise ParameterError(f"dt = {dt!r} exceeds the stability limit {limit:.6g}")


def step(state: LatticeState, p: ModelParams, dt: float, env: Optional[Envelope] = None) -> LatticeState:
    """One classical RK4 step of the lattice system."""
    _check_dt(p, state, dt)
    env = env if env is not None else envelope(p, state)
    u, clamps = _advance(p, state.stacked(), dt, state.t, env.as_column())
    return LatticeState.from_stacked(state.N, state.t + dt, u, state.clamps + clamps)


@dataclass
class Trajectory:
    N: int
    t: np.ndarray
    S: np.ndarray  # (n_snapshots, 2N+1)
    V: np.ndarray
    I: np.ndarray
    R: np.ndarray
    clamps: int
    dt: float
    sup_I: float  # max of I over every step, not only snapshots

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def snapshot(self, i: int) -> LatticeState:
        return LatticeState(self.N, float(self.t[i]), self.S[i], self.V[i], self.I[i], self.R[i], self.clamps)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "n", "S", "V", "I", "R"])
            n = self.n
            for i, t in enumerate(self.t):
                ts = f"{t:.17g}"
                for j in range(n.size):
                    w.writerow([ts, int(n[j])] + [f"{a[i, j]:.17g}" for a in (self.S, self.V, self.I, self.R)])


def simulate(
    p: ModelParams, init: LatticeState, T: float, dt: float, snapshot_every: float = 1.0
) -> Trajectory:
    """Fixed-step RK4 from ``init`` to time ``init.t + T``.

    Snapshots are taken every ``snapshot_every`` time units (rounded to a
    whole number of steps), including the initial state.
    """
    if not T > 0:
        raise ParameterError("T must be > 0")
    _check_dt(p, init, dt)
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ParameterError(f"T = {T!r} is not a whole number of steps of dt = {dt!r}")
    every = max(1, int(round(snapshot_every / dt)))
    env_col = envelope(p, init).as_column()

    u = init.stacked()
    snaps_t = [init.t]
    snaps = [u.copy()]
    clamps = init.clamps
    sup_I = float(u[2].max())
    for s in range(1, steps + 1):
        t_prev = init.t + (s - 1) * dt
        u, c = _advance(p, u, dt, t_prev, env_col)
        clamps += c
        sup_I = max(sup_I, float(u[2].max()))
        if s % every == 0 or s == steps:
            snaps_t.append(init.t + s * dt)
            snaps.append(u.copy())
    arr = np.array(snaps)
    return Trajectory(init.N, np.array(snaps_t), arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], clamps, dt, sup_I)


# -- front tracking -------------------------------------------------------------


@dataclass
class FrontEstimate:
    theta: float
    t: np.ndarray
    x: np.ndarray
    speed: float
    intercept: float
    fit_residual: float  # RMS deviation of x(t) from the fitted line
    window: tuple[float, float]
    clipped_at: Optional[float] = None  # time of first boundary approach, when clipped

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "front_pos"])
            for t, x in zip(self.t, self.x):
                w.writerow([f"{t:.17g}", f"{x:.17g}"])


def front_positions(traj: Trajectory, theta: float) -> np.ndarray:
    """Rightmost theta-crossing of I per snapshot (NaN where I < theta everywhere).

    The crossing between patches n and n+1 is located by linear interpolation.
    """
    n = traj.n
    out = np.full(traj.t.size, np.nan)
    for i, I in enumerate(traj.I):
        above = np.nonzero(I >= theta)[0]
        if above.size == 0:
            continue
        j = above[-1]
        if j == I.size - 1:
            out[i] = float(n[j])
        else:
            out[i] = n[j] + (I[j] - theta) / (I[j] - I[j + 1])
    return out


def front_speed(
    traj: Trajectory, theta: float, margin: int = FRONT_MARGIN, clip_at_boundary: bool = False
) -> FrontEstimate:
    """Least-squares front speed over the last half of the snapshots.

    With ``clip_at_boundary`` the candidate snapshots stop before the raw
    front first comes within ``margin`` patches of n = N; otherwise such an
    approach inside the fit window is an error.
    """
    if not theta > 0:
        raise ParameterError("theta must be > 0")
    x = front_positions(traj, theta)
    seen = np.isfinite(x)
    if not seen.any():
        raise FrontError(f"no front: I never reaches theta = {theta!r}")
    near = np.nonzero(seen & (np.floor(x) >= traj.N - margin))[0]
    last = traj.t.size
    clipped = None
    if clip_at_boundary and near.size:
        last = int(near[0])
        clipped = float(traj.t[last])
    idx = np.arange(last // 2, last)
    idx = idx[seen[idx]]
    if idx.size < 3:
        raise FrontError("too few snapshots with a front inside the fit window")
    if np.any(np.floor(x[idx]) >= traj.N - margin):
        raise FrontError(f"front touched boundary: within {margin} patches of n = N inside the fit window")
    t_fit, x_fit = traj.t[idx], x[idx]
    if x_fit[-1] - x_fit[0] < MIN_FRONT_ADVANCE:
        raise FrontError(
            f"front advanced only {x_fit[-1] - x_fit[0]:.3g} patches in the fit window (need {MIN_FRONT_ADVANCE:g})"
        )
    slope, intercept = np.polyfit(t_fit, x_fit, 1)
    resid = float(np.sqrt(np.mean((x_fit - (slope * t_fit + intercept)) ** 2)))
    return FrontEstimate(
        float(theta), traj.t[seen], x[seen], float(slope), float(intercept), resid,
        (float(t_fit[0]), float(t_fit[-1])), clipped,
    )


# -- homogeneous ODE ----------------------------------------------------------------


@dataclass
class OdeTrajectory:
    t: np.ndarray
    y: np.ndarray  # (n_records, 3)

    @property
    def final(self) -> Equilibrium:
        return Equilibrium(*map(float, self.y[-1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "S", "V", "I"])
            for t, row in zip(self.t, self.y):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def ode_simulate(p: ModelParams, init, T: float, dt: float, record_every: float = 1.0) -> OdeTrajectory:
    """Classical RK4 for the patch-free SVI system (scalar arithmetic, no arrays in the loop)."""
    S, V, I = (float(v) for v in init)
    if min(S, V, I) < 0:
        raise ParameterError("initial state must be nonnegative")
    if not (T > 0 and dt > 0):
        raise ParameterError("T and dt must be > 0")
    steps = int(round(T / dt))
    every = max(1, int(round(record_every / dt)))
    mu1, mu2, mu3 = derived_rates(p)
    L, b1, b2, a = p.Lambda, p.beta1, p.beta2, p.alpha

    def f(S, V, I):
        return (L - b1 * S * I - mu1 * S, a * S - b2 * V * I - mu2 * V, b1 * S * I + b2 * V * I - mu3 * I)

    ts, ys = [0.0], [(S, V, I)]
    h2, h6 = 0.5 * dt, dt / 6.0
    for s in range(1, steps + 1):
        a1, a2, a3 = f(S, V, I)
        b1_, b2_, b3_ = f(S + h2 * a1, V + h2 * a2, I + h2 * a3)
        c1, c2, c3 = f(S + h2 * b1_, V + h2 * b2_, I + h2 * b3_)
        d1, d2, d3 = f(S + dt * c1, V + dt * c2, I + dt * c3)
        S += h6 * (a1 + 2.0 * b1_ + 2.0 * c1 + d1)
        V += h6 * (a2 + 2.0 * b2_ + 2.0 * c2 + d2)
        I += h6 * (a3 + 2.0 * b3_ + 2.0 * c3 + d3)
        if not (math.isfinite(S) and math.isfinite(V) and math.isfinite(I)):
            raise InstabilityError(f"non-finite state at t = {s * dt:.6g}", s * dt)
        if s % every == 0 or s == steps:
            ts.append(s * dt)
            ys.append((S, V, I))
    return OdeTrajectory(np.array(ts), np.array(ys))


# -- runtime boundedness checks ---------------------------------------------------


@dataclass
class BoundednessReport:
    burn_in: float
    max_S: float
    max_V: float
    min_seed_I: float
    sup_I: float
    I_cap: float
    clamps: int
    S_cap: float
    V_cap: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def boundedness_report(
    p: ModelParams, traj: Trajectory, seed_halfwidth: int, burn_in: float = 10.0, I_safety: float = 10.0
) -> BoundednessReport:
    """Empirical sup/inf checks on a lattice run from disease-free data with a seed."""
    S0, V0, _ = disease_free_equilibrium(p)
    late = traj.t >= burn_in
    max_S = float(traj.S[late].max())
    max_V = float(traj.V[late].max())
    seed = np.abs(traj.n) <= seed_halfwidth
    min_seed_I = float(traj.I[:, seed].min())
    cap = p.Lambda * (p.beta1 + p.beta2) / (p.mu * derived_rates(p).mu3) * I_safety
    rep = BoundednessReport(burn_in, max_S, max_V, min_seed_I, traj.sup_I, cap, traj.clamps, S0 + 1e-6, V0 + 1e-6)
    if not max_S < rep.S_cap:
        rep.failures.append(f"max S {max_S!r} >= S0 + 1e-6")
    if not max_V < rep.V_cap:
        rep.failures.append(f"max V {max_V!r} >= V0 + 1e-6")
    if not min_seed_I > 0:
        rep.failures.append("I vanished on the seeded patches")
    if not traj.sup_I < cap:
        rep.failures.append(f"sup I {traj.sup_I!r} exceeds {cap!r}")
    if traj.clamps:
        rep.failures.append(f"{traj.clamps} undershoot clamps")
    return rep
