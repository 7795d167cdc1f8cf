"""Cached expensive runs shared by the unit and acceptance tests.

Each cached value carries the wall time it took to build, so the acceptance
suite can apply its runtime limits no matter which test triggered it first.
"""

from __future__ import annotations

import time
from functools import lru_cache

from latticewave.dispersion import critical_speed
from latticewave.lattice import initial_localized, simulate
from latticewave.model import ModelParams, endemic_equilibrium
from latticewave.profile import solve_truncated

CANON = ModelParams.canonical()
SEED_HALFWIDTH = 5
SEED_LEVEL = 0.1

LATTICE_VARIANTS = {
    "base": CANON,
    "d_doubled": CANON.replace(d=2.0 * CANON.d),
    "gamma1_tripled": CANON.replace(gamma1=3.0 * CANON.gamma1),
}


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


@lru_cache(maxsize=None)
def canonical_profile(B: float = 30.0, h: float = 0.01):
    """((profile, report), seconds) for the canonical parameters at c = 2 c*."""
    c = 2.0 * critical_speed(CANON)[0]
    return timed(solve_truncated, CANON, c, B, h, 1e-10, 500)


@lru_cache(maxsize=None)
def lattice_run(name: str, N: int = 600, T: float = 400.0, dt: float = 0.01):
    """(trajectory, seconds) for one of the acceptance lattice experiments."""
    p = LATTICE_VARIANTS[name]
    init = initial_localized(p, N, SEED_HALFWIDTH, SEED_LEVEL)
    return timed(simulate, p, init, T, dt, 1.0)


def theta_for(p: ModelParams) -> float:
    return 0.5 * endemic_equilibrium(p).I
