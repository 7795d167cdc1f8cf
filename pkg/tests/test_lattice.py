import numpy as np
import pytest
from scipy.integrate import solve_ivp

from latticewave.errors import FrontError, ParameterError
from latticewave.lattice import (
    LatticeState,
    boundedness_report,
    dt_max,
    front_positions,
    front_speed,
    initial_localized,
    lattice_rhs,
    ode_simulate,
    simulate,
    Trajectory,
    step,
)
from latticewave.model import disease_free_equilibrium, endemic_equilibrium

import oracles
from _shared import CANON, LATTICE_VARIANTS, SEED_HALFWIDTH, lattice_run, theta_for

SUBCRITICAL = CANON.replace(beta1=0.05, beta2=0.02)


def test_initial_localized_examples(canon):
    S0, V0, _ = disease_free_equilibrium(canon)
    one = initial_localized(canon, 20, 0, 0.3)
    assert np.count_nonzero(one.I) == 1 and one.I[20] == 0.3
    assert np.all(one.S == S0) and np.all(one.V == V0) and np.all(one.R == 0)
    free = initial_localized(canon, 20, 3, 0.0)
    assert np.all(free.I == 0)
    wide = initial_localized(canon, 20, 3, 0.1)
    assert np.array_equal(np.nonzero(wide.I)[0], np.arange(17, 24))
    for bad in (dict(N=0, k=0, I0=0.1), dict(N=5, k=5, I0=0.1), dict(N=5, k=1, I0=-1.0)):
        with pytest.raises(ParameterError):
            initial_localized(canon, **bad)


def test_state_shape_validated():
    with pytest.raises(ValueError):
        LatticeState(3, 0.0, np.ones(7), np.ones(7), np.ones(6), np.ones(7))


def test_rhs_total_population_balance(canon):
    rng = np.random.default_rng(1)
    u = rng.uniform(0, 3, size=(4, 41))
    f = lattice_rhs(canon, u)
    # the no-flux Laplacian conserves mass, so only birth and death remain
    assert f.sum() == pytest.approx(41 * canon.Lambda - canon.mu * u.sum(), rel=1e-13)


def test_rhs_zero_at_uniform_equilibria(canon):
    for E in (disease_free_equilibrium(canon), endemic_equilibrium(canon)):
        R = (canon.gamma1 * E.V + canon.gamma * E.I) / canon.mu
        u = np.array([np.full(11, E.S), np.full(11, E.V), np.full(11, E.I), np.full(11, R)])
        assert np.max(np.abs(lattice_rhs(canon, u))) <= 1e-14


def test_constant_data_matches_ode(canon):
    y0 = (2.0, 1.0, 0.4)
    N = 8
    init = LatticeState(N, 0.0, *(np.full(2 * N + 1, v) for v in y0), np.zeros(2 * N + 1))
    traj = simulate(canon, init, 50.0, 0.01, 1.0)
    ode = ode_simulate(canon, y0, 50.0, 0.01, 1.0)
    assert np.array_equal(traj.t, ode.t)
    for comp, arr in enumerate((traj.S, traj.V, traj.I)):
        assert np.max(np.abs(arr - ode.y[:, comp][:, None])) <= 1e-10


def test_disease_free_manifold_invariant(canon):
    init = initial_localized(canon, 30, 2, 0.0)
    init.S[:] = np.linspace(1.0, 3.0, init.S.size)
    traj = simulate(canon, init, 20.0, 0.01, 5.0)
    assert np.all(traj.I == 0.0)


def test_symmetric_data_stays_symmetric(canon):
    traj = simulate(canon, initial_localized(canon, 60, 4, 0.2), 30.0, 0.01, 5.0)
    for arr in (traj.S, traj.V, traj.I, traj.R):
        assert np.max(np.abs(arr - arr[:, ::-1])) <= 1e-12


def test_step_matches_simulate_and_checks_dt(canon):
    init = initial_localized(canon, 10, 1, 0.1)
    s = init
    for _ in range(5):
        s = step(s, canon, 0.01)
    traj = simulate(canon, init, 0.05, 0.01, 0.05)
    assert s.t == pytest.approx(0.05)
    assert np.array_equal(traj.I[-1], s.I)
    limit = dt_max(canon, init)
    with pytest.raises(ParameterError):
        step(init, canon, 1.01 * limit)
    with pytest.raises(ParameterError):
        simulate(canon, init, 1.0, 0.0)
    with pytest.raises(ParameterError):
        simulate(canon, init, 1.005, 0.01)


def test_subcritical_infection_dies_out():
    init = initial_localized(SUBCRITICAL, 40, SEED_HALFWIDTH, 0.1)
    traj = simulate(SUBCRITICAL, init, 150.0, 0.01, 10.0)
    assert traj.I[-1].max() < 1e-8
    assert traj.clamps == 0


def test_interior_approaches_endemic_state(canon, estar):
    traj, _ = lattice_run("base")
    centre = traj.snapshot(-1)
    mid = traj.N
    got = np.array([centre.S[mid], centre.V[mid], centre.I[mid]])
    assert np.max(np.abs(got - np.array(estar))) <= 1e-4


def test_ode_against_solve_ivp(canon):
    y0 = [3.0, 0.5, 0.05]
    ode = ode_simulate(canon, y0, 60.0, 0.01, 60.0)
    ref = oracles.homogeneous_ode_reference(canon, y0, 60.0)
    assert np.max(np.abs(ode.y[-1] - ref)) <= 1e-9
    assert ode.t[-1] == pytest.approx(60.0)


def test_ode_rk4_is_fourth_order(canon):
    y0 = [3.0, 0.5, 0.05]
    ref = solve_ivp(lambda t, y: oracles.ode_residual(canon, *y), (0, 10), y0, method="DOP853",
                    rtol=1e-13, atol=1e-14).y[:, -1]
    e1 = np.max(np.abs(ode_simulate(canon, y0, 10.0, 0.2, 10.0).y[-1] - ref))
    e2 = np.max(np.abs(ode_simulate(canon, y0, 10.0, 0.1, 10.0).y[-1] - ref))
    assert 12 < e1 / e2 < 20


def test_ode_fixed_point(canon, estar):
    ode = ode_simulate(canon, tuple(estar), 100.0, 0.01)
    assert np.max(np.abs(ode.y - np.array(estar))) <= 1e-10


def test_ode_rejects_bad_input(canon):
    with pytest.raises(ParameterError):
        ode_simulate(canon, (1.0, -0.1, 0.1), 1.0, 0.01)
    with pytest.raises(ParameterError):
        ode_simulate(canon, (1.0, 1.0, 0.1), 1.0, 0.0)


# -- fronts --------------------------------------------------------------------------


def _synthetic(N, speeds, times):
    n = np.arange(-N, N + 1)
    I = np.array([np.clip((s - n) / 4.0, 0.0, 1.0) for s in speeds])
    z = np.zeros_like(I)
    return Trajectory(N, np.asarray(times, float), z, z, I, z, 0, 0.01, float(I.max()))


def test_front_positions_interpolate():
    traj = _synthetic(50, [10.25, 20.5], [0.0, 1.0])
    # linear ramp of width 4 ending at s: theta = 0.5 is crossed at n = s - 2
    assert np.allclose(front_positions(traj, 0.5), [8.25, 18.5], atol=1e-14)


def test_front_speed_on_synthetic_data():
    t = np.arange(0.0, 41.0)
    traj = _synthetic(200, 1.5 * t + 3.0, t)
    est = front_speed(traj, 0.5)
    assert est.speed == pytest.approx(1.5, abs=1e-12)
    assert est.fit_residual <= 1e-12
    assert est.window == (20.0, 40.0)


def test_front_errors():
    t = np.arange(0.0, 41.0)
    with pytest.raises(FrontError, match="no front"):
        front_speed(_synthetic(200, np.full(t.size, -300.0), t), 0.5)
    fast = _synthetic(100, 3.0 * t, t)
    with pytest.raises(FrontError, match="touched boundary"):
        front_speed(fast, 0.5)
    clipped = front_speed(fast, 0.5, clip_at_boundary=True)
    assert clipped.clipped_at == pytest.approx(31.0)  # first t with 3t - 2 >= 90
    assert clipped.speed == pytest.approx(3.0)
    with pytest.raises(FrontError):
        front_speed(_synthetic(200, 0.1 * t, t), 0.5)
    with pytest.raises(ParameterError):
        front_speed(fast, 0.0)


def test_lattice_front_signs(crit):
    base = front_speed(lattice_run("base")[0], theta_for(CANON), clip_at_boundary=True)
    fast = front_speed(lattice_run("d_doubled")[0], theta_for(LATTICE_VARIANTS["d_doubled"]), clip_at_boundary=True)
    slow = front_speed(lattice_run("gamma1_tripled")[0], theta_for(LATTICE_VARIANTS["gamma1_tripled"]),
                       clip_at_boundary=True)
    assert slow.speed < base.speed < fast.speed
    assert abs(base.speed - crit[0]) <= 0.1 * crit[0]


def test_boundedness_on_base_run(canon):
    traj, _ = lattice_run("base")
    rep = boundedness_report(canon, traj, SEED_HALFWIDTH)
    assert rep.passed, rep.failures
    S0, V0, _ = disease_free_equilibrium(canon)
    assert rep.max_S <= S0 + 1e-12 and rep.max_V <= V0 + 1e-12


def test_boundedness_flags_violations(canon):
    traj = simulate(canon, initial_localized(canon, 20, 1, 0.1), 12.0, 0.01, 1.0)
    traj.S[-1, 0] = 100.0
    traj.I[:, 20] = 0.0
    rep = boundedness_report(canon, traj, 1)
    assert not rep.passed and len(rep.failures) == 2


def test_csv_headers(tmp_path, canon):
    traj = simulate(canon, initial_localized(canon, 3, 0, 0.1), 0.1, 0.01, 0.05)
    traj.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,n,S,V,I,R" and len(lines) == 1 + 3 * 7
    ode = ode_simulate(canon, (1, 1, 0.1), 1.0, 0.01)
    ode.to_csv(tmp_path / "o.csv")
    assert (tmp_path / "o.csv").read_text().splitlines()[0] == "t,S,V,I"
    t = np.arange(0.0, 41.0)
    front_speed(_synthetic(200, 1.5 * t, t), 0.5).to_csv(tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "t,front_pos"
