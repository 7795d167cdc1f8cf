import io
import subprocess
import sys

import pytest

from latticewave.cli import main
from latticewave.dispersion import critical_speed
from latticewave.model import ModelParams, endemic_equilibrium

from test_config import BASE, CANONICAL_FILE


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def report(text):
    return dict(line.split(" = ", 1) for line in text.splitlines() if " = " in line)


def test_speed_prints_critical_pair():
    code, out, _ = run("--config", str(CANONICAL_FILE), "speed")
    assert code == 0
    c_star, r_star = critical_speed(ModelParams.canonical())
    rep = report(out)
    assert float(rep["c_star"]) == c_star and float(rep["r_star"]) == r_star
    assert rep["c_star"] == f"{c_star:.17g}"


def test_r0_and_equilibria():
    code, out, _ = run("r0")
    assert code == 0 and float(report(out)["R0"]) == pytest.approx(10 / 3, rel=1e-14)
    code, out, _ = run("equilibria")
    rep = report(out)
    assert code == 0 and float(rep["Estar.I"]) == endemic_equilibrium(ModelParams.canonical()).I
    assert float(rep["Estar.residual"]) <= 1e-10


def test_equilibria_below_threshold(tmp_path):
    cfg = tmp_path / "low.cfg"
    cfg.write_text(BASE.replace("beta1 = 0.3", "beta1 = 0.01").replace("beta2 = 0.1", "beta2 = 0.01"))
    code, out, _ = run("--config", str(cfg), "equilibria")
    assert code == 0 and "Estar = none" in out


def test_bounds_check_default_passes(tmp_path):
    path = tmp_path / "res.csv"
    code, out, _ = run("bounds-check", "--out", str(path))
    assert code == 0 and out.rstrip().endswith("PASS")
    lines = path.read_text().splitlines()
    assert lines[0] == "zeta,ineq_id,lhs_minus_rhs"
    assert len(lines) == 1 + 6 * int(report(out)["points"])


def test_bounds_check_with_weak_M1_fails():
    code, out, _ = run("bounds-check", "--M1", "0.1585")
    assert code == 1
    assert "sub_S" in report(out)["violated"]
    assert out.rstrip().endswith("FAIL")


def test_usage_errors(capsys):
    assert run("frobnicate")[0] == 2
    assert "usage" in capsys.readouterr().err
    assert run()[0] == 2
    assert run("roots")[0] == 2  # --c is required
    assert run("bounds-check", "--M1", "-1")[0] == 2
    assert run("--config", "/nonexistent/run.cfg", "speed")[0] == 2


def test_bad_config_exit_two(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(BASE + "betta1 = 0.3\n")
    code, _, err = run("--config", str(cfg), "speed")
    assert code == 2 and "unknown key" in err and ":8:" in err


def test_module_errors_exit_one():
    code, _, err = run("roots", "--c", "1.0")
    assert code == 1 and err.startswith("error: dispersion:")
    code, _, err = run("simulate", "--N", "20", "--T", "1", "--dt", "1.0")
    assert code == 1 and "lattice" in err


def test_help_exits_zero(capsys):
    assert run("--help")[0] == 0


def test_sweep_output_and_order(tmp_path):
    code, out, _ = run("sweep", "--param", "gamma1", "--from", "0.05", "--to", "0.3", "--steps", "4")
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "param,c_star,r_star,sensitivity"
    vals = [float(r.split(",")[0]) for r in rows[1:]]
    assert vals == sorted(vals) and len(vals) == 4
    speeds = [float(r.split(",")[1]) for r in rows[1:]]
    assert all(a > b for a, b in zip(speeds, speeds[1:]))
    # a range crossing R0 = 1 yields nan rows, not a crash
    code, out, _ = run("sweep", "--param", "beta1", "--from", "0.0", "--to", "0.3", "--steps", "3")
    assert code == 0 and out.splitlines()[1].endswith("nan,nan,nan")
    assert run("sweep", "--param", "zeta", "--from", "0", "--to", "1")[0] == 2


def test_ode_command(tmp_path):
    path = tmp_path / "ode.csv"
    code, out, _ = run("ode", "--T", "2000", "--out", str(path))
    rep = report(out)
    assert code == 0 and rep["target"] == "Estar" and float(rep["distance"]) < 1e-6
    assert path.read_text().splitlines()[0] == "t,S,V,I"


def test_small_simulation(tmp_path):
    snaps, front = tmp_path / "s.csv", tmp_path / "f.csv"
    code, out, _ = run("simulate", "--N", "120", "--T", "40", "--snapshot-every", "5",
                       "--out", str(snaps), "--front-out", str(front))
    rep = report(out)
    assert code == 0, out
    assert rep["clamps"] == "0" and "c_emp" in rep
    lines = snaps.read_text().splitlines()
    assert lines[0] == "t,n,S,V,I,R"
    assert len(lines) == 1 + 9 * 241
    assert front.read_text().splitlines()[0] == "t,front_pos"


@pytest.fixture(scope="module")
def profile_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("prof") / "profile.csv"
    code, out, _ = run("profile", "--B", "20", "--h", "0.02", "--out", str(path))
    assert code == 0, out
    return path, out


def test_profile_and_lyapunov(profile_csv, tmp_path):
    path, out = profile_csv
    rep = report(out)
    assert rep["converged"] == "true"
    assert path.read_text().splitlines()[0] == "zeta,S,V,I"
    trace = tmp_path / "trace.csv"
    code, out, _ = run("lyapunov", "--profile", str(path), "--out", str(trace))
    assert code == 0, out
    assert trace.read_text().splitlines()[0] == "zeta,V,dVdzeta,W1,W2,W3,W4"


def test_lyapunov_missing_profile(tmp_path):
    code, _, err = run("lyapunov", "--profile", str(tmp_path / "none.csv"))
    assert code == 2 and err.startswith("error: lyapunov:") and "none.csv" in err


def test_outputs_byte_identical(profile_csv, tmp_path):
    path, _ = profile_csv
    outs = []
    for i in range(2):
        target = tmp_path / f"p{i}.csv"
        code, text, _ = run("profile", "--B", "20", "--h", "0.02", "--out", str(target))
        outs.append((text, target.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][1] == path.read_bytes()
    a = run("sweep", "--param", "d", "--from", "0.5", "--to", "2", "--steps", "5")
    b = run("sweep", "--param", "d", "--from", "0.5", "--to", "2", "--steps", "5")
    assert a == b


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "latticewave", "speed"], capture_output=True, text=True)
    assert res.returncode == 0 and "c_star = " in res.stdout
    res = subprocess.run([sys.executable, "-m", "latticewave", "bogus"], capture_output=True, text=True)
    assert res.returncode == 2 and "usage" in res.stderr
