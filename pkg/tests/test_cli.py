import csv
import json
import subprocess
import sys

import pytest

from nodal_shooter import cli
from nodal_shooter.analysis import Regime, RegimeTag, OscillationSkeleton
from nodal_shooter.exceptions import NoConvergence

MODEL = ["--theta", "0.25", "--dim", "3"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_inner_band(capsys):
    code, out, _ = run(capsys, "classify", "--a", "0.5", *MODEL)
    doc = json.loads(out)
    assert code == 0
    assert doc["tag"] == "OscAroundOne" and doc["zero_count"] == 0


def test_classify_trivial(capsys):
    code, out, _ = run(capsys, "classify", "--a", "0", *MODEL)
    assert code == 0
    doc = json.loads(out)
    assert doc["tag"] == "TrivialZero" and doc["termination"] is None


def test_classify_nodal(capsys):
    code, out, _ = run(capsys, "classify", "--a", "6", *MODEL)
    doc = json.loads(out)
    assert doc["tag"] == "NodalFiniteZero"
    assert doc["rho_a"] == pytest.approx(5.0445160371, abs=1e-9)


@pytest.mark.xfail(strict=True, reason="a = 2.5 has no zero at d=3, theta=1/4")
def test_classify_nodal_at_two_and_a_half(capsys):
    _, out, _ = run(capsys, "classify", "--a", "2.5", *MODEL)
    assert json.loads(out)["tag"] == "NodalFiniteZero"


def test_classify_writes_files(capsys, tmp_path):
    target = tmp_path / "run.csv"
    code, _, _ = run(capsys, "classify", "--a", "6", *MODEL, "--rmax", "10", "--out", str(target))
    assert code == 0
    rows = target.read_text().splitlines()
    assert rows[0] == "r,u,v,E" and rows[1] == "0,6,0,8.2020410288672867"
    events = (tmp_path / "run_events.csv").read_text().splitlines()
    assert events[0] == "kind,r,u,v"
    assert any(line.startswith("ZeroOfU,5.04451603710") for line in events)


def test_classify_oracle(capsys):
    code, out, _ = run(capsys, "classify", "--a", "1.5", *MODEL, "--rmax", "20", "--oracle")
    doc = json.loads(out)
    assert code == 0
    assert doc["oracle_max_deviation"] <= 1e-7


def test_classify_undetermined_exit(capsys, monkeypatch):
    fake = Regime(RegimeTag.UNDETERMINED, 0.5)
    monkeypatch.setattr(cli.analysis, "classify", lambda a, P, cfg: (fake, OscillationSkeleton(), None))
    code, out, _ = run(capsys, "classify", "--a", "0.5", *MODEL)
    assert code == 2
    assert json.loads(out)["tag"] == "Undetermined"


@pytest.mark.parametrize(
    "argv",
    [
        ["classify", "--a", "0.5", "--theta", "0.7", "--dim", "3"],
        ["classify", "--a", "0.5", "--theta", "0.25", "--dim", "1"],
        ["classify", "--theta", "0.25", "--dim", "3"],
        ["classify", "--a", "x", *MODEL],
        ["classify", "--a", "0.5", *MODEL, "--tol", "-1"],
        ["bogus"],
        [],
    ],
)
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as info:
        code = cli.main(argv)
        raise SystemExit(code)
    assert info.value.code == 1


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_sweep_inner_band(capsys, tmp_path):
    code, _, _ = run(capsys, "sweep", "--a-from", "0.1", "--a-to", "0.9", "--a-steps", "9", *MODEL,
                     "--out", str(tmp_path))
    assert code == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert len(rows) == 9
    assert all(r["tag"] == "OscAroundOne" and r["zero_count"] == "0" and r["rho_a"] == "" for r in rows)
    header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
    assert header == "a,tag,zero_count,rho_a,final_attractor,E_end"
    dat = (tmp_path / "zeros.dat").read_text().splitlines()
    assert dat[0].startswith("#") and dat[1] == "0.10000000000000001 0"


def test_sweep_positive_band(capsys, tmp_path):
    run(capsys, "sweep", "--a-from", "1.1", "--a-to", "1.7", "--a-steps", "7", *MODEL, "--out", str(tmp_path))
    assert all(r["tag"] == "PositiveOscillatory" for r in read_rows(tmp_path / "sweep.csv"))


def test_sweep_zero_count_steps_up(capsys, tmp_path):
    run(capsys, "sweep", "--a-from", "2", "--a-to", "5", "--a-steps", "31", *MODEL, "--rmax", "60",
        "--out", str(tmp_path))
    counts = [int(r["zero_count"]) for r in read_rows(tmp_path / "sweep.csv")]
    assert counts == sorted(counts)
    assert counts[0] == 0 and counts[-1] == 1


def test_sweep_jobs_identical(capsys, tmp_path):
    common = ["sweep", "--a-from", "-3", "--a-to", "6", "--a-steps", "12", *MODEL, "--rmax", "40"]
    run(capsys, *common, "--out", str(tmp_path / "one"), "--jobs", "1")
    run(capsys, *common, "--out", str(tmp_path / "three"), "--jobs", "3")
    for name in ("sweep.csv", "zeros.dat"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "three" / name).read_bytes()


def test_sweep_unwritable(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(capsys, "sweep", "--a-from", "0.5", "--a-to", "0.5", "--a-steps", "1", *MODEL,
                       "--rmax", "5", "--out", str(blocker))
    assert code == 1 and err


def test_shoot_below_eigenvalue_radius(capsys):
    code, out, _ = run(capsys, "shoot", "--R", "0.5", "--zeros", "0", "--a-min", "1.05",
                       "--a-max", repr(16 / 9 - 0.01), *MODEL)
    assert code == 3
    assert json.loads(out) == []


def test_shoot_inverse_consistency(capsys):
    code, out, _ = run(capsys, "shoot", "--R", "5.044516037101787", "--zeros", "0", "--a-min", "5.5",
                       "--a-max", "6.5", *MODEL)
    roots = json.loads(out)
    assert code == 0 and len(roots) == 1
    assert roots[0] == pytest.approx(6.0, abs=1e-8)


def test_shoot_one_zero(capsys):
    code, out, _ = run(capsys, "shoot", "--R", "11", "--zeros", "1", "--a-min", repr(16 / 9 + 0.01),
                       "--a-max", "12", *MODEL)
    assert code == 0 and len(json.loads(out)) >= 1


def test_picard_check_equilibrium(capsys):
    code, out, _ = run(capsys, "picard-check", "--a", "1", *MODEL)
    doc = json.loads(out)
    assert code == 0
    assert doc["sup_diff"] <= 1e-14 and doc["sweeps"] == 1 and doc["delta"] == 0.3


def test_picard_check_agreement(capsys):
    code, out, _ = run(capsys, "picard-check", "--a", "0.5", *MODEL, "--delta", "0.3", "--n", "4096")
    assert code == 0
    assert json.loads(out)["sup_diff"] <= 1e-6


def test_picard_check_rejects_zero(capsys):
    code, _, err = run(capsys, "picard-check", "--a", "0", *MODEL)
    assert code == 1 and "error" in err


def test_picard_check_no_convergence(capsys, monkeypatch):
    calls = []

    def never(a, delta, P, n):
        calls.append(delta)
        raise NoConvergence("stuck")

    monkeypatch.setattr(cli, "picard_solve", never)
    code, _, _ = run(capsys, "picard-check", "--a", "0.5", *MODEL)
    assert code == 4
    assert calls == [0.3 / 2**k for k in range(6)]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nodal_shooter", "classify", "--a", "0", *MODEL],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["tag"] == "TrivialZero"
