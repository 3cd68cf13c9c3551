import csv
import dataclasses
import io
import json

import numpy as np
import pytest

import reinsurance_timing.cli as cli
from reinsurance_timing.model import benchmark

TINY = ["--paths", "200", "--dt", "1e-2"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# params: ")
    params = json.loads(lines[0][len("# params: ") :])
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return params, rows


# --- solve ---------------------------------------------------------------------------


def test_solve_benchmark(capsys):
    code, out, _ = run(capsys, "solve")
    assert code == 0
    assert "b_star      0.057971" in out
    assert "x_star      12.2341" in out
    assert out.count("PASS") == 6


def test_solve_json(capsys):
    code, out, _ = run(capsys, "solve", "--json", "--quiet")
    assert code == 0
    doc = json.loads(out)
    assert doc["case"] == "i"
    assert doc["b_star"] == pytest.approx(0.05797101449275362, abs=1e-11)
    assert doc["x_star"] == pytest.approx(12.2341, abs=5e-5)
    assert doc["verification"]["passed"] is True
    assert {"B", "C1", "C2", "H"} <= set(doc)


def test_solve_from_config_file(capsys, tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(benchmark("xl_exponential").to_dict()))
    code, out, _ = run(capsys, "solve", "--config", str(path), "--json", "--quiet")
    assert code == 0
    assert json.loads(out)["params"]["retention"]["type"] == "excess_of_loss"


def test_solve_never_reinsure(capsys):
    code, out, _ = run(capsys, "solve", "--theta", "5", "--json", "--quiet")
    assert code == 0
    doc = json.loads(out)
    assert doc["case"] == "never_reinsure"
    assert doc["x_star"] is None and doc["b_star"] == 1.0


def test_solve_writes_out(capsys, tmp_path):
    out_path = tmp_path / "sol.json"
    code, _, _ = run(capsys, "solve", "--out", str(out_path), "--quiet")
    assert code == 0
    assert json.loads(out_path.read_text())["case"] == "i"


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--theta", "0.2"],
        ["solve", "--config", "/nonexistent.json"],
        ["solve", "--bogus", "1"],
        ["solve", "--theta", "abc"],
        ["solve", "--benchmark", "nope"],
        ["nope"],
        ["sweep", "--param", "alpha"],
        ["sweep", "--param", "rho", "--grid", "1,2"],
        ["simulate", "--paths", "10"],
        ["simulate", "--dt", "0"],
        ["solve", "--alpha", "3"],
    ],
)
def test_config_errors_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(cli.main(argv))
    assert exc.value.code == 2


def test_bad_config_file_exit_2(capsys, tmp_path):
    path = tmp_path / "p.json"
    path.write_text('{"lambda": 0.05}')
    assert cli.main(["solve", "--config", str(path)]) == 2
    path.write_text("{not json")
    assert cli.main(["solve", "--config", str(path)]) == 2


def test_verification_failure_exit_3(capsys, monkeypatch):
    from reinsurance_timing.boundary import verify_variational

    def broken(sol, **kw):
        report = verify_variational(sol, **kw)
        first = report.clauses[0]
        return dataclasses.replace(report, clauses=(dataclasses.replace(first, passed=False),) + report.clauses[1:])

    monkeypatch.setattr(cli, "verify_variational", broken)
    code, _, _ = run(capsys, "solve")
    assert code == 3


def test_solver_failure_exit_3(capsys, monkeypatch):
    from reinsurance_timing.numerics import BracketFailure

    def boom(problem):
        raise BracketFailure("no sign change")

    monkeypatch.setattr(cli, "solve_policy", boom)
    code, _, err = run(capsys, "solve")
    assert code == 3
    assert "solver failure" in err


def test_solve_near_threshold_is_out_of_range(capsys):
    # b* is interior but x* is so large that the value coefficients underflow
    code, _, err = run(capsys, "solve", "--theta", "2.1")
    assert code == 3
    assert "solver failure" in err


# --- sweep ---------------------------------------------------------------------------


def test_sweep_csv_layout(capsys):
    code, out, _ = run(capsys, "sweep", "--param", "rho", "--grid", "0.02,0.06,5", "--value-at", "0,10")
    assert code == 0
    params, rows = read_csv(out)
    assert params["rho"] == 0.04
    assert list(rows[0]) == ["param", "value", "b_star", "x_star", "U_at_0", "U_at_10"]
    assert [float(r["value"]) for r in rows] == list(np.linspace(0.02, 0.06, 5))
    assert all(r["param"] == "rho" for r in rows)


def test_sweep_rho_b_star_decreasing(capsys):
    _, out, _ = run(capsys, "sweep", "--param", "rho", "--grid", "0.01,0.2,40")
    b = [float(r["b_star"]) for r in read_csv(out)[1]]
    assert np.all(np.diff(b) < 0)


def test_sweep_K_x_star_increasing(capsys):
    _, out, _ = run(capsys, "sweep", "--param", "K", "--grid", "0.5,30,40")
    x = [float(r["x_star"]) for r in read_csv(out)[1]]
    assert np.all(np.diff(x) > 0)


def test_sweep_xl_mu_x_star_decreasing(capsys):
    _, out, _ = run(capsys, "sweep", "--benchmark", "xl_exponential", "--param", "mu", "--grid", "5,15,21")
    x = [float(r["x_star"]) for r in read_csv(out)[1]]
    assert np.all(np.diff(x) < 0)


def test_sweep_default_mu_grid_keeps_jensen(capsys):
    code, out, _ = run(capsys, "sweep", "--param", "mu", "--points", "7")
    assert code == 0
    rows = read_csv(out)[1]
    assert float(rows[-1]["value"]) == pytest.approx(200.0**0.5, rel=1e-15)
    assert all(r["x_star"] for r in rows)


def test_sweep_default_grid_respects_invariants(capsys):
    code, out, _ = run(capsys, "sweep", "--param", "theta", "--points", "11")
    assert code == 0
    vals = [float(r["value"]) for r in read_csv(out)[1]]
    assert len(vals) == 11 and min(vals) > 0.3


def test_sweep_is_bit_stable(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert cli.main(["sweep", "--param", "mu", "--points", "7", "--value-at", "3", "--out", str(p), "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_failed_rows_are_blank(capsys):
    # theta above the interiority threshold gives never_reinsure rows with an empty x_star;
    # values at or below eta fail outright and are reported on stderr
    code, out, err = run(capsys, "sweep", "--param", "theta", "--values", "0.25,0.4,0.5")
    rows = read_csv(out)[1]
    assert rows[0]["b_star"] == "" and rows[0]["x_star"] == ""
    assert rows[1]["b_star"] != ""
    assert "warning" in err
    assert code == 3  # 2 of 3 rows succeed, below the 90% bar


# --- compare -------------------------------------------------------------------------


def test_compare_identical_slots(capsys, tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(benchmark("proportional_exponential").to_dict()))
    code, out, err = run(capsys, "compare", "--proportional", str(path), "--excess-of-loss", str(path), "--x-grid", "0,40,50")
    assert code == 0
    _, rows = read_csv(out)
    assert list(rows[0]) == ["x", "U_proportional", "U_excess_of_loss", "diff"]
    assert all(float(r["diff"]) == 0.0 for r in rows)
    assert len(rows) == 50


def test_compare_exponential_default(capsys):
    code, out, err = run(capsys, "compare", "--benchmark", "proportional_exponential")
    assert code == 0
    _, rows = read_csv(out)
    assert len(rows) == 200
    assert err.strip()  # one summary line about the sign of diff


def test_compare_mismatched_laws(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_text(json.dumps(benchmark("proportional_exponential").to_dict()))
    b.write_text(json.dumps(benchmark("xl_exponential", mu=12.0).to_dict()))
    assert cli.main(["compare", "--proportional", str(a), "--excess-of-loss", str(b)]) == 2


# --- simulate ------------------------------------------------------------------------


def test_simulate_tiny_passes(capsys):
    code, out, _ = run(capsys, "simulate", *TINY, "--seed", "42")
    assert code == 0
    assert "0 of 16 checks failed" in out


def test_simulate_json_out(capsys, tmp_path):
    path = tmp_path / "mc.json"
    code, _, _ = run(capsys, "simulate", *TINY, "--levels", "1", "--surplus", "0", "--out", str(path), "--quiet")
    assert code == 0
    _, rows = read_csv(path.read_text())
    assert list(rows[0]) == ["check", "kind", "estimate", "se", "target", "budget", "result"]
    assert {r["check"] for r in rows} >= {"G_1(0)", "U(0)"}
    assert all(r["result"] == "pass" for r in rows)


def test_simulate_wrong_trigger_flagged(capsys):
    code, out, _ = run(capsys, "simulate", "--paths", "2000", "--dt", "1e-2", "--x-star-shift", "20", "--seed", "42")
    assert code == 4
    probe = [line for line in out.splitlines() if line.startswith("probe db=+0 dx=-5")]
    assert probe and probe[0].endswith("FAIL")
