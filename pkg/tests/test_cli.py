import csv
import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from fosdbounds.cli import EXIT_DATA, EXIT_FINDING, EXIT_OK, EXIT_USAGE, RunConfig, main
from fosdbounds.errors import ConfigError


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_writes_sample_and_manifest(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--output", out, "--n", 1000, "--seed", 7) == EXIT_OK
    rows = read_csv(out / "sample.csv")
    assert len(rows) == 1000 and set(rows[0]) == {"y", "d", "z"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 7
    assert manifest["config"]["dgp"]["n"] == 1000


def test_simulate_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--output", tmp_path / name, "--n", 500, "--L", 4) == EXIT_OK
    assert (tmp_path / "a" / "sample.csv").read_bytes() == (tmp_path / "b" / "sample.csv").read_bytes()


def test_refuses_to_overwrite_without_force(tmp_path, capsys):
    out = tmp_path / "sim"
    assert run("simulate", "--output", out, "--n", 50) == EXIT_OK
    before = (out / "sample.csv").read_bytes()
    assert run("simulate", "--output", out, "--n", 60) == EXIT_DATA
    assert "force" in capsys.readouterr().err
    assert (out / "sample.csv").read_bytes() == before
    assert run("simulate", "--output", out, "--n", 60, "--force") == EXIT_OK
    assert len(read_csv(out / "sample.csv")) == 60


def test_invalid_parameter_names_the_field(tmp_path, capsys):
    assert run("simulate", "--output", tmp_path, "--dgp", "rho=1.5") == EXIT_USAGE
    assert "rho" in capsys.readouterr().err


def test_sieve_needs_positive_order(tmp_path):
    assert run("bounds", "--population", "--solver", "sieve", "--J", 0, "--output", tmp_path) == EXIT_USAGE


def test_missing_input_is_a_data_error(tmp_path):
    assert run("bounds", "--input", tmp_path / "nope.csv", "--output", tmp_path / "o") == EXIT_DATA


def test_unknown_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("bounds", "--bogus")
    assert exc.value.code == EXIT_USAGE


def test_config_round_trip(tmp_path):
    cfg = RunConfig(output=str(tmp_path), tau=(0.1, 0.9), J=7, solver="both", seed=3,
                    dgp={**RunConfig().dgp, "L": 4, "rho": 0.2})
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.dgp_config().L == 4 and again.dgp_config().seed == 3
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": 1})


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(RunConfig(seed=11, dgp={**RunConfig().dgp, "n": 200}).to_json())
    out = tmp_path / "o"
    assert run("simulate", "--config", path, "--output", out, "--n", 100) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 11
    assert len(read_csv(out / "sample.csv")) == 100


def test_estimate_then_bounds_from_model(tmp_path):
    sim, est, bnd = tmp_path / "s", tmp_path / "e", tmp_path / "b"
    assert run("simulate", "--output", sim, "--n", 20000, "--L", 3) == EXIT_OK
    assert run("estimate", "--input", sim / "sample.csv", "--output", est, "--constraint-grid", 200) == EXIT_OK
    code = run("bounds", "--input", est / "model.json", "--output", bnd, "--grid", 21, "--tau", "0.5")
    assert code in (EXIT_OK, EXIT_FINDING)
    summary = json.loads((bnd / "summary.json").read_text())
    assert summary["L"] == 3
    assert len(read_csv(bnd / "bounds.csv")) == 21


def population_bounds(tmp_path, L):
    out = tmp_path / f"L{L}"
    assert run("bounds", "--population", "--L", L, "--output", out, "--grid", 41) == EXIT_OK
    return json.loads((out / "summary.json").read_text()), read_csv(out / "bounds.csv")


def test_population_bounds_cover_truth_and_tighten(tmp_path):
    s2, _ = population_bounds(tmp_path, 2)
    s6, rows = population_bounds(tmp_path, 6)
    assert s6["mean_width"] < s2["mean_width"]
    assert s6["validity_violations"] == 0
    assert {"qte", "ate", "infeasible", "points", "minimal_slack"} <= set(s6)
    assert s6["infeasible"] == {"lower": 0, "upper": 0}
    assert len(rows) == 41


def test_both_solvers_report_the_gap(tmp_path):
    out = tmp_path / "both"
    code = run("bounds", "--population", "--L", 3, "--solver", "both", "--J", 10, "--no-mass-constraint",
               "--output", out, "--grid", 11)
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert "sieve" in summary
    rows = read_csv(out / "bounds.csv")
    gaps = [float(r["gap_ub"]) for r in rows if r["gap_ub"] != "nan"]
    assert gaps and min(gaps) >= -1e-6


def test_diagnose_counterexample_is_a_finding(tmp_path):
    path = resources.files("fosdbounds") / "data" / "fosd_counterexample.csv"
    out = tmp_path / "d"
    assert run("diagnose", "--input", path, "--output", out) == EXIT_FINDING
    report = json.loads((out / "fosd_report.json").read_text())
    assert report["passed"] is False
    assert report["max_violation"] == pytest.approx(0.5)
    weights = read_csv(out / "witness_weights.csv")
    assert [(w["group"], float(w["omega"]), float(w["omega_tilde"])) for w in weights] == [
        ("0->0.5", 0.0, 1.0), ("0.5->1", 1.0, 0.0)]


def test_diagnose_population_passes(tmp_path):
    assert run("diagnose", "--population", "--L", 4, "--output", tmp_path) == EXIT_OK


def test_diagnose_two_levels_is_unavailable(tmp_path, capsys):
    assert run("diagnose", "--population", "--L", 2, "--output", tmp_path) == EXIT_DATA
    assert "unavailable" in capsys.readouterr().err


def test_violation_command(tmp_path):
    out = tmp_path / "v"
    with pytest.warns(UserWarning):
        code = run("violation", "--L", 3, "--reps", 10, "--violation-n", 20, "--eval-n", 1000, "--output", out)
    assert code == EXIT_OK
    rep = json.loads((out / "violation.json").read_text())
    assert rep["bound"] == pytest.approx(1 / 21)


def test_reproduce_l2_and_l6(tmp_path):
    assert run("reproduce", "L2", "--output", tmp_path, "--grid", 41) == EXIT_OK
    assert run("reproduce", "L6", "--output", tmp_path, "--grid", 41) == EXIT_OK
    w2 = read_csv(tmp_path / "figure_L2" / "widths.csv")[0]
    w6 = read_csv(tmp_path / "figure_L6" / "widths.csv")[0]
    assert float(w6["mean_width"]) < float(w2["mean_width"])
    curve = read_csv(tmp_path / "figure_L2" / "curve.csv")
    ub = np.array([float(r["ub"]) for r in curve])
    assert np.mean(ub > 0.99) > 0.5
    assert {"true_cdf", "raw_lb", "raw_ub", "lb", "ub"} <= set(curve[0])


def test_reproduce_unknown_figure_lists_ids(capsys):
    with pytest.raises(SystemExit) as exc:
        run("reproduce", "L9")
    assert exc.value.code == EXIT_USAGE
    err = capsys.readouterr().err
    assert "L2" in err and "L5" in err and "L6" in err


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fosdbounds.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "fosdbounds" in res.stdout
