import csv
import json

import numpy as np
import pytest

from nvlab.cli import main
from nvlab.estimates import EstimateReport, TrialRecord, bilinear_test, log2_slope
from nvlab.fieldio import validate_manifest
from nvlab.reports import emit_plotdata, fmt, refit_slope, write_report


def test_fmt_is_deterministic():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(np.float64(2.0)) == fmt(2.0)
    assert fmt(True) == "true"


def test_header_only_for_empty_report(tmp_path):
    rep = EstimateReport("empty", {}, [])
    path = emit_plotdata(rep, tmp_path / "plot.csv")
    assert path.read_text().splitlines() == ["parameter,trial,quantity,value"]


def test_refit_slope_matches_summary(tmp_path):
    trials = [TrialRecord.make(k, i, 2.0 ** (0.25 * k) * (1 + 0.1 * i), 1.0)
              for k in (3, 4, 5, 6) for i in range(3)]
    rep = EstimateReport("toy", {}, trials, {"slope_max": 0.25}, True)
    write_report(rep, tmp_path, {"seed": 0})
    assert refit_slope(tmp_path / "toy_trials.csv") == pytest.approx(0.25, abs=1e-12)


def test_report_manifest_validates_and_detects_edits(tmp_path):
    rep = bilinear_test(k_f_list=(3, 4, 5, 6), trials=1, n_samples=20, seed=2)
    man = write_report(rep, tmp_path, {"seed": 2})
    assert validate_manifest(man)
    doc = json.loads(man.read_text())
    assert doc["verdict"] == rep.verdict
    slope = refit_slope(tmp_path / "bilinear_trials.csv")
    assert slope == pytest.approx(rep.summary["slope_max"], abs=1e-12)
    with (tmp_path / "bilinear_trials.csv").open("a") as fh:
        fh.write("tampered\n")
    assert not validate_manifest(man)


def _run(tmp_path, name, *args):
    out = tmp_path / name
    code = main(list(args) + ["--out", str(out)])
    return code, out


def test_cli_rerun_is_byte_identical(tmp_path):
    args = ("verify", "measures", "--k-f", "5", "--trials", "2", "--strata", "1024", "--seed", "4")
    c1, a = _run(tmp_path, "a", *args)
    c2, b = _run(tmp_path, "b", *args)
    assert c1 == c2
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_cli_config_and_flag_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nseed = 3\n\n[verify.measures]\nk-f = 5\ntrials = 3\nstrata = 1024\n")
    code, out = _run(tmp_path, "m", "verify", "measures", "--config", str(ini), "--trials", "2")
    assert code in (0, 1)
    man = json.loads((out / "measure_bound_manifest.json").read_text())
    assert man["config"]["trials"] == 2
    assert man["config"]["k_f"] == 5
    assert man["config"]["seed"] == 3
    with (out / "measure_bound_trials.csv").open() as fh:
        assert len(list(csv.DictReader(fh))) == 2


def test_cli_illposed_table_and_exit_code(tmp_path):
    code, out = _run(tmp_path, "il", "illposed", "sweep", "--N", "16,32,64,128", "--nodes", "6")
    with (out / "illposed.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["N"]) for r in rows] == [16, 32, 64, 128]
    slope = log2_slope(np.log2([float(r["N"]) for r in rows]), [float(r["III"]) for r in rows])
    assert slope == pytest.approx(2.0, abs=0.3)
    man = json.loads((out / "manifest.json").read_text())
    assert code == (0 if man["verdict"] else 1)
    assert validate_manifest(out / "manifest.json")


def test_cli_scaling_and_resonance(tmp_path):
    assert _run(tmp_path, "s", "scaling", "check")[0] == 0
    code, out = _run(tmp_path, "r", "resonance", "map", "--n", "5", "--samples", "2000")
    assert code == 0
    with (out / "resonance_map.csv").open() as fh:
        assert len(list(csv.DictReader(fh))) == 25


def test_cli_simulate_writes_trajectory(tmp_path):
    code, out = _run(tmp_path, "sim", "simulate", "--nx", "32", "--t-end", "0.01", "--dt", "0.001",
                     "--save-every", "5")
    assert code == 0
    assert validate_manifest(out / "trajectory_manifest.json")
    assert validate_manifest(out / "manifest.json")


def test_cli_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[verify.measures]\nunknown_key = 1\n")
    assert main(["verify", "measures", "--config", str(bad)]) == 2
    garbled = tmp_path / "garbled.ini"
    garbled.write_text("no section header\n")
    assert main(["verify", "measures", "--config", str(garbled)]) == 2
    assert main(["verify", "measures", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["verify", "measures", "--trials", "many"]) == 2
    assert "usage" in capsys.readouterr().err
