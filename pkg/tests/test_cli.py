import json
import subprocess
import sys

import pytest

from geodesic_observer.cli import main


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_check_passes_on_linear(tmp_path, capsys):
    assert run(tmp_path, "check", "--benchmark", "linear", "--condition", "a2", "--condition", "a3-nullity",
               "--samples", "32") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert "not a certificate" in report["disclaimer"]
    assert [r["verdict"] for r in report["reports"]] == ["pass", "pass"]
    assert "a2: pass" in capsys.readouterr().out


def test_check_failure_reports_witness(tmp_path):
    code = run(tmp_path, "check", "--benchmark", "oscillator", "--metric", "observability", "--condition", "a3-nullity",
               "--samples", "32")
    assert code == 1
    rep = json.loads((tmp_path / "report.json").read_text())["reports"][0]
    assert rep["witness"]["block"] == "tangent-tangent"
    assert len(rep["witness"]["point"]) == 3


def test_check_is_deterministic(tmp_path):
    for sub in ("a", "b"):
        run(tmp_path / sub, "check", "--benchmark", "oscillator", "--metric", "tuned-product", "--condition", "a2",
            "--samples", "16", "--seed", "3")
    assert (tmp_path / "a" / "report.json").read_text() == (tmp_path / "b" / "report.json").read_text()


def test_tolerance_flag_sets_a2_threshold(tmp_path):
    assert run(tmp_path, "check", "--benchmark", "linear", "--condition", "a2", "--samples", "8", "--tol", "2.0") == 1


@pytest.mark.parametrize("config,fragment", [
    ({"benchmark": "linear", "conditions": ["a2"], "colour": "red"}, "colour"),
    ({"benchmark": "linear", "conditions": ["a5"]}, "field conditions/0"),
    ({"benchmark": "linear", "benchmark_params": {"epsilon": 0.5}, "conditions": ["a2"]}, "epsilon"),
    ({"benchmark": "linear", "sampling": {"count": 0}, "conditions": ["a2"]}, "field sampling/count"),
])
def test_bad_configs_exit_3(tmp_path, capsys, config, fragment):
    path = tmp_path / "job.json"
    path.write_text(json.dumps(config))
    assert main(["check", "--config", str(path), "--out", str(tmp_path)]) == 3
    assert fragment in capsys.readouterr().err


def test_json_syntax_error_has_position(tmp_path, capsys):
    path = tmp_path / "job.json"
    path.write_text('{\n  "benchmark": "linear",\n  "conditions": [a2]\n}')
    assert main(["check", "--config", str(path)]) == 3
    assert "line 3" in capsys.readouterr().err


def test_missing_condition_and_benchmark(tmp_path):
    assert run(tmp_path, "check", "--benchmark", "linear") == 3
    assert run(tmp_path, "check", "--condition", "a2") == 3
    assert main(["frobnicate"]) == 3


def test_config_with_metric_recipe(tmp_path):
    job = {"benchmark": "linear", "conditions": ["a2"], "sampling": {"count": 16},
           "metric": {"type": "pmod", "base": {"type": "builtin", "name": "identity"}, "Q": 2.0}}
    path = tmp_path / "job.json"
    path.write_text(json.dumps(job))
    assert main(["check", "--config", str(path), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())["reports"][0]
    # identity on the kernel direction (0, 1) gives 2 * 0.2
    assert rep["margin"] == pytest.approx(0.4, rel=1e-10)
    job["metric"]["base"] = {"type": "pmod", "Q": "two"}
    path.write_text(json.dumps(job))
    assert main(["check", "--config", str(path), "--out", str(tmp_path)]) == 3


def test_geodesic_boundary_value(tmp_path, capsys):
    assert run(tmp_path, "geodesic", "--metric", "identity", "--start", "0,0", "--end", "3,4") == 0
    assert capsys.readouterr().out.strip() == "5.000000000000"
    lines = (tmp_path / "geodesic.csv").read_text().strip().split("\n")
    assert lines[0] == "s,x_1,x_2,speed"
    assert lines[-1].split(",")[1:3] == ["3", "4"]


def test_geodesic_initial_value(tmp_path, capsys):
    assert run(tmp_path, "geodesic", "--benchmark", "oscillator", "--metric", "tuned-product", "--start", "1,0.5,1",
               "--velocity", "0.1,0,0", "--s-end", "2") == 0
    assert float(capsys.readouterr().out) > 0
    assert run(tmp_path, "geodesic", "--metric", "identity", "--start", "0,0") == 3
    assert run(tmp_path, "geodesic", "--metric", "identity", "--start", "0,0", "--end", "1,1,1") == 3


def test_simulate_and_report(tmp_path):
    args = ["simulate", "--benchmark", "linear", "--horizon", "5", "--gain", "1"]
    assert run(tmp_path, *args) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["certificate"]["verdict"] == "pass"
    assert summary["distance_method"] == "constant-metric"
    first = (tmp_path / "run.csv").read_text()
    assert run(tmp_path, *args) == 0
    assert (tmp_path / "run.csv").read_text() == first
    run(tmp_path, "check", "--benchmark", "linear", "--condition", "a2", "--samples", "8")
    assert run(tmp_path, "report") == 0
    text = (tmp_path / "report.txt").read_text()
    assert "contraction" in text and "a2" in text
    dat = (tmp_path / "dist_vs_t.dat").read_text().split("\n")
    assert dat[0] == "# t dist" and len(dat[1].split()) == 2


def test_simulate_rejects_outside_start(tmp_path, capsys):
    assert run(tmp_path, "simulate", "--benchmark", "linear", "--x0", "9,0", "--gain", "1") == 3
    assert "outside" in capsys.readouterr().err


def test_report_without_artifacts(tmp_path):
    assert run(tmp_path / "empty", "report") == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "geodesic_observer.cli", "check", "--benchmark", "linear",
                           "--condition", "a2", "--samples", "4", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
