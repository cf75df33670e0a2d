from __future__ import annotations

import json
import subprocess
import sys
from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest

from steermon import cli
from steermon.cli import DEFAULT_OUT, OUT_ENV, emit_table, main, run_scenario
from steermon.scenario import ScenarioError, parse_scenario

SHIPPED = sorted(Path(str(files("steermon") / "scenarios")).glob("*.yaml"))
QUICK = [p for p in SHIPPED if p.stem != "random_suites"]


def _write(tmp_path: Path, text: str, name: str = "s.yaml") -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def _read_table(path: Path):
    lines = path.read_text().splitlines()
    header = lines[0].split("\t")
    rows = [[float(v) for v in ln.split("\t")] for ln in lines[1:]]
    return header, np.array(rows)


@pytest.mark.parametrize("path", QUICK, ids=lambda p: p.stem)
def test_shipped_scenarios_run(path, tmp_path):
    assert main(["run", str(path), "--out", str(tmp_path)]) == 0
    assert (tmp_path / path.stem / "report.json").exists() or (tmp_path / path.stem / "table.tsv").exists()


def test_scenario_names_match_files():
    for p in SHIPPED:
        assert parse_scenario(p.read_text(), str(p)).name == p.stem


def test_w_report_values():
    doc = run_scenario(files("steermon") / "scenarios" / "w_state_pairwise.yaml")
    pt = doc.payload["points"][0]
    got = [i["variance"] for i in pt["inferences"]]
    np.testing.assert_allclose(got, [2 / 3, 5 / 9, 5 / 9], atol=1e-12)
    s3 = pt["witnesses"][0]
    assert s3["kind"] == "S3" and s3["value"] == pytest.approx(8 / 9, abs=1e-12) and s3["detects_steering"]
    assert sum(e["kind"] == "S3" for e in pt["graph"]["directed_edges"]) == 6


def test_loss_sweep_crossing(tmp_path):
    path = files("steermon") / "scenarios" / "tmsv_loss_sweep.yaml"
    assert main(["run", str(path), "--out", str(tmp_path), "--format", "table"]) == 0
    header, rows = _read_table(tmp_path / "tmsv_loss_sweep" / "table.tsv")
    assert header[:2] == ["eta", "E[B|A]"]
    assert len(rows) == 21
    eta, e = rows[:, 0], rows[:, 1]
    # detection exactly above half transmission
    assert np.all((e < 1 - 1e-9) == (eta > 0.5))
    below, above = e[eta == 0.45][0], e[eta == 0.55][0]
    assert (below - 1) * (above - 1) < 0


def test_r_sweep_column(tmp_path):
    path = files("steermon") / "scenarios" / "tmsv_r_sweep.yaml"
    assert main(["run", str(path), "--out", str(tmp_path)]) == 0
    header, rows = _read_table(tmp_path / "tmsv_r_sweep" / "table.tsv")
    assert header == ["r", "E[B|A]"]
    np.testing.assert_allclose(rows[:, 1], 1 / np.cosh(2 * rows[:, 0]), rtol=1e-12)


def test_single_point_sweep_two_lines(tmp_path):
    p = _write(tmp_path, "name: one\nstate: tmsv:$r\nwitnesses: [{kind: E, steered: B, group: A}]\n"
                         "sweep: {parameter: r, values: [1.0]}\noutputs: [table]\n")
    text = emit_table(run_scenario(p))
    assert len(text.splitlines()) == 2


def test_table_uses_full_precision():
    doc = run_scenario(files("steermon") / "scenarios" / "tmsv_r_sweep.yaml")
    rows = emit_table(doc).splitlines()[1:]
    exact = [pt["witnesses"][0]["value"] for pt in doc.payload["points"]]
    assert [float(r.split("\t")[1]) for r in rows] == exact


def test_malformed_names_field(tmp_path, capsys):
    p = _write(tmp_path, "name: bad\nstate: w\nwitnesses: [{kind: S9, steered: B, group: A}]\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "witnesses[0].kind" in err


def test_unknown_top_level_field(tmp_path, capsys):
    p = _write(tmp_path, "name: bad\nstate: w\nplots: yes\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 1
    assert "plots" in capsys.readouterr().err


def test_unknown_canonical_state(tmp_path, capsys):
    p = _write(tmp_path, "name: bad\nstate: cluster:4\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 1
    assert "state" in capsys.readouterr().err


def test_yaml_error_has_position(tmp_path, capsys):
    p = _write(tmp_path, "name: bad\nstate: [w\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "line" in err and "column" in err


def test_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "none.yaml")]) == 1


def test_usage_error_exit(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 1


def test_suites_need_seed(tmp_path, capsys):
    p = _write(tmp_path, "name: s\nstate: ghz3\nmonogamy: [{suite: gaussian_group, samples: 2}]\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 1
    assert "seed" in capsys.readouterr().err
    assert main(["run", str(p), "--out", str(tmp_path), "--seed", "3"]) == 0
    report = json.loads((tmp_path / "s" / "report.json").read_text())
    assert report["payload"]["seed"] == 3


def test_runtime_error_exit(tmp_path, capsys, monkeypatch):
    def fail(*_):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setattr(cli, "evaluate_point", fail)
    p = _write(tmp_path, "name: r\nstate: tmsv:1\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 2
    assert "LinAlgError" in capsys.readouterr().err


def test_gaussian_kind_mismatch_is_validation(tmp_path, capsys):
    p = _write(tmp_path, "name: r\nstate: tmsv:1\nwitnesses: [{kind: S3, steered: B, group: A}]\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == 1
    assert "witnesses[0].kind" in capsys.readouterr().err


def test_environment_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["run", str(files("steermon") / "scenarios" / "tmsv_r_sweep.yaml")]) == 0
    assert (tmp_path / "env" / "tmsv_r_sweep" / "table.tsv").exists()


def test_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.delenv(OUT_ENV, raising=False)
    monkeypatch.chdir(tmp_path)
    assert main(["run", str(files("steermon") / "scenarios" / "tmsv_r_sweep.yaml")]) == 0
    assert (tmp_path / DEFAULT_OUT / "tmsv_r_sweep" / "report.json").exists()


def test_format_graph_only(tmp_path):
    path = files("steermon") / "scenarios" / "ghz_collective.yaml"
    assert main(["run", str(path), "--out", str(tmp_path), "--format", "graph"]) == 0
    out = tmp_path / "ghz_collective"
    assert sorted(p.name for p in out.iterdir()) == ["graph.dot", "graph.json"]
    dot = (out / "graph.dot").read_text()
    assert "{A,C} -> B" in dot and dot.count(" -> ") == 2


def test_report_json_layout(tmp_path):
    doc = run_scenario(files("steermon") / "scenarios" / "tmsv_r_sweep.yaml")
    data = json.loads(doc.to_json())
    assert set(data) == {"payload", "timing"}
    assert data["payload"]["sweep"]["values"][-1] == 2.0


@pytest.mark.parametrize("path", QUICK, ids=lambda p: p.stem)
def test_payload_deterministic(path):
    assert run_scenario(path).payload_json() == run_scenario(path).payload_json()


def test_sweep_grid_has_no_float_noise():
    sc = parse_scenario("name: g\nstate: tmsv:1\nsweep: {parameter: r, start: 0, stop: 0.3, step: 0.05}\n")
    assert sc.sweep.values == (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


def test_step_must_divide_span():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario("name: g\nstate: tmsv:1\nsweep: {parameter: r, start: 0, stop: 1, step: 0.3}\n")
    assert exc.value.field.startswith("sweep")


def test_module_entry_point(tmp_path):
    path = files("steermon") / "scenarios" / "tmsv_r_sweep.yaml"
    res = subprocess.run([sys.executable, "-m", "steermon.cli", "run", str(path), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "table.tsv" in res.stdout
