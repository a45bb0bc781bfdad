from __future__ import annotations

import json

import pytest

from fairlens.cli import main
from fairlens.errors import ConfigError
from fairlens.eventlog import TRIAGE, write_log
from fairlens.pipeline import PipelineConfig, Thresholds, run_pipeline
from fairlens.report import parse_report_json
from fairlens.triage_sim import generate_log

ARTIFACTS = ("outcomes.csv", "net.json", "results.csv", "results.json", "report.md")
IDENTITY_MAP = {"case_id": "case_id", "activity": "activity", "timestamp": "timestamp", "race": "race",
                "age": "age", "gender": "gender", "insurance": "insurance", "language": "language",
                "acuity": "acuity", "disposition": "disposition"}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def sim_config(tmp_path, n=600, **extra):
    return write_config(tmp_path, {"input": {"simulate": {"n_cases": n}}, "output_dir": "out", "seed": 3, **extra})


# ----------------------------------------------------------------------- analyze

def test_analyze_simulated_writes_all_artifacts(tmp_path, capsys):
    assert main(["analyze", "--config", str(sim_config(tmp_path))]) == 0
    for name in ARTIFACTS:
        assert (tmp_path / "out" / name).stat().st_size > 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split(":")[0] for line in out] == ["Distributive", "Procedural", "Interactional"]
    results, _ = parse_report_json((tmp_path / "out" / "results.json").read_text())
    assert len(results) == 4 * 5 * 5


def test_same_seed_gives_identical_json(tmp_path):
    cfg = sim_config(tmp_path)
    for out in ("a", "b"):
        assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path / out), "--seed", "42"]) == 0
    for name in ("results.json", "results.csv", "net.json", "outcomes.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seed_changes_outcomes(tmp_path):
    cfg = sim_config(tmp_path)
    for out, seed in (("a", "1"), ("b", "2")):
        assert main(["analyze", "--config", str(cfg), "--out", str(tmp_path / out), "--seed", seed]) == 0
    assert (tmp_path / "a" / "outcomes.csv").read_bytes() != (tmp_path / "b" / "outcomes.csv").read_bytes()


@pytest.mark.parametrize("fmt, marker", [("md", "# Triage fairness report"), ("json", '"results"'),
                                         ("csv", "outcome,acuity,attribute")])
def test_format_echoes_report(tmp_path, capsys, fmt, marker):
    assert main(["analyze", "--config", str(sim_config(tmp_path, 300)), "--format", fmt]) == 0
    assert marker in capsys.readouterr().out


def test_analyze_from_log_file(tmp_path):
    write_log(generate_log(400, seed=8), tmp_path / "log.csv")
    cfg = write_config(tmp_path, {"input": {"log": "log.csv"}, "column_map": IDENTITY_MAP, "output_dir": "out"})
    assert main(["analyze", "--config", str(cfg)]) == 0
    meta = json.loads((tmp_path / "out" / "results.json").read_text())["meta"]
    assert meta["cases_loaded"] == 400 and meta["source"] == "log.csv"


def test_missing_timestamp_mapping_names_key(tmp_path, capsys):
    write_log(generate_log(20, seed=1), tmp_path / "log.csv")
    cmap = {k: v for k, v in IDENTITY_MAP.items() if k != "timestamp"}
    cfg = write_config(tmp_path, {"input": {"log": "log.csv"}, "column_map": cmap})
    status = main(["analyze", "--config", str(cfg)])
    assert status != 0
    assert "column_map.timestamp" in capsys.readouterr().err


@pytest.mark.parametrize("doc, key", [
    ({}, "input"),
    ({"input": {"log": "x.csv"}}, "column_map"),
    ({"input": {"log": "x.csv", "simulate": {}}}, "input"),
    ({"input": {"simulate": {}}, "thresholds": {"tau": 2}}, "thresholds.tau"),
    ({"input": {"simulate": {}}, "thresholds": {"min_group_n": 0}}, "thresholds.min_group_n"),
    ({"input": {"simulate": {}}, "thresholds": {"effect_bands": "cohen"}}, "thresholds.effect_bands"),
    ({"input": {"simulate": {"n_cases": 0}}}, "input.simulate.n_cases"),
    ({"input": {"simulate": {}}, "seed": -1}, "seed"),
    ({"input": {"simulate": {}}, "colour": 1}, "config"),
    ({"input": {"simulate": {}}, "justice": {"interactional_attributes": ["Height"]}},
     "justice.interactional_attributes"),
])
def test_config_errors_name_key(doc, key):
    with pytest.raises(ConfigError) as exc:
        PipelineConfig.from_dict(doc)
    assert exc.value.key == key


def test_config_error_exit_status(tmp_path, capsys):
    cfg = write_config(tmp_path, {"input": {"simulate": {}}, "thresholds": {"alpha": 3}})
    assert main(["analyze", "--config", str(cfg)]) == 2
    assert "thresholds.alpha" in capsys.readouterr().err
    assert main(["analyze", "--config", str(tmp_path / "missing.json")]) == 2


def test_missing_log_file_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, {"input": {"log": "nope.csv"}, "column_map": IDENTITY_MAP})
    assert main(["analyze", "--config", str(cfg)]) == 2
    assert "input.log" in capsys.readouterr().err


def test_thresholds_round_trip_defaults():
    assert Thresholds.from_dict({}) == Thresholds()


def test_run_pipeline_api(tmp_path):
    cfg = PipelineConfig.from_dict({"input": {"simulate": {"n_cases": 300}}})
    lines = []
    res = run_pipeline(cfg, tmp_path, echo=lines.append)
    assert res.status == 0 and len(lines) == 3
    assert set(res.artifacts) == {"outcomes", "net", "results_csv", "results_json", "report"}
    assert res.meta["cases_loaded"] == 300


# ----------------------------------------------------------------------- simulate / discover

def test_simulate_then_discover(tmp_path):
    scenario = write_config(tmp_path, {"n_cases": 150, "p_retriage": 0.2,
                                       "bias": {"entries": [{"attribute": "insurance", "group": "Public",
                                                             "time_multiplier": 1.5}]}}, "scenario.json")
    log = tmp_path / "sim" / "log.csv"
    assert main(["simulate", "--scenario", str(scenario), "--out", str(log), "--seed", "5"]) == 0
    assert len({line.split(",")[0] for line in log.read_text().splitlines()[1:]}) == 150
    net, dot = tmp_path / "net.json", tmp_path / "net.dot"
    assert main(["discover", "--log", str(log), "--out", str(net), "--dot", str(dot), "--tau", "0.8"]) == 0
    doc = json.loads(net.read_text())
    assert TRIAGE in doc["transitions"] and dot.read_text().startswith("digraph")


def test_simulate_is_seeded(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert main(["simulate", "--out", str(tmp_path / name), "--seed", "9", "--n-cases", "50"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_simulate_bad_scenario_key(tmp_path, capsys):
    scenario = write_config(tmp_path, {"p_retriage": 3}, "scenario.json")
    assert main(["simulate", "--scenario", str(scenario), "--out", str(tmp_path / "x.csv")]) == 2
    assert "scenario.p_retriage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["simulate", "--out", "x.csv", "--seed", str(2**64)],
                                  ["discover", "--log", "x.csv", "--out", "n.json", "--tau", "1.5"],
                                  []])
def test_argument_validation(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
