"""Analysis configuration and the end-to-end pipeline."""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .discovery import count_directly_follows, mine_dependency_graph, to_process_net
from .errors import ConfigError
from .eventlog import (
    DEFAULT_TIMESTAMP_FORMAT,
    AgeBands,
    ColumnMap,
    EventLog,
    filter_for_analysis,
    impute_case_attributes,
    load_log,
    map_log_demographics,
)
from .outcomes import extract_outcomes, write_outcomes_csv
from .report import JusticeSummary, map_to_justice, render_report, summary_lines
from .stats import ALPHA, MIN_GROUP_N, Attribute, EffectBands, StatTestResult, run_attribute_tests
from .triage_sim import BiasConfig, DangerZone, Scenario, generate_log

REPORT_FORMATS = ("md", "json", "csv")
_EXT = {"md": "md", "markdown": "md", "json": "json", "csv": "csv"}


def _take(d: Mapping, allowed: tuple[str, ...], where: str) -> dict:
    if not isinstance(d, Mapping):
        raise ConfigError("expected a JSON object", where)
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys {extra}", where)
    return dict(d)


def _number(v, key: str, lo: float | None = None, hi: float | None = None, integer: bool = False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not float(v).is_integer()):
        raise ConfigError(f"expected {'an integer' if integer else 'a number'}, got {v!r}", key)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"value {v!r} outside [{lo}, {hi}]", key)
    return int(v) if integer else float(v)


@dataclass(frozen=True)
class Thresholds:
    tau: float = 0.8
    min_group_n: int = MIN_GROUP_N
    gap_threshold_min: float = 30.0
    alpha: float = ALPHA
    age_bands: AgeBands = AgeBands()
    vital_cutoffs: DangerZone = DangerZone()
    effect_bands: str = "table"

    @classmethod
    def from_dict(cls, d: Mapping) -> "Thresholds":
        d = _take(d, ("tau", "min_group_n", "gap_threshold_min", "alpha", "age_bands", "vital_cutoffs",
                      "effect_bands"), "thresholds")
        kw: dict[str, Any] = {}
        if "tau" in d:
            kw["tau"] = _number(d["tau"], "thresholds.tau", 0.0, 1.0)
        if "min_group_n" in d:
            kw["min_group_n"] = _number(d["min_group_n"], "thresholds.min_group_n", 1, integer=True)
        if "gap_threshold_min" in d:
            kw["gap_threshold_min"] = _number(d["gap_threshold_min"], "thresholds.gap_threshold_min", 0.0)
        if "alpha" in d:
            kw["alpha"] = _number(d["alpha"], "thresholds.alpha", 0.0, 1.0)
        if "age_bands" in d:
            ab = _take(d["age_bands"], ("until45_max", "until65_max"), "thresholds.age_bands")
            try:
                kw["age_bands"] = AgeBands(**{k: _number(v, f"thresholds.age_bands.{k}", integer=True)
                                              for k, v in ab.items()})
            except ConfigError as exc:
                raise ConfigError(str(exc).split(": ", 1)[-1], "thresholds.age_bands") from None
        if "vital_cutoffs" in d:
            vc = _take(d["vital_cutoffs"], ("heart_rate_max", "respiratory_rate_max", "spo2_min"),
                       "thresholds.vital_cutoffs")
            kw["vital_cutoffs"] = DangerZone(**{k: _number(v, f"thresholds.vital_cutoffs.{k}")
                                                for k, v in vc.items()})
        if "effect_bands" in d:
            if d["effect_bands"] not in ("table", "prose"):
                raise ConfigError("expected 'table' or 'prose'", "thresholds.effect_bands")
            kw["effect_bands"] = d["effect_bands"]
        return cls(**kw)


@dataclass(frozen=True)
class SimulationInput:
    n_cases: int
    scenario: Scenario
    bias: BiasConfig


@dataclass(frozen=True)
class PipelineConfig:
    log_path: Path | None = None
    simulation: SimulationInput | None = None
    column_map: ColumnMap = ColumnMap()
    delimiter: str = ","
    timestamp_format: str = DEFAULT_TIMESTAMP_FORMAT
    output_dir: Path = Path("fairlens-out")
    seed: int = 0
    thresholds: Thresholds = Thresholds()
    interactional_attributes: tuple[Attribute, ...] = (Attribute.LANGUAGE,)

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: str | os.PathLike = ".") -> "PipelineConfig":
        """Parse the JSON config. Relative paths resolve against ``base_dir``."""
        base = Path(base_dir)
        d = _take(d, ("input", "column_map", "output_dir", "seed", "thresholds", "justice"), "config")
        if "input" not in d:
            raise ConfigError("missing; give input.log or input.simulate", "input")
        inp = _take(d["input"], ("log", "simulate", "delimiter", "timestamp_format"), "input")
        if ("log" in inp) == ("simulate" in inp):
            raise ConfigError("give exactly one of input.log and input.simulate", "input")
        kw: dict[str, Any] = {}
        if "seed" in d:
            kw["seed"] = _number(d["seed"], "seed", 0, 2**64 - 1, integer=True)
        thresholds = Thresholds.from_dict(d.get("thresholds", {}))
        kw["thresholds"] = thresholds
        if "log" in inp:
            if not isinstance(inp["log"], str) or not inp["log"]:
                raise ConfigError("expected a file path", "input.log")
            kw["log_path"] = base / inp["log"]
            if "column_map" not in d:
                raise ConfigError("required when input.log is given", "column_map")
            kw["column_map"] = _column_map(d["column_map"])
            if "delimiter" in inp:
                if not isinstance(inp["delimiter"], str) or len(inp["delimiter"]) != 1:
                    raise ConfigError("expected a single character", "input.delimiter")
                kw["delimiter"] = inp["delimiter"]
            if "timestamp_format" in inp:
                kw["timestamp_format"] = str(inp["timestamp_format"])
        else:
            kw["simulation"] = _simulation(inp["simulate"], base, thresholds)
            if "column_map" in d:
                kw["column_map"] = _column_map(d["column_map"])
        if "output_dir" in d:
            kw["output_dir"] = base / d["output_dir"]
        if "justice" in d:
            j = _take(d["justice"], ("interactional_attributes",), "justice")
            try:
                kw["interactional_attributes"] = tuple(Attribute(a) for a in j.get("interactional_attributes", []))
            except ValueError as exc:
                raise ConfigError(str(exc), "justice.interactional_attributes") from None
        return cls(**kw)

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", "config") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "config") from None
        return cls.from_dict(d, Path(path).parent)


def _column_map(d) -> ColumnMap:
    if not isinstance(d, Mapping):
        raise ConfigError("expected a JSON object", "column_map")
    return ColumnMap.from_dict(d)


def _simulation(d, base: Path, thresholds: Thresholds) -> SimulationInput:
    d = _take(d, ("n_cases", "scenario", "bias"), "input.simulate")
    n = _number(d.get("n_cases", 5000), "input.simulate.n_cases", 1, integer=True)
    raw = d.get("scenario", {})
    bias = BiasConfig()
    if isinstance(raw, str):
        scenario, bias = Scenario.from_json(base / raw)
    else:
        raw = dict(raw)
        if "bias" in raw:
            bias = BiasConfig.from_dict(raw.pop("bias"))
        scenario = Scenario.from_dict(raw)
    if "bias" in d:
        bias = BiasConfig.from_dict(d["bias"])
    # analysis thresholds own the age bands and vital cutoffs
    scenario = replace(scenario, age_bands=thresholds.age_bands, danger_zone=thresholds.vital_cutoffs)
    return SimulationInput(n, scenario, bias)


@dataclass
class PipelineResult:
    results: list[StatTestResult]
    summary: JusticeSummary
    artifacts: dict[str, Path] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)
    status: int = 0


def load_input(config: PipelineConfig) -> EventLog:
    if config.simulation is not None:
        sim = config.simulation
        return generate_log(sim.n_cases, sim.bias, config.seed, sim.scenario)
    try:
        return load_log(config.log_path, config.column_map, delimiter=config.delimiter,
                        timestamp_format=config.timestamp_format)
    except FileNotFoundError:
        raise ConfigError(f"no such file: {config.log_path}", "input.log") from None


def run_pipeline(config: PipelineConfig, out_dir: str | os.PathLike | None = None,
                 report_format: str | None = None, echo=print) -> PipelineResult:
    """load -> impute -> map -> filter -> discover -> replay -> extract -> test -> justice -> render.

    Writes outcomes.csv, net.json, results.csv, results.json and report.md to
    the output directory. ``report_format`` additionally echoes the full
    report in that format; the justice summary lines are always echoed.
    """
    if report_format is not None and report_format not in _EXT:
        raise ConfigError(f"unknown report format {report_format!r}", "format")
    th = config.thresholds
    out = Path(out_dir) if out_dir is not None else config.output_dir

    raw = load_input(config)
    log = impute_case_attributes(raw)
    log = map_log_demographics(log, th.age_bands)
    log = filter_for_analysis(log)
    if len(log) == 0:
        raise ConfigError("no cases left after demographic mapping and filtering", "input")

    net = to_process_net(mine_dependency_graph(count_directly_follows(log), th.tau))
    unmapped_disp: Counter = Counter()
    outcomes = extract_outcomes(log, net, th.gap_threshold_min, unmapped_disp)
    bands = EffectBands.for_convention(th.effect_bands)
    results = run_attribute_tests(outcomes, th.min_group_n, th.alpha, bands)
    summary = map_to_justice(results, interactional_attributes=config.interactional_attributes)

    prov = log.provenance
    flagged = sum(o.replay_flagged for o in outcomes)
    meta = {
        "source": Path(prov.source).name if config.log_path else prov.source,
        "seed": config.seed,
        "rows_read": raw.provenance.n_rows,
        "rows_rejected": raw.provenance.rejected_rows,
        "cases_loaded": len(raw),
        "cases_analyzed": len(log),
        "cases_removed_invalid_age": prov.invalid_age_cases,
        "cases_removed_deleted_race": prov.removed_cases,
        "imputation_conflicts": prov.imputation_conflicts,
        "unmapped_values": dict(sorted((Counter(prov.unmapped) + unmapped_disp).items())),
        "cases_with_unknown_activities": flagged,
        "tau": th.tau,
        "min_group_n": th.min_group_n,
        "gap_threshold_min": th.gap_threshold_min,
        "alpha": th.alpha,
        "effect_bands": th.effect_bands,
    }

    out.mkdir(parents=True, exist_ok=True)
    artifacts = {
        "outcomes": out / "outcomes.csv",
        "net": out / "net.json",
        "results_csv": out / "results.csv",
        "results_json": out / "results.json",
        "report": out / "report.md",
    }
    write_outcomes_csv(outcomes, artifacts["outcomes"])
    artifacts["net"].write_text(net.to_json() + "\n", encoding="utf-8")
    rendered = {fmt: render_report(results, summary, fmt, meta) for fmt in REPORT_FORMATS}
    artifacts["results_csv"].write_text(rendered["csv"], encoding="utf-8")
    artifacts["results_json"].write_text(rendered["json"], encoding="utf-8")
    artifacts["report"].write_text(rendered["md"], encoding="utf-8")

    for line in summary_lines(summary):
        echo(line)
    if report_format is not None:
        echo(rendered[_EXT[report_format]])
    return PipelineResult(results, summary, artifacts, meta)
