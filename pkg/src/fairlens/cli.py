"""Command-line entry point: ``fairlens analyze | simulate | discover``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .discovery import count_directly_follows, mine_dependency_graph, to_process_net
from .errors import ConfigError, FairlensError
from .eventlog import ColumnMap, load_log, write_log
from .pipeline import PipelineConfig, run_pipeline
from .triage_sim import BiasConfig, Scenario, generate_log

U64_MAX = 2**64 - 1


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _tau(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("tau must be in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairlens", description="Process-mining fairness analysis of ED triage logs.")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run the full fairness pipeline from a JSON config")
    a.add_argument("--config", required=True, type=Path)
    a.add_argument("--out", type=Path, help="output directory (overrides config output_dir)")
    a.add_argument("--seed", type=_u64, help="overrides the config seed")
    a.add_argument("--format", choices=("md", "json", "csv"),
                   help="also print the full report in this format")

    s = sub.add_parser("simulate", help="write a synthetic ED event log")
    s.add_argument("--scenario", type=Path, help="scenario JSON (defaults used when omitted)")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--n-cases", type=int, default=None,
                   help="number of stays (default: scenario n_cases, else 5000)")

    d = sub.add_parser("discover", help="mine a dependency graph and write the net as JSON")
    d.add_argument("--log", required=True, type=Path)
    d.add_argument("--tau", type=_tau, default=0.8)
    d.add_argument("--out", required=True, type=Path)
    d.add_argument("--column-map", type=Path, help="column map JSON (identity names by default)")
    d.add_argument("--dot", type=Path, help="also write a Graphviz rendering")
    return ap


def _analyze(args) -> int:
    config = PipelineConfig.from_json(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    res = run_pipeline(config, args.out, args.format)
    print(f"artifacts written to {res.artifacts['report'].parent}", file=sys.stderr)
    return res.status


def _simulate(args) -> int:
    scenario, bias, n = Scenario(), BiasConfig(), 5000
    if args.scenario is not None:
        try:
            raw = json.loads(args.scenario.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(str(exc), "scenario") from None
        n = raw.pop("n_cases", n)
        bias = BiasConfig.from_dict(raw.pop("bias", {}))
        scenario = Scenario.from_dict(raw)
    if args.n_cases is not None:
        n = args.n_cases
    log = generate_log(n, bias, args.seed, scenario)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_log(log, args.out)
    print(f"wrote {len(log)} cases / {log.n_events} events to {args.out}", file=sys.stderr)
    return 0


def _discover(args) -> int:
    cmap = ColumnMap.from_json(args.column_map) if args.column_map else None
    log = load_log(args.log, cmap)
    graph = mine_dependency_graph(count_directly_follows(log), args.tau)
    net = to_process_net(graph)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(net.to_json() + "\n", encoding="utf-8")
    if args.dot:
        args.dot.write_text(net.to_dot(), encoding="utf-8")
    print(f"{len(net.transitions)} transitions, {len(graph.edges)} dependency edges "
          f"({len(graph.repaired)} added by repair)", file=sys.stderr)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"analyze": _analyze, "simulate": _simulate, "discover": _discover}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"fairlens: configuration error: {exc}", file=sys.stderr)
        return 2
    except (FairlensError, OSError) as exc:
        print(f"fairlens: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
