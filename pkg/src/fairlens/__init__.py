"""Fairness analysis of emergency-department triage through process mining.

Load an event log, discover a reference model, derive per-case process
outcomes (time, re-do, deviation, decision), test them for demographic
differences within each acuity level, and summarise the findings by
organizational-justice dimension.
"""

from .conformance import ReplayResult, replay_case, replay_log, token_fitness
from .discovery import ProcessNet, count_directly_follows, dependency_measure, discover, mine_dependency_graph, to_process_net
from .errors import ConfigError, EmptyInputError, FairlensError, NotTested, StructuralError, ValidationError
from .eventlog import Case, Event, EventLog, load_log, write_log
from .outcomes import CaseOutcomes, classify_redos, extract_outcomes
from .pipeline import PipelineConfig, run_pipeline
from .report import JusticeSummary, map_to_justice, render_report
from .stats import (
    chi2_upper_tail,
    chi_square_independence,
    cramers_v,
    epsilon_squared,
    interpret_effect,
    kruskal_wallis,
    run_attribute_tests,
)
from .triage_sim import BiasConfig, BiasEntry, Scenario, assign_esi, generate_log

__version__ = "0.1.0"

__all__ = [
    "ReplayResult",
    "replay_case",
    "replay_log",
    "token_fitness",
    "ProcessNet",
    "count_directly_follows",
    "dependency_measure",
    "discover",
    "mine_dependency_graph",
    "to_process_net",
    "ConfigError",
    "EmptyInputError",
    "FairlensError",
    "NotTested",
    "StructuralError",
    "ValidationError",
    "Case",
    "Event",
    "EventLog",
    "load_log",
    "write_log",
    "CaseOutcomes",
    "classify_redos",
    "extract_outcomes",
    "PipelineConfig",
    "run_pipeline",
    "JusticeSummary",
    "map_to_justice",
    "render_report",
    "chi2_upper_tail",
    "chi_square_independence",
    "cramers_v",
    "epsilon_squared",
    "interpret_effect",
    "kruskal_wallis",
    "run_attribute_tests",
    "BiasConfig",
    "BiasEntry",
    "Scenario",
    "assign_esi",
    "generate_log",
]
