"""Scenarios shared by the experiment scripts."""

from __future__ import annotations

from fairlens.discovery import discover
from fairlens.eventlog import filter_for_analysis, impute_case_attributes, map_log_demographics
from fairlens.outcomes import extract_outcomes
from fairlens.stats import run_attribute_tests
from fairlens.triage_sim import BiasConfig, Scenario, Vitals, generate_log


def acuity3_scenario() -> Scenario:
    """Every stay triaged at ESI 3; insurance split evenly between MEDICARE (Public) and PRIVATE."""
    pop = dict(Scenario().population)
    pop["race"] = {"WHITE": 0.6, "BLACK/AFRICAN AMERICAN": 0.4}
    pop["insurance"] = {"MEDICARE": 0.5, "PRIVATE": 0.5}
    return Scenario(population=pop, p_life_saving=0.0, p_high_risk=0.0, p_confused=0.0,
                    pain_weights=(1,) * 7 + (0,) * 4, resource_weights={2: 0.5, 3: 0.5},
                    vital_means=Vitals(70, 14, 98.5), vital_sds=Vitals(5, 1, 0.5))


def grid_for(n_cases: int, bias: BiasConfig, seed: int, scenario: Scenario, acuities=(1, 2, 3, 4, 5)):
    """Simulate, prepare and test; returns (outcomes, results)."""
    log = generate_log(n_cases, bias, seed, scenario)
    log = filter_for_analysis(map_log_demographics(impute_case_attributes(log)))
    outcomes = extract_outcomes(log, discover(log))
    return outcomes, run_attribute_tests(outcomes, acuities=acuities)
