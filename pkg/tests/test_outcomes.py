from __future__ import annotations

import io
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_case, read_fixture
from fairlens.discovery import discover
from fairlens.eventlog import (
    DISCHARGE,
    ENTER,
    MED_DISPENSE,
    MED_RECON,
    TRIAGE,
    VITALS,
    filter_for_analysis,
    impute_case_attributes,
    map_log_demographics,
)
from fairlens.outcomes import (
    DecisionGroup,
    case_duration,
    classify_redos,
    decision_group,
    extract_outcomes,
    read_outcomes_csv,
    write_outcomes_csv,
)
from fairlens.triage_sim import generate_log


def tri(minute, acuity):
    return (TRIAGE, minute, {"acuity": str(acuity)})


# one fixture per rule row, plus the triage boundary on both sides
REDO_CASES = {
    "enter twice is waste": ([(ENTER, 0), (ENTER, 2), tri(5, 3), (DISCHARGE, 60)], 0, 1),
    "discharge twice is waste": ([(ENTER, 0), tri(5, 3), (DISCHARGE, 60), (DISCHARGE, 61)], 0, 1),
    "vitals repeat is clinical": ([(ENTER, 0), tri(5, 3), (VITALS, 9), (VITALS, 30), (DISCHARGE, 60)], 1, 0),
    "dispense repeat is clinical": ([(ENTER, 0), (MED_DISPENSE, 9), (MED_DISPENSE, 20), (DISCHARGE, 60)], 1, 0),
    "reconciliation repeat is clinical": ([(ENTER, 0), (MED_RECON, 9), (MED_RECON, 20), (DISCHARGE, 60)], 1, 0),
    "triage change after 31 min is clinical": ([(ENTER, 0), tri(5, 3), tri(36, 2), (DISCHARGE, 60)], 1, 0),
    "triage change after exactly 30 min is waste": ([(ENTER, 0), tri(5, 3), tri(35, 2), (DISCHARGE, 60)], 0, 1),
    "triage change after 29 min is waste": ([(ENTER, 0), tri(5, 3), tri(34, 2), (DISCHARGE, 60)], 0, 1),
    "triage same acuity after 90 min is waste": ([(ENTER, 0), tri(5, 3), tri(95, 3), (DISCHARGE, 120)], 0, 1),
    "triage decrease after 45 min is clinical": ([(ENTER, 0), tri(5, 2), tri(50, 3), (DISCHARGE, 90)], 1, 0),
    "triage with missing acuity is waste": ([(ENTER, 0), tri(5, 3), (TRIAGE, 50, {"acuity": ""}),
                                             (DISCHARGE, 90)], 0, 1),
    "single occurrences": ([(ENTER, 0), tri(5, 3), (VITALS, 9), (MED_RECON, 12), (DISCHARGE, 60)], 0, 0),
}


@pytest.mark.parametrize("name", list(REDO_CASES))
def test_redo_rules(name):
    steps, clinical, waste = REDO_CASES[name]
    b = classify_redos(make_case(steps))
    assert (b.clinical_redos, b.waste_redos) == (clinical, waste)
    assert b.total_redos == clinical + waste
    assert b.n_events == len(steps)


def test_configurable_gap_threshold():
    case = make_case([(ENTER, 0), tri(5, 3), tri(25, 2), (DISCHARGE, 60)])
    assert classify_redos(case).waste_redos == 1
    assert classify_redos(case, gap_threshold=10).clinical_redos == 1


def test_waste_pct():
    b = classify_redos(make_case(REDO_CASES["enter twice is waste"][0]))
    assert b.waste_pct == pytest.approx(1 / 4)


activity_st = st.sampled_from([ENTER, TRIAGE, VITALS, MED_DISPENSE, MED_RECON, DISCHARGE, "Other"])


@given(st.lists(st.tuples(activity_st, st.integers(1, 5)), min_size=1, max_size=12))
def test_redo_counts_sum_to_repeats(items):
    steps = [(a, 10 * i, {"acuity": str(ac)}) for i, (a, ac) in enumerate(items)]
    b = classify_redos(make_case(steps))
    repeats = sum(n - 1 for n in Counter(a for a, _ in items).values())
    assert b.total_redos == repeats == b.clinical_redos + b.waste_redos
    assert 0 <= b.waste_pct <= 1


DISCHARGE_ROWS = [r for r in read_fixture("mapping_tables.csv") if r["table"] == "discharge"]


@pytest.mark.parametrize("row", DISCHARGE_ROWS, ids=lambda r: r["original"])
def test_discharge_mapping_rows(row):
    assert decision_group(row["original"]) is DecisionGroup(row["group"])


def test_discharge_unmapped_counted_but_empty_is_not():
    seen = Counter()
    assert decision_group("ADMITTED", seen) is DecisionGroup.UNKNOWN
    assert decision_group("", seen) is DecisionGroup.UNKNOWN
    assert seen == {"disposition": 1}


def test_duration_seconds():
    assert case_duration(make_case([(ENTER, 0), (DISCHARGE, 90)])) == 5400.0


def prepared(n=300, seed=9):
    log = generate_log(n, seed=seed)
    return filter_for_analysis(map_log_demographics(impute_case_attributes(log)))


def test_extract_outcomes_shape():
    log = prepared()
    outs = extract_outcomes(log, discover(log))
    assert len(outs) == len(log)
    for o in outs:
        assert o.duration > 0
        assert 0 <= o.fitness <= 1
        assert o.acuity in range(1, 6)
        assert o.decision_group is decision_group(o.profile.disposition_raw)


def test_extract_requires_profiles():
    log = generate_log(3, seed=1)
    with pytest.raises(ValueError):
        extract_outcomes(log, discover(log))


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000))
def test_outcomes_csv_round_trip(seed):
    log = prepared(60, seed)
    outs = extract_outcomes(log, discover(log))
    buf = io.StringIO()
    write_outcomes_csv(outs, buf)
    buf.seek(0)
    assert read_outcomes_csv(buf) == outs
