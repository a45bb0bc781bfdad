from __future__ import annotations

import io
from collections import Counter
from datetime import datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_case, read_fixture
from fairlens.errors import ConfigError, EmptyInputError, ValidationError
from fairlens.eventlog import (
    DISCHARGE,
    ENTER,
    TRIAGE,
    VITALS,
    AgeBands,
    AgeGroup,
    ColumnMap,
    EventLog,
    Gender,
    InsuranceGroup,
    LanguageGroup,
    Provenance,
    RaceGroup,
    filter_for_analysis,
    impute_case_attributes,
    load_log,
    map_demographics,
    map_log_demographics,
    normalize_category,
    parse_acuity,
    parse_age,
    write_log,
)

# printed group label -> enum value
FIXTURE_LABELS = {
    "race": {"Caucasian": RaceGroup.CAUCASIAN, "Non-Caucasian": RaceGroup.NON_CAUCASIAN,
             "Multiethnic": RaceGroup.MULTIETHNIC, "Other": RaceGroup.OTHER, "Delete": RaceGroup.DELETED},
    "language": {"ENGLISH": LanguageGroup.ENGLISH, "NON_ENGLISH": LanguageGroup.NON_ENGLISH,
                 "UNKNOWN": LanguageGroup.UNKNOWN},
    "insurance": {"Public": InsuranceGroup.PUBLIC, "Private": InsuranceGroup.PRIVATE,
                  "Unknown": InsuranceGroup.UNKNOWN},
}
MAPPING_ROWS = [r for r in read_fixture("mapping_tables.csv") if r["table"] != "discharge"]


def record(**over):
    rec = {"race": "WHITE", "age": "40", "gender": "F", "insurance": "MEDICARE", "language": "ENGLISH",
           "acuity": "3", "disposition": "HOME"}
    rec.update(over)
    return rec


def profile_value(profile, table):
    return {"race": profile.race_group, "language": profile.language_group,
            "insurance": profile.insurance_group}[table]


@pytest.mark.parametrize("row", MAPPING_ROWS, ids=lambda r: f"{r['table']}:{r['original']}")
def test_mapping_table_rows(row):
    prof = map_demographics(record(**{row["table"]: row["original"]}))
    assert profile_value(prof, row["table"]) is FIXTURE_LABELS[row["table"]][row["group"]]


def test_mapping_fixture_row_counts():
    counts = Counter(r["table"] for r in read_fixture("mapping_tables.csv"))
    assert counts == {"race": 33, "language": 20, "insurance": 6, "discharge": 14}


@pytest.mark.parametrize("raw, group", [
    ("WHITE - RUSSIAN", RaceGroup.CAUCASIAN),
    ("white -- russian", RaceGroup.CAUCASIAN),
    ("HISPANIC/LATINO - PUERTO RICAN", RaceGroup.MULTIETHNIC),
    ("ASIAN – KOREAN", RaceGroup.NON_CAUCASIAN),
    ("  BLACK/AFRICAN   AMERICAN ", RaceGroup.NON_CAUCASIAN),
])
def test_race_lookup_tolerates_export_spelling(raw, group):
    assert map_demographics(record(race=raw)).race_group is group


def test_greek_language_single_dash_variant():
    assert map_demographics(record(language="Modern Greek (1453-)")).language_group is LanguageGroup.NON_ENGLISH


def test_unmapped_values_fall_back_and_are_counted():
    seen = Counter()
    prof = map_demographics(record(race="MARTIAN", language="KLINGON", insurance="", gender="X"), unmapped=seen)
    assert prof.race_group is RaceGroup.OTHER
    assert prof.language_group is LanguageGroup.UNKNOWN
    assert prof.insurance_group is InsuranceGroup.UNKNOWN
    assert prof.gender is Gender.UNKNOWN
    # the empty insurance value is missing, not unmapped
    assert seen == {"race": 1, "language": 1, "gender": 1}


@given(st.text(max_size=40))
def test_normalize_is_idempotent(s):
    once = normalize_category(s)
    assert normalize_category(once) == once


@pytest.mark.parametrize("age, group", [(0, AgeGroup.UNTIL45), (45, AgeGroup.UNTIL45), (46, AgeGroup.UNTIL65),
                                        (65, AgeGroup.UNTIL65), (66, AgeGroup.OLDER), (110, AgeGroup.OLDER)])
def test_age_band_edges_inclusive(age, group):
    assert AgeBands().band(age) is group


@given(st.integers(0, 120), st.integers(0, 120))
def test_age_band_monotone(a, b):
    order = list(AgeGroup)
    lo, hi = sorted((a, b))
    assert order.index(AgeBands().band(lo)) <= order.index(AgeBands().band(hi))


@pytest.mark.parametrize("edges", [(65, 45), (50, 50), (-1, 10)])
def test_bad_age_bands_rejected(edges):
    with pytest.raises(ConfigError) as exc:
        AgeBands(*edges)
    assert exc.value.key == "age_bands"


@pytest.mark.parametrize("raw", ["", None, "abc", "40.5", "-3", "nan"])
def test_parse_age_rejects(raw):
    with pytest.raises(ValidationError):
        parse_age(raw)


def test_parse_age_accepts_integral_float_text():
    assert parse_age("40.0") == 40


@pytest.mark.parametrize("raw, expected", [("1", 1), ("5.0", 5), ("0", None), ("6", None), ("", None), ("x", None)])
def test_parse_acuity(raw, expected):
    assert parse_acuity(raw) == expected


# ----------------------------------------------------------------------- loading

CSV_TEXT = """\
case_id,activity,timestamp,race,age,gender,insurance,language,acuity,disposition
1,Enter the ED,2150-01-01 10:00:00,WHITE,40,F,Medicare,ENGLISH,,
1,Triage in the ED,2150-01-01 10:05:00,,,,,,3,
1,Discharge from the ED,2150-01-01 12:00:00,,,,,,,HOME
2,Enter the ED,2150-01-02 09:00:00,ASIAN,70,M,Private,CHINESE,,
,Triage in the ED,2150-01-02 09:05:00,,,,,,2,
2,Triage in the ED,not-a-time,,,,,,2,
2,Discharge from the ED,2150-01-02 09:40:00,,,,,,,ADMITTED
2,Triage in the ED,2150-01-02 09:05:00,,,,,,2,
"""


def test_load_counts_and_sorts():
    log = load_log(CSV_TEXT.encode())
    assert len(log) == 2
    assert log.provenance.rejected_rows == 2
    assert log.n_events == 6
    assert log.cases["2"].activities == (ENTER, TRIAGE, DISCHARGE)


def test_load_from_text_stream_and_path(tmp_path):
    p = tmp_path / "log.csv"
    p.write_text(CSV_TEXT)
    a, b = load_log(p), load_log(io.StringIO(CSV_TEXT))
    assert [c.activities for c in a] == [c.activities for c in b]


def test_missing_column_names_config_key():
    bad = CSV_TEXT.replace("timestamp", "time", 1)
    with pytest.raises(ConfigError) as exc:
        load_log(bad.encode())
    assert exc.value.key == "column_map.timestamp"


def test_column_map_from_dict_requires_timestamp():
    with pytest.raises(ConfigError) as exc:
        ColumnMap.from_dict({"case_id": "stay_id", "activity": "activity"})
    assert exc.value.key == "column_map.timestamp"


def test_custom_column_map():
    text = CSV_TEXT.replace("case_id,activity,timestamp", "stay_id,act,ts", 1)
    log = load_log(text.encode(), {"case_id": "stay_id", "activity": "act", "timestamp": "ts",
                                   "race": "race", "age": "age", "gender": "gender", "insurance": "insurance",
                                   "language": "language", "acuity": "acuity", "disposition": "disposition"})
    assert len(log) == 2


def test_empty_input():
    with pytest.raises(EmptyInputError):
        load_log(b"")
    with pytest.raises(EmptyInputError):
        load_log(b"case_id,activity,timestamp\n,,\n")


def test_custom_timestamp_format():
    text = "case_id,activity,timestamp\n1,Enter the ED,01/02/2150 10:00\n"
    log = load_log(text.encode(), {"case_id": "case_id", "activity": "activity", "timestamp": "timestamp"},
                   timestamp_format="%d/%m/%Y %H:%M")
    assert next(iter(log)).events[0].timestamp == datetime(2150, 2, 1, 10, 0)


activity_st = st.sampled_from([ENTER, TRIAGE, VITALS, DISCHARGE])
case_st = st.lists(st.tuples(activity_st, st.integers(0, 600)), min_size=1, max_size=8)


@settings(max_examples=50)
@given(st.lists(case_st, min_size=1, max_size=6))
def test_write_load_round_trip(cases):
    built = {}
    for i, steps in enumerate(cases):
        steps = sorted(steps, key=lambda s: s[1])
        c = make_case(steps, case_id=str(i), race="WHITE", age="30", gender="F", insurance="",
                      language="", acuity="", disposition="")
        built[c.case_id] = c
    log = EventLog(built, Provenance())
    buf = io.StringIO()
    write_log(log, buf)
    back = load_log(buf.getvalue().encode())
    assert set(back.cases) == set(built)
    for cid, case in built.items():
        got = back.cases[cid]
        assert got.activities == case.activities
        assert [e.timestamp for e in got.events] == [e.timestamp for e in case.events]
        assert [dict(e.extra) for e in got.events] == [dict(e.extra) for e in case.events]


# ----------------------------------------------------------------------- imputation / mapping

def test_impute_fills_all_events_with_earliest_value():
    log = load_log(CSV_TEXT.encode())
    imp = impute_case_attributes(log)
    for case in imp:
        races = {e.extra["race"] for e in case.events}
        assert len(races) == 1 and races != {""}
        assert len({e.extra["disposition"] for e in case.events}) == 1
    # acuity stays on the triage events only
    assert [e.extra["acuity"] for e in imp.cases["1"].events] == ["", "3", ""]


def test_impute_conflict_counted_and_earliest_wins(base_attrs):
    c = make_case([(ENTER, 0, {"race": "WHITE"}), (TRIAGE, 5, {"race": "ASIAN"}), (DISCHARGE, 9, {"race": ""})],
                  **{**base_attrs, "race": ""})
    log = impute_case_attributes(EventLog({"c1": c}))
    assert log.provenance.imputation_conflicts == 1
    assert {e.extra["race"] for e in log.cases["c1"].events} == {"WHITE"}


@settings(max_examples=40)
@given(st.lists(st.tuples(st.sampled_from(["", "WHITE", "ASIAN"]), st.sampled_from(["", "40", "70"])),
                min_size=1, max_size=6))
def test_impute_idempotent(values):
    steps = [(VITALS, i, {"race": r, "age": a}) for i, (r, a) in enumerate(values)]
    log = EventLog({"c1": make_case(steps)})
    once = impute_case_attributes(log)
    twice = impute_case_attributes(once)
    assert [e.extra for e in once.cases["c1"].events] == [e.extra for e in twice.cases["c1"].events]
    # conflicts were resolved by the first pass
    assert twice.provenance.imputation_conflicts == once.provenance.imputation_conflicts


def test_map_log_drops_invalid_ages(base_attrs):
    good = make_case([(ENTER, 0), (DISCHARGE, 5)], case_id="a", **base_attrs)
    bad = make_case([(ENTER, 0), (DISCHARGE, 5)], case_id="b", **{**base_attrs, "age": ""})
    log = map_log_demographics(EventLog({"a": good, "b": bad}))
    assert list(log.cases) == ["a"]
    assert log.provenance.invalid_age_cases == 1
    assert log.cases["a"].profile.age_group is AgeGroup.UNTIL65


def test_profile_acuity_is_earliest_recorded(base_attrs):
    c = make_case([(ENTER, 0), (TRIAGE, 5, {"acuity": "3"}), (TRIAGE, 50, {"acuity": "2"}), (DISCHARGE, 60)],
                  **base_attrs)
    log = map_log_demographics(impute_case_attributes(EventLog({"c1": c})))
    assert log.cases["c1"].profile.acuity == 3


def test_filter_removes_deleted_race(base_attrs):
    keep = make_case([(ENTER, 0)], case_id="k", **base_attrs)
    drop = make_case([(ENTER, 0)], case_id="d", **{**base_attrs, "race": "UNABLE TO OBTAIN"})
    other = make_case([(ENTER, 0)], case_id="o", **{**base_attrs, "race": "OTHER"})
    log = filter_for_analysis(map_log_demographics(EventLog({"k": keep, "d": drop, "o": other})))
    assert sorted(log.cases) == ["k", "o"]
    assert log.provenance.removed_cases == 1


def test_filter_requires_profiles(base_attrs):
    with pytest.raises(ValidationError):
        filter_for_analysis(EventLog({"k": make_case([(ENTER, 0)], case_id="k", **base_attrs)}))


def test_filter_without_removals_returns_same_log(base_attrs):
    log = map_log_demographics(EventLog({"k": make_case([(ENTER, 0)], case_id="k", **base_attrs)}))
    assert filter_for_analysis(log) is log


def test_case_needs_events():
    from fairlens.eventlog import Case
    with pytest.raises(ValidationError):
        Case("x", ())
