from __future__ import annotations

import csv
from datetime import datetime, timedelta
from pathlib import Path

import pytest

from fairlens.eventlog import Case, Event

FIXTURES = Path(__file__).parent / "fixtures"
T0 = datetime(2150, 3, 1, 8, 0, 0)


def make_case(steps, case_id="c1", start=T0, **attrs) -> Case:
    """Build a case from ``(activity, minutes_after_start[, extra])`` tuples."""
    events = []
    for step in steps:
        act, minutes = step[0], step[1]
        extra = dict(attrs)
        if len(step) > 2:
            extra.update(step[2])
        events.append(Event(case_id, act, start + timedelta(minutes=minutes), extra))
    return Case(case_id, tuple(events))


def read_fixture(name: str) -> list[dict[str, str]]:
    with open(FIXTURES / name, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def base_attrs():
    return {
        "race": "WHITE",
        "age": "50",
        "gender": "F",
        "insurance": "Medicare",
        "language": "ENGLISH",
        "acuity": "",
        "disposition": "",
    }


def _reference_value(text: str) -> float:
    text = text.strip()
    if text.startswith("<"):
        return float(text[1:]) / 2  # any value below the printed bound
    return float(text.lstrip("~"))


def reference_results():
    """Reference result rows as ``(row, StatTestResult)``; p/effect filled, labels left to ``finalize``."""
    from fairlens.stats import Attribute, Outcome, StatTestResult, TestKind

    attr = {"Age group": Attribute.AGE_GROUP}
    out = []
    for row in read_fixture("reference_results.csv"):
        outcome = Outcome(row["outcome"])
        res = StatTestResult(outcome, attr.get(row["attribute"]) or Attribute(row["attribute"]),
                             int(row["acuity"]), tested=row["p_value"] != "--")
        if res.tested:
            res.test = TestKind.CHI_SQUARE if outcome is Outcome.DECISION else TestKind.KRUSKAL_WALLIS
            res.p_value = _reference_value(row["p_value"])
            res.effect = _reference_value(row["effect"])
        out.append((row, res))
    return out


def reference_label(text: str) -> str:
    return {"Very large": "VeryLarge"}.get(text, text)
