"""Per-case process outcomes: time, re-do, deviation and decision."""

from __future__ import annotations

import csv
import os
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .eventlog import (
    DISCHARGE,
    ENTER,
    MED_DISPENSE,
    MED_RECON,
    TRIAGE,
    VITALS,
    AgeGroup,
    Case,
    DemographicProfile,
    EventLog,
    Gender,
    InsuranceGroup,
    LanguageGroup,
    RaceGroup,
    normalize_category,
    parse_acuity,
)


class DecisionGroup(str, Enum):
    HOME = "HOME"
    FACILITY = "FACILITY"
    DEATH = "DEATH"
    AGAINST_ADVICE = "AGAINST_ADVICE"
    UNKNOWN = "UNKNOWN"


DISCHARGE_TABLE: tuple[tuple[str, DecisionGroup], ...] = (
    ("UNKNOWN", DecisionGroup.UNKNOWN),
    ("HOME", DecisionGroup.HOME),
    ("HOME HEALTH CARE", DecisionGroup.HOME),
    ("SKILLED NURSING FACILITY", DecisionGroup.FACILITY),
    ("REHAB", DecisionGroup.FACILITY),
    ("DIED", DecisionGroup.DEATH),
    ("CHRONIC/LONG TERM ACUTE CARE", DecisionGroup.FACILITY),
    ("HOSPICE", DecisionGroup.DEATH),
    ("AGAINST ADVICE", DecisionGroup.AGAINST_ADVICE),
    ("PSYCH FACILITY", DecisionGroup.FACILITY),
    ("OTHER FACILITY", DecisionGroup.FACILITY),
    ("ACUTE HOSPITAL", DecisionGroup.FACILITY),
    ("ASSISTED LIVING", DecisionGroup.FACILITY),
    ("HEALTHCARE FACILITY", DecisionGroup.FACILITY),
)
_DISCHARGE = {normalize_category(raw): g for raw, g in DISCHARGE_TABLE}

# activities whose every repeat is waste / clinically needed
WASTE_ON_REPEAT = frozenset({ENTER, DISCHARGE})
CLINICAL_ON_REPEAT = frozenset({VITALS, MED_DISPENSE, MED_RECON})


@dataclass(frozen=True)
class RedoBreakdown:
    total_redos: int
    clinical_redos: int
    waste_redos: int
    n_events: int

    @property
    def waste_pct(self) -> float:
        return self.waste_redos / self.n_events if self.n_events else 0.0


@dataclass(frozen=True)
class CaseOutcomes:
    case_id: str
    duration: float
    redo: RedoBreakdown
    fitness: float
    decision_group: DecisionGroup
    acuity: int | None
    profile: DemographicProfile
    replay_flagged: bool = False


def case_duration(case: Case) -> float:
    """Seconds between the first and last event."""
    return (case.events[-1].timestamp - case.events[0].timestamp).total_seconds()


def classify_redos(case: Case, gap_threshold: float = 30.0) -> RedoBreakdown:
    """Split repeated activities into clinical and waste re-dos.

    A repeated triage is clinical only when its recorded acuity differs from
    the previous triage's and more than ``gap_threshold`` minutes have passed;
    a missing acuity on either side cannot show a change. Repeats of
    activities outside the ED vocabulary count as clinical.
    """
    seen: Counter = Counter()
    clinical = waste = 0
    prev_triage = None
    for e in case.events:
        act = e.activity
        seen[act] += 1
        if act == TRIAGE:
            if prev_triage is not None:
                before = parse_acuity(prev_triage.extra.get("acuity", ""))
                now = parse_acuity(e.extra.get("acuity", ""))
                gap_min = (e.timestamp - prev_triage.timestamp).total_seconds() / 60.0
                if before is not None and now is not None and now != before and gap_min > gap_threshold:
                    clinical += 1
                else:
                    waste += 1
            prev_triage = e
        elif seen[act] > 1:
            if act in WASTE_ON_REPEAT:
                waste += 1
            else:
                clinical += 1
    return RedoBreakdown(clinical + waste, clinical, waste, len(case.events))


def decision_group(disposition_raw: str | None, unmapped: Counter | None = None) -> DecisionGroup:
    key = normalize_category(disposition_raw)
    group = _DISCHARGE.get(key)
    if group is None:
        if key and unmapped is not None:
            unmapped["disposition"] += 1
        return DecisionGroup.UNKNOWN
    return group


def extract_outcomes(
    log: EventLog,
    net,
    gap_threshold: float = 30.0,
    unmapped: Counter | None = None,
) -> list[CaseOutcomes]:
    """One CaseOutcomes per case. ``log`` must already carry demographic profiles."""
    from .conformance import replay_log

    replays = replay_log(net, log)
    out = []
    for case in log:
        if case.profile is None:
            raise ValueError(f"case {case.case_id!r} has no demographic profile")
        rr = replays[case.case_id]
        out.append(CaseOutcomes(
            case_id=case.case_id,
            duration=case_duration(case),
            redo=classify_redos(case, gap_threshold),
            fitness=rr.fitness,
            decision_group=decision_group(case.profile.disposition_raw, unmapped),
            acuity=case.profile.acuity,
            profile=case.profile,
            replay_flagged=rr.flagged,
        ))
    return out


OUTCOME_COLUMNS = (
    "case_id", "duration_s", "total_redos", "clinical_redos", "waste_redos", "n_events", "waste_pct",
    "fitness", "replay_flagged", "decision_group", "acuity", "race_group", "age_years", "age_group",
    "gender", "insurance_group", "language_group", "disposition_raw",
)


def write_outcomes_csv(outcomes: Iterable[CaseOutcomes], dest) -> None:
    owned = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8", newline="") if owned else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OUTCOME_COLUMNS)
        for o in outcomes:
            p = o.profile
            w.writerow([
                o.case_id, repr(o.duration), o.redo.total_redos, o.redo.clinical_redos, o.redo.waste_redos,
                o.redo.n_events, repr(o.redo.waste_pct), repr(o.fitness), int(o.replay_flagged),
                o.decision_group.value, "" if o.acuity is None else o.acuity, p.race_group.value,
                p.age_years, p.age_group.value, p.gender.value, p.insurance_group.value,
                p.language_group.value, p.disposition_raw,
            ])
    finally:
        if owned:
            fh.close()


def read_outcomes_csv(source) -> list[CaseOutcomes]:
    """Inverse of :func:`write_outcomes_csv`."""
    owned = isinstance(source, (str, os.PathLike))
    fh = open(source, encoding="utf-8", newline="") if owned else source
    try:
        rows = list(csv.DictReader(fh))
    finally:
        if owned:
            fh.close()
    out = []
    for r in rows:
        acuity = int(r["acuity"]) if r["acuity"] else None
        profile = DemographicProfile(
            race_group=RaceGroup(r["race_group"]),
            age_years=int(r["age_years"]),
            age_group=AgeGroup(r["age_group"]),
            gender=Gender(r["gender"]),
            insurance_group=InsuranceGroup(r["insurance_group"]),
            language_group=LanguageGroup(r["language_group"]),
            acuity=acuity,
            disposition_raw=r["disposition_raw"],
        )
        redo = RedoBreakdown(int(r["total_redos"]), int(r["clinical_redos"]), int(r["waste_redos"]),
                             int(r["n_events"]))
        out.append(CaseOutcomes(r["case_id"], float(r["duration_s"]), redo, float(r["fitness"]),
                                DecisionGroup(r["decision_group"]), acuity, profile, r["replay_flagged"] == "1"))
    return out
