"""Event-log ingestion, case-level imputation and demographic grouping.

Logs follow the MIMICEL layout: one row per event with ``case_id``,
``activity`` and ``timestamp`` plus case attributes repeated on the rows.
Attribute columns named in the column map are stored in ``Event.extra``
under their canonical key (``race``, ``age``, ...); any other column is kept
under its original header.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import IO, Iterable, Mapping

from .errors import ConfigError, EmptyInputError, ValidationError

DEFAULT_TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

ENTER = "Enter the ED"
TRIAGE = "Triage in the ED"
VITALS = "Vital sign check"
MED_DISPENSE = "Medicine dispensations"
MED_RECON = "Medicine reconciliation"
DISCHARGE = "Discharge from the ED"
ACTIVITIES = (ENTER, TRIAGE, VITALS, MED_DISPENSE, MED_RECON, DISCHARGE)

REQUIRED_COLUMNS = ("case_id", "activity", "timestamp")
ATTRIBUTE_COLUMNS = ("race", "age", "gender", "insurance", "language", "acuity", "disposition")
# Attributes that describe the patient/stay and are therefore made consistent case-wide.
# Acuity is recorded per triage event and stays event-level.
CASE_ATTRIBUTES = ("race", "age", "gender", "insurance", "language", "disposition")


class RaceGroup(str, Enum):
    CAUCASIAN = "Caucasian"
    NON_CAUCASIAN = "NonCaucasian"
    MULTIETHNIC = "Multiethnic"
    OTHER = "Other"
    DELETED = "Deleted"


class AgeGroup(str, Enum):
    UNTIL45 = "Until45"
    UNTIL65 = "Until65"
    OLDER = "Older"


class Gender(str, Enum):
    FEMALE = "Female"
    MALE = "Male"
    UNKNOWN = "Unknown"


class InsuranceGroup(str, Enum):
    PUBLIC = "Public"
    PRIVATE = "Private"
    UNKNOWN = "Unknown"


class LanguageGroup(str, Enum):
    ENGLISH = "English"
    NON_ENGLISH = "NonEnglish"
    UNKNOWN = "Unknown"


# (raw value, intermediate category, group)
RACE_TABLE: tuple[tuple[str, str, RaceGroup], ...] = (
    ("WHITE", "WHITE", RaceGroup.CAUCASIAN),
    ("WHITE -- OTHER EUROPEAN", "WHITE", RaceGroup.CAUCASIAN),
    ("WHITE -- RUSSIAN", "WHITE", RaceGroup.CAUCASIAN),
    ("WHITE -- BRAZILIAN", "WHITE", RaceGroup.CAUCASIAN),
    ("PORTUGUESE", "WHITE", RaceGroup.CAUCASIAN),
    ("WHITE -- EASTERN EUROPEAN", "WHITE", RaceGroup.CAUCASIAN),
    ("HISPANIC OR LATINO", "UNKNOWN_RACE", RaceGroup.DELETED),
    ("PATIENT DECLINED TO ANSWER", "UNKNOWN_RACE", RaceGroup.DELETED),
    ("MULTIPLE RACE/ETHNICITY", "UNKNOWN_RACE", RaceGroup.DELETED),
    ("UNABLE TO OBTAIN", "UNKNOWN_RACE", RaceGroup.DELETED),
    ("HISPANIC/LATINO -- PUERTO RICAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("HISPANIC/LATINO -- DOMINICAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("UNKNOWN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("HISPANIC/LATINO -- GUATEMALAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("HISPANIC/LATINO -- SALVADORAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("HISPANIC/LATINO -- COLUMBIAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("HISPANIC/LATINO -- MEXICAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("SOUTH AMERICAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("HISPANIC/LATINO -- HONDURAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("HISPANIC/LATINO -- CUBAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("HISPANIC/LATINO -- CENTRAL AMERICAN", "MULTI_ETHNIC", RaceGroup.MULTIETHNIC),
    ("BLACK/AFRICAN AMERICAN", "BLACK", RaceGroup.NON_CAUCASIAN),
    ("BLACK/CAPE VERDEAN", "BLACK", RaceGroup.NON_CAUCASIAN),
    ("BLACK/AFRICAN", "BLACK", RaceGroup.NON_CAUCASIAN),
    ("BLACK/CARIBBEAN ISLAND", "BLACK", RaceGroup.NON_CAUCASIAN),
    ("ASIAN -- CHINESE", "ASIAN", RaceGroup.NON_CAUCASIAN),
    ("ASIAN", "ASIAN", RaceGroup.NON_CAUCASIAN),
    ("ASIAN -- ASIAN INDIAN", "ASIAN", RaceGroup.NON_CAUCASIAN),
    ("ASIAN -- SOUTH EAST ASIAN", "ASIAN", RaceGroup.NON_CAUCASIAN),
    ("AMERICAN INDIAN/ALASKA NATIVE", "NATIVE_AMERICAN", RaceGroup.NON_CAUCASIAN),
    ("ASIAN -- KOREAN", "ASIAN", RaceGroup.NON_CAUCASIAN),
    ("NATIVE HAWAIIAN OR OTHER PACIFIC ISLANDER", "PACIFIC_ISLANDER", RaceGroup.NON_CAUCASIAN),
    ("OTHER", "OTHER", RaceGroup.OTHER),
)

LANGUAGE_TABLE: tuple[tuple[str, LanguageGroup], ...] = (
    ("ENGLISH", LanguageGroup.ENGLISH),
    ("SPANISH", LanguageGroup.NON_ENGLISH),
    ("RUSSIAN", LanguageGroup.NON_ENGLISH),
    ("CHINESE", LanguageGroup.NON_ENGLISH),
    ("KABUVERDIANU", LanguageGroup.NON_ENGLISH),
    ("HAITIAN", LanguageGroup.NON_ENGLISH),
    ("PORTUGUESE", LanguageGroup.NON_ENGLISH),
    ("OTHER", LanguageGroup.NON_ENGLISH),
    ("VIETNAMESE", LanguageGroup.NON_ENGLISH),
    ("MODERN GREEK (1453--)", LanguageGroup.NON_ENGLISH),
    ("ITALIAN", LanguageGroup.NON_ENGLISH),
    ("ARABIC", LanguageGroup.NON_ENGLISH),
    ("AMERICAN SIGN LANGUAGE", LanguageGroup.NON_ENGLISH),
    ("POLISH", LanguageGroup.NON_ENGLISH),
    ("PERSIAN", LanguageGroup.NON_ENGLISH),
    ("KOREAN", LanguageGroup.NON_ENGLISH),
    ("THAI", LanguageGroup.NON_ENGLISH),
    ("FRENCH", LanguageGroup.NON_ENGLISH),
    ("AMHARIC", LanguageGroup.NON_ENGLISH),
    ("UNKNOWN", LanguageGroup.UNKNOWN),
)

INSURANCE_TABLE: tuple[tuple[str, InsuranceGroup], ...] = (
    ("MEDICARE", InsuranceGroup.PUBLIC),
    ("MEDICAID", InsuranceGroup.PUBLIC),
    ("PRIVATE", InsuranceGroup.PRIVATE),
    ("OTHER", InsuranceGroup.PRIVATE),
    ("UNKNOWN", InsuranceGroup.UNKNOWN),
    ("NO CHARGE", InsuranceGroup.UNKNOWN),
)

GENDER_TABLE: tuple[tuple[str, Gender], ...] = (
    ("F", Gender.FEMALE),
    ("FEMALE", Gender.FEMALE),
    ("M", Gender.MALE),
    ("MALE", Gender.MALE),
)

_DASHES = re.compile(r"\s*(?:--|–|—|-)\s*")
_SPACES = re.compile(r"\s+")


def normalize_category(raw: str | None) -> str:
    """Canonical form used for table lookups.

    Upper-cases, collapses whitespace and folds ``--``, en/em dashes and the
    spacing around them into a bare ``-``, so "WHITE -- RUSSIAN" and the
    MIMIC export "WHITE - RUSSIAN" hit the same row.
    """
    if not raw:
        return ""
    return _normalize(raw)


@lru_cache(maxsize=8192)
def _normalize(raw: str) -> str:
    return _DASHES.sub("-", _SPACES.sub(" ", raw.strip().upper()))


def _lookup(table: Iterable[tuple]) -> dict[str, object]:
    return {normalize_category(row[0]): row[-1] for row in table}


_RACE = _lookup(RACE_TABLE)
_LANGUAGE = _lookup(LANGUAGE_TABLE)
_INSURANCE = _lookup(INSURANCE_TABLE)
_GENDER = _lookup(GENDER_TABLE)


@dataclass(frozen=True)
class AgeBands:
    """Inclusive upper edges of the two younger age groups."""

    until45_max: int = 45
    until65_max: int = 65

    def __post_init__(self):
        if not 0 <= self.until45_max < self.until65_max:
            raise ConfigError("age bands must satisfy 0 <= until45_max < until65_max", "age_bands")

    def band(self, age: int) -> AgeGroup:
        if age <= self.until45_max:
            return AgeGroup.UNTIL45
        if age <= self.until65_max:
            return AgeGroup.UNTIL65
        return AgeGroup.OLDER


@dataclass(frozen=True)
class DemographicProfile:
    race_group: RaceGroup
    age_years: int
    age_group: AgeGroup
    gender: Gender
    insurance_group: InsuranceGroup
    language_group: LanguageGroup
    acuity: int | None = None
    disposition_raw: str = ""

    def group_of(self, attribute: str) -> str:
        """Group label for one of the sensitive attributes (``race``, ``age``, ...)."""
        return {
            "race": self.race_group,
            "age": self.age_group,
            "gender": self.gender,
            "insurance": self.insurance_group,
            "language": self.language_group,
        }[attribute].value


@dataclass(frozen=True, slots=True)
class Event:
    case_id: str
    activity: str
    timestamp: datetime
    extra: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Case:
    case_id: str
    events: tuple[Event, ...]
    profile: DemographicProfile | None = None

    def __post_init__(self):
        if not self.events:
            raise ValidationError(f"case {self.case_id!r} has no events")

    @property
    def activities(self) -> tuple[str, ...]:
        return tuple(e.activity for e in self.events)

    def first_value(self, key: str) -> str:
        """Value of ``key`` on the earliest event that carries a non-empty one."""
        for e in self.events:
            v = e.extra.get(key, "")
            if v:
                return v
        return ""


@dataclass(frozen=True)
class Provenance:
    source: str = ""
    n_rows: int = 0
    n_cases: int = 0
    rejected_rows: int = 0
    imputation_conflicts: int = 0
    unmapped: Mapping[str, int] = field(default_factory=dict)
    invalid_age_cases: int = 0
    removed_cases: int = 0


@dataclass(frozen=True)
class EventLog:
    cases: Mapping[str, Case]
    provenance: Provenance = field(default_factory=Provenance)

    def __len__(self):
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases.values())

    @property
    def n_events(self) -> int:
        return sum(len(c.events) for c in self.cases.values())


@dataclass(frozen=True)
class ColumnMap:
    """Canonical field name -> CSV header. Attribute entries are optional."""

    case_id: str = "case_id"
    activity: str = "activity"
    timestamp: str = "timestamp"
    race: str | None = "race"
    age: str | None = "age"
    gender: str | None = "gender"
    insurance: str | None = "insurance"
    language: str | None = "language"
    acuity: str | None = "acuity"
    disposition: str | None = "disposition"

    @classmethod
    def from_dict(cls, d: Mapping[str, str], prefix: str = "column_map") -> "ColumnMap":
        for key in REQUIRED_COLUMNS:
            if not d.get(key):
                raise ConfigError("required column mapping is missing", f"{prefix}.{key}")
        unknown = set(d) - set(REQUIRED_COLUMNS) - set(ATTRIBUTE_COLUMNS)
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", prefix)
        kw = {k: d.get(k) for k in ATTRIBUTE_COLUMNS}
        return cls(case_id=d["case_id"], activity=d["activity"], timestamp=d["timestamp"], **kw)

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ColumnMap":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def items(self) -> list[tuple[str, str]]:
        """(canonical, header) pairs for every mapped column, required first."""
        out = []
        for key in REQUIRED_COLUMNS + ATTRIBUTE_COLUMNS:
            col = getattr(self, key)
            if col:
                out.append((key, col))
        return out


def _timestamp_parser(fmt: str):
    if fmt == DEFAULT_TIMESTAMP_FORMAT:
        # fromisoformat is ~10x faster than strptime; the length guard keeps it
        # from accepting date-only or fractional forms the format would reject.
        def parse(s: str) -> datetime:
            if len(s) != 19:
                raise ValueError(s)
            return datetime.fromisoformat(s)

        return parse
    return lambda s: datetime.strptime(s, fmt)


def _open_text(source) -> tuple[IO[str], str, bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8", newline=""), str(source), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), "<bytes>", True
    if isinstance(source, io.TextIOBase):
        return source, getattr(source, "name", "<stream>"), False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), getattr(source, "name", "<stream>"), False


def load_log(
    source,
    column_map: ColumnMap | Mapping[str, str] | None = None,
    *,
    delimiter: str = ",",
    timestamp_format: str = DEFAULT_TIMESTAMP_FORMAT,
) -> EventLog:
    """Read a CSV event log.

    Rows with an empty case id, empty activity or a timestamp that does not
    parse are skipped and counted in ``provenance.rejected_rows``. Events are
    sorted per case by timestamp; ties keep file order. Without a column map
    the canonical names are used and absent attribute columns are skipped.
    """
    if column_map is None or isinstance(column_map, ColumnMap):
        cmap = column_map
    else:
        cmap = ColumnMap.from_dict(column_map)
    fh, name, owned = _open_text(source)
    try:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{name}: no header row") from None
        index = {col: i for i, col in enumerate(header)}
        if cmap is None:
            # identity names; attribute columns are optional here
            cmap = ColumnMap(**{k: (k if k in index else None) for k in ATTRIBUTE_COLUMNS})
        for key, col in cmap.items():
            if col not in index:
                raise ConfigError(f"column {col!r} not found in {name}", f"column_map.{key}")
        mapped = cmap.items()
        i_case, i_act, i_ts = index[cmap.case_id], index[cmap.activity], index[cmap.timestamp]
        attr_cols = [(key, index[col]) for key, col in mapped[3:]]
        mapped_idx = {index[col] for _, col in mapped}
        other_cols = [(h, i) for i, h in enumerate(header) if i not in mapped_idx]
        extra_keys = [k for k, _ in attr_cols] + [h for h, _ in other_cols]
        extra_idx = [i for _, i in attr_cols] + [i for _, i in other_cols]

        parse_ts = _timestamp_parser(timestamp_format)
        intern: dict[str, str] = {}
        grouped: dict[str, list[Event]] = {}
        rejected = n_rows = 0
        width = len(header)
        for row in reader:
            if not row:
                continue
            if len(row) < width:
                row = row + [""] * (width - len(row))
            case_id, activity = row[i_case].strip(), row[i_act].strip()
            if not case_id or not activity:
                rejected += 1
                continue
            try:
                ts = parse_ts(row[i_ts].strip())
            except ValueError:
                rejected += 1
                continue
            extra = {}
            for k, i in zip(extra_keys, extra_idx):
                v = row[i]
                extra[k] = intern.setdefault(v, v)
            activity = intern.setdefault(activity, activity)
            grouped.setdefault(case_id, []).append(Event(case_id, activity, ts, extra))
            n_rows += 1
    finally:
        if owned:
            fh.close()
    if n_rows == 0:
        raise EmptyInputError(f"{name}: no valid rows ({rejected} rejected)")
    cases = {}
    for cid, events in grouped.items():
        events.sort(key=lambda e: e.timestamp)  # list.sort is stable
        cases[cid] = Case(cid, tuple(events))
    prov = Provenance(source=name, n_rows=n_rows, n_cases=len(cases), rejected_rows=rejected)
    return EventLog(cases, prov)


def write_log(
    log: EventLog,
    dest,
    column_map: ColumnMap | None = None,
    *,
    delimiter: str = ",",
    timestamp_format: str = DEFAULT_TIMESTAMP_FORMAT,
) -> None:
    """Write ``log`` in the same CSV layout that :func:`load_log` reads."""
    cmap = column_map or ColumnMap()
    attr = [(k, c) for k, c in cmap.items() if k not in REQUIRED_COLUMNS]
    others: dict[str, None] = {}
    for case in log:
        for e in case.events:
            for k in e.extra:
                if k not in ATTRIBUTE_COLUMNS:
                    others.setdefault(k, None)
    header = [cmap.case_id, cmap.activity, cmap.timestamp] + [c for _, c in attr] + list(others)
    keys = [k for k, _ in attr] + list(others)

    owned = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8", newline="") if owned else dest
    try:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for case in log:
            for e in case.events:
                ex = e.extra
                w.writerow([e.case_id, e.activity, e.timestamp.strftime(timestamp_format)]
                           + [ex.get(k, "") for k in keys])
    finally:
        if owned:
            fh.close()


def impute_case_attributes(log: EventLog, attributes: Iterable[str] = CASE_ATTRIBUTES) -> EventLog:
    """Make case attributes consistent across all events of a case.

    A value seen on some events is copied to the events missing it. When a
    case carries more than one distinct value, the earliest one wins and the
    conflict is counted.
    """
    attributes = tuple(attributes)
    conflicts = 0
    cases = {}
    for cid, case in log.cases.items():
        fill: dict[str, str] = {}
        for key in attributes:
            values = [e.extra.get(key) for e in case.events]
            if values[0] and values.count(values[0]) == len(values):
                continue  # already consistent
            chosen, distinct = "", None
            for v in values:
                if v:
                    if not chosen:
                        chosen = v
                    elif v != chosen:
                        distinct = True
            if distinct:
                conflicts += 1
            if chosen:
                fill[key] = chosen
        if not fill:
            cases[cid] = case
            continue
        events = []
        changed = False
        for e in case.events:
            ex = e.extra
            if any(ex.get(k) != v for k, v in fill.items()):
                e = Event(e.case_id, e.activity, e.timestamp, {**ex, **fill})
                changed = True
            events.append(e)
        if changed:
            case = replace(case, events=tuple(events))
        cases[cid] = case
    prov = replace(log.provenance, imputation_conflicts=log.provenance.imputation_conflicts + conflicts)
    return EventLog(cases, prov)


def parse_age(raw) -> int:
    if raw is None or (isinstance(raw, str) and not raw.strip()):
        raise ValidationError("age is missing")
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"age {raw!r} is not numeric") from None
    if not math.isfinite(value) or value != int(value):
        raise ValidationError(f"age {raw!r} is not a whole number")
    if value < 0:
        raise ValidationError(f"age {raw!r} is negative")
    return int(value)


def parse_acuity(raw) -> int | None:
    """ESI level 1-5, or None when absent or out of range."""
    if raw is None or raw == "":
        return None
    try:
        value = float(raw)
    except (TypeError, ValueError):
        return None
    if value != int(value) or not 1 <= value <= 5:
        return None
    return int(value)


def map_demographics(
    raw: Mapping[str, str],
    boundaries: AgeBands = AgeBands(),
    unmapped: Counter | None = None,
) -> DemographicProfile:
    """Group one raw attribute record using the fixed mapping tables.

    Values missing from a table fall into the attribute's Unknown (race: Other)
    bucket; non-empty unrecognised values are tallied in ``unmapped`` under
    the attribute name.
    """

    def look(attr, table, fallback):
        key = normalize_category(raw.get(attr))
        if key in table:
            return table[key]
        if key and unmapped is not None:
            unmapped[attr] += 1
        return fallback

    age = parse_age(raw.get("age"))
    return DemographicProfile(
        race_group=look("race", _RACE, RaceGroup.OTHER),
        age_years=age,
        age_group=boundaries.band(age),
        gender=look("gender", _GENDER, Gender.UNKNOWN),
        insurance_group=look("insurance", _INSURANCE, InsuranceGroup.UNKNOWN),
        language_group=look("language", _LANGUAGE, LanguageGroup.UNKNOWN),
        acuity=parse_acuity(raw.get("acuity")),
        disposition_raw=raw.get("disposition") or "",
    )


def raw_record(case: Case) -> dict[str, str]:
    """Earliest non-empty value of each attribute column in ``case``."""
    return {key: case.first_value(key) for key in ATTRIBUTE_COLUMNS}


def map_log_demographics(log: EventLog, boundaries: AgeBands = AgeBands()) -> EventLog:
    """Attach a :class:`DemographicProfile` to every case.

    Cases whose age is missing or invalid cannot be banded and are dropped;
    the count goes to ``provenance.invalid_age_cases``.
    """
    unmapped: Counter = Counter(log.provenance.unmapped)
    cases = {}
    invalid = 0
    for cid, case in log.cases.items():
        try:
            profile = map_demographics(raw_record(case), boundaries, unmapped)
        except ValidationError:
            invalid += 1
            continue
        cases[cid] = replace(case, profile=profile)
    prov = replace(
        log.provenance,
        unmapped=dict(unmapped),
        invalid_age_cases=log.provenance.invalid_age_cases + invalid,
        n_cases=len(cases),
        n_rows=sum(len(c.events) for c in cases.values()),
    )
    return EventLog(cases, prov)


def filter_for_analysis(log: EventLog) -> EventLog:
    """Drop cases whose race group is Deleted; Unknown/Other groups stay."""
    kept = {}
    for cid, case in log.cases.items():
        if case.profile is None:
            raise ValidationError(f"case {cid!r} has no demographic profile; map demographics first")
        if case.profile.race_group is not RaceGroup.DELETED:
            kept[cid] = case
    removed = len(log.cases) - len(kept)
    if not removed:
        return log
    prov = replace(
        log.provenance,
        removed_cases=log.provenance.removed_cases + removed,
        n_cases=len(kept),
        n_rows=sum(len(c.events) for c in kept.values()),
    )
    return EventLog(kept, prov)


def read_column_map(path: str | Path) -> ColumnMap:
    return ColumnMap.from_json(path)
