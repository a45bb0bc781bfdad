"""ESI triage logic and a synthetic ED event-log generator with bias injection.

The generator produces logs in the eventlog CSV schema. Each case is drawn
from its own ``random.Random`` seeded by ``(seed, case index)``, so any slice
of case indices can be generated independently and concatenated.
"""

from __future__ import annotations

import bisect
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Mapping, Sequence

from .errors import ConfigError, ValidationError
from .eventlog import (
    DISCHARGE,
    ENTER,
    MED_DISPENSE,
    MED_RECON,
    TRIAGE,
    VITALS,
    AgeBands,
    Case,
    EventLog,
    Event,
    Provenance,
    map_demographics,
)
from .outcomes import DISCHARGE_TABLE, DecisionGroup

SENSITIVE_ATTRIBUTES = ("race", "age", "gender", "insurance", "language")
# minutes; must exceed the 30-minute re-triage rule so the repeat counts as clinical
RETRIAGE_MIN_GAP = 31.0


@dataclass(frozen=True)
class Vitals:
    heart_rate: float
    respiratory_rate: float
    spo2: float


@dataclass(frozen=True)
class VitalRanges:
    """Physiological bounds a presentation's vitals must fall in."""

    heart_rate: tuple[float, float] = (20.0, 250.0)
    respiratory_rate: tuple[float, float] = (4.0, 70.0)
    spo2: tuple[float, float] = (50.0, 100.0)

    def check(self, v: Vitals) -> None:
        for name in ("heart_rate", "respiratory_rate", "spo2"):
            lo, hi = getattr(self, name)
            x = getattr(v, name)
            if not (x > 0 and lo <= x <= hi):
                raise ValidationError(f"{name}={x} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class DangerZone:
    """Adult danger-zone cutoffs. Strict inequalities: hr > 100 fires, hr == 100 does not."""

    heart_rate_max: float = 100.0
    respiratory_rate_max: float = 20.0
    spo2_min: float = 92.0

    def exceeded(self, v: Vitals) -> bool:
        return (
            v.heart_rate > self.heart_rate_max
            or v.respiratory_rate > self.respiratory_rate_max
            or v.spo2 < self.spo2_min
        )


@dataclass(frozen=True)
class PatientPresentation:
    life_saving_needed: bool
    high_risk: bool
    confused: bool
    severe_pain: int
    expected_resources: int
    vitals: Vitals
    demographics: Mapping[str, str] = field(default_factory=dict)
    ranges: VitalRanges = field(default=VitalRanges(), compare=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.severe_pain <= 10:
            raise ValidationError(f"pain score {self.severe_pain} outside 0-10")
        if self.expected_resources < 0:
            raise ValidationError("expected_resources must be >= 0")
        self.ranges.check(self.vitals)


@dataclass(frozen=True)
class EsiAssignment:
    level: int
    danger_zone_flag: bool = False
    upgraded: bool = False


def assign_esi(p: PatientPresentation, thresholds: DangerZone = DangerZone()) -> EsiAssignment:
    """Initial ESI level.

    Vitals are only consulted for patients who would otherwise be level 3;
    a danger-zone reading always upgrades them to 2 (``upgraded`` records it).
    """
    if p.life_saving_needed:
        return EsiAssignment(1)
    if p.high_risk or p.confused or p.severe_pain >= 7:
        return EsiAssignment(2)
    if p.expected_resources == 0:
        return EsiAssignment(5)
    if p.expected_resources == 1:
        return EsiAssignment(4)
    if thresholds.exceeded(p.vitals):
        return EsiAssignment(2, danger_zone_flag=True, upgraded=True)
    return EsiAssignment(3)


# --------------------------------------------------------------------------- config

def _groups_for(attribute: str) -> set[str]:
    from . import eventlog as el

    enum = {
        "race": el.RaceGroup,
        "age": el.AgeGroup,
        "gender": el.Gender,
        "insurance": el.InsuranceGroup,
        "language": el.LanguageGroup,
    }[attribute]
    return {g.value for g in enum}


@dataclass(frozen=True)
class BiasEntry:
    """Treatment applied to cases whose ``attribute`` falls in ``group``.

    ``acuity=None`` targets every acuity level.
    """

    attribute: str
    group: str
    acuity: int | None = None
    time_multiplier: float = 1.0
    extra_waste_redo_prob: float = 0.0
    decision_shift: Mapping[str, float] | None = None

    def validate(self, where: str = "bias") -> None:
        if self.attribute not in SENSITIVE_ATTRIBUTES:
            raise ConfigError(f"unknown attribute {self.attribute!r}", f"{where}.attribute")
        if self.group not in _groups_for(self.attribute):
            raise ConfigError(f"unknown group {self.group!r} for {self.attribute}", f"{where}.group")
        if self.acuity is not None and self.acuity not in range(1, 6):
            raise ConfigError("acuity must be 1-5", f"{where}.acuity")
        if not (self.time_multiplier > 0 and math.isfinite(self.time_multiplier)):
            raise ConfigError("time_multiplier must be > 0", f"{where}.time_multiplier")
        if not 0.0 <= self.extra_waste_redo_prob <= 1.0:
            raise ConfigError("probability outside [0, 1]", f"{where}.extra_waste_redo_prob")
        if self.decision_shift is not None:
            _check_distribution(self.decision_shift, {g.value for g in DecisionGroup}, f"{where}.decision_shift")


@dataclass(frozen=True)
class BiasConfig:
    entries: tuple[BiasEntry, ...] = ()

    def validate(self) -> None:
        for i, e in enumerate(self.entries):
            e.validate(f"bias.entries[{i}]")

    @classmethod
    def from_dict(cls, d) -> "BiasConfig":
        items = d.get("entries", []) if isinstance(d, Mapping) else d
        try:
            entries = tuple(BiasEntry(**item) for item in items)
        except TypeError as exc:
            raise ConfigError(str(exc), "bias.entries") from None
        cfg = cls(entries)
        cfg.validate()
        return cfg


def _check_distribution(dist: Mapping[str, float], allowed: set[str], where: str) -> None:
    if not dist:
        raise ConfigError("empty distribution", where)
    for k, p in dist.items():
        if k not in allowed:
            raise ConfigError(f"unknown category {k!r}", where)
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"probability {p} for {k!r} outside [0, 1]", where)
    if not math.isclose(sum(dist.values()), 1.0, abs_tol=1e-6):
        raise ConfigError("probabilities must sum to 1", where)


DEFAULT_POPULATION: dict[str, dict[str, float]] = {
    "race": {
        "WHITE": 0.55,
        "WHITE - RUSSIAN": 0.05,
        "BLACK/AFRICAN AMERICAN": 0.18,
        "ASIAN": 0.05,
        "HISPANIC/LATINO - PUERTO RICAN": 0.07,
        "UNKNOWN": 0.03,
        "OTHER": 0.05,
        "PATIENT DECLINED TO ANSWER": 0.02,
    },
    "gender": {"F": 0.54, "M": 0.46},
    "insurance": {"MEDICARE": 0.25, "MEDICAID": 0.12, "PRIVATE": 0.15, "OTHER": 0.02, "UNKNOWN": 0.46},
    "language": {"ENGLISH": 0.45, "SPANISH": 0.03, "CHINESE": 0.01, "RUSSIAN": 0.01, "UNKNOWN": 0.50},
}

# median minutes between consecutive activities at acuity 3
DEFAULT_PAIR_MEDIANS: dict[tuple[str, str], float] = {
    (ENTER, TRIAGE): 8.0,
    (TRIAGE, VITALS): 25.0,
    (VITALS, MED_RECON): 40.0,
    (VITALS, MED_DISPENSE): 60.0,
    (MED_RECON, MED_DISPENSE): 45.0,
}
DEFAULT_TO_DISCHARGE_MEDIAN = 150.0
DEFAULT_OTHER_MEDIAN = 20.0
DEFAULT_ACUITY_FACTOR = {1: 0.6, 2: 0.8, 3: 1.0, 4: 0.9, 5: 0.7}

DEFAULT_DECISIONS: dict[int, dict[str, float]] = {
    1: {"HOME": 0.15, "FACILITY": 0.35, "DEATH": 0.10, "AGAINST_ADVICE": 0.02, "UNKNOWN": 0.38},
    2: {"HOME": 0.25, "FACILITY": 0.20, "DEATH": 0.02, "AGAINST_ADVICE": 0.03, "UNKNOWN": 0.50},
    3: {"HOME": 0.30, "FACILITY": 0.10, "DEATH": 0.01, "AGAINST_ADVICE": 0.04, "UNKNOWN": 0.55},
    4: {"HOME": 0.35, "FACILITY": 0.03, "DEATH": 0.00, "AGAINST_ADVICE": 0.05, "UNKNOWN": 0.57},
    5: {"HOME": 0.40, "FACILITY": 0.01, "DEATH": 0.00, "AGAINST_ADVICE": 0.05, "UNKNOWN": 0.54},
}


@dataclass(frozen=True)
class DurationModel:
    """Log-normal gaps between consecutive activities, in minutes.

    ``overrides`` maps ``(from, to, acuity)`` or ``(from, to, None)`` to
    ``(median_minutes, sigma)``.
    """

    sigma: float = 0.6
    pair_medians: Mapping[tuple[str, str], float] = field(default_factory=lambda: dict(DEFAULT_PAIR_MEDIANS))
    to_discharge_median: float = DEFAULT_TO_DISCHARGE_MEDIAN
    other_median: float = DEFAULT_OTHER_MEDIAN
    acuity_factor: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_ACUITY_FACTOR))
    overrides: Mapping[tuple, tuple[float, float]] = field(default_factory=dict)

    def params(self, a: str, b: str, acuity: int) -> tuple[float, float]:
        """(mu, sigma) of the underlying normal for the a -> b gap."""
        hit = self.overrides.get((a, b, acuity)) or self.overrides.get((a, b, None))
        if hit:
            median, sigma = hit
            return math.log(median), sigma
        if b == DISCHARGE:
            median = self.to_discharge_median
        else:
            median = self.pair_medians.get((a, b), self.other_median)
        return math.log(median * self.acuity_factor.get(acuity, 1.0)), self.sigma


@dataclass(frozen=True)
class Scenario:
    population: Mapping[str, Mapping[str, float]] = field(default_factory=lambda: dict(DEFAULT_POPULATION))
    age_range: tuple[int, int] = (18, 95)
    p_life_saving: float = 0.03
    p_high_risk: float = 0.12
    p_confused: float = 0.03
    pain_weights: Sequence[float] = (8, 3, 4, 5, 6, 6, 5, 4, 3, 2, 1)
    resource_weights: Mapping[int, float] = field(default_factory=lambda: {0: 0.08, 1: 0.27, 2: 0.35, 3: 0.30})
    vital_means: Vitals = Vitals(85.0, 17.0, 97.0)
    vital_sds: Vitals = Vitals(14.0, 2.5, 2.0)
    danger_zone: DangerZone = DangerZone()
    ranges: VitalRanges = VitalRanges()
    p_med_recon: float = 0.85
    p_med_dispense: float = 0.80
    p_recheck_vitals: float = 0.05
    p_retriage: float = 0.02
    p_waste_redo: float = 0.03
    decisions: Mapping[int, Mapping[str, float]] = field(default_factory=lambda: dict(DEFAULT_DECISIONS))
    durations: DurationModel = DurationModel()
    start: datetime = datetime(2150, 1, 1)
    span_days: int = 365
    age_bands: AgeBands = AgeBands()

    def validate(self) -> None:
        for name in ("p_life_saving", "p_high_risk", "p_confused", "p_med_recon", "p_med_dispense",
                     "p_recheck_vitals", "p_retriage", "p_waste_redo"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError("probability outside [0, 1]", f"scenario.{name}")
        for attr in ("race", "gender", "insurance", "language"):
            dist = self.population.get(attr)
            if not dist or sum(dist.values()) <= 0 or any(w < 0 for w in dist.values()):
                raise ConfigError("needs non-negative weights with positive total", f"scenario.population.{attr}")
        lo, hi = self.age_range
        if not 0 <= lo <= hi:
            raise ConfigError("need 0 <= min <= max", "scenario.age_range")
        if len(self.pain_weights) != 11:
            raise ConfigError("need 11 weights (pain 0-10)", "scenario.pain_weights")
        for level in range(1, 6):
            if level not in self.decisions:
                raise ConfigError(f"missing acuity {level}", "scenario.decisions")
            _check_distribution(self.decisions[level], {g.value for g in DecisionGroup},
                                f"scenario.decisions.{level}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scenario":
        """Build from the JSON scenario layout; unspecified keys keep defaults."""
        d = dict(d)
        kw: dict = {}
        simple = ("age_range", "p_life_saving", "p_high_risk", "p_confused", "pain_weights",
                  "p_med_recon", "p_med_dispense", "p_recheck_vitals", "p_retriage", "p_waste_redo", "span_days")
        for k in simple:
            if k in d:
                kw[k] = tuple(d[k]) if k in ("age_range", "pain_weights") else d[k]
        if "population" in d:
            pop = dict(DEFAULT_POPULATION)
            pop.update(d["population"])
            kw["population"] = pop
        if "resource_weights" in d:
            kw["resource_weights"] = {int(k): float(v) for k, v in d["resource_weights"].items()}
        if "decisions" in d:
            dec = dict(DEFAULT_DECISIONS)
            dec.update({int(k): v for k, v in d["decisions"].items()})
            kw["decisions"] = dec
        if "vital_means" in d:
            kw["vital_means"] = Vitals(**d["vital_means"])
        if "vital_sds" in d:
            kw["vital_sds"] = Vitals(**d["vital_sds"])
        if "danger_zone" in d:
            kw["danger_zone"] = DangerZone(**d["danger_zone"])
        if "age_bands" in d:
            kw["age_bands"] = AgeBands(**d["age_bands"])
        if "start" in d:
            kw["start"] = datetime.fromisoformat(d["start"])
        if "durations" in d:
            dd = d["durations"]
            overrides = {}
            for item in dd.get("overrides", []):
                overrides[(item["from"], item["to"], item.get("acuity"))] = (item["median_min"], item.get("sigma", dd.get("sigma", 0.6)))
            kw["durations"] = DurationModel(
                sigma=dd.get("sigma", 0.6),
                to_discharge_median=dd.get("to_discharge_median", DEFAULT_TO_DISCHARGE_MEDIAN),
                other_median=dd.get("other_median", DEFAULT_OTHER_MEDIAN),
                acuity_factor={int(k): v for k, v in dd.get("acuity_factor", DEFAULT_ACUITY_FACTOR).items()},
                overrides=overrides,
            )
        try:
            sc = cls(**kw)
        except (TypeError, ValidationError) as exc:
            raise ConfigError(str(exc), "scenario") from None
        sc.validate()
        return sc

    @classmethod
    def from_json(cls, path) -> tuple["Scenario", BiasConfig]:
        """Load a scenario file; its optional ``bias`` block is returned alongside."""
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        bias = BiasConfig.from_dict(d.pop("bias", {}))
        return cls.from_dict(d), bias


# --------------------------------------------------------------------------- generation

_DISPOSITIONS: dict[str, list[str]] = {}
for _raw, _group in DISCHARGE_TABLE:
    _DISPOSITIONS.setdefault(_group.value, []).append(_raw)


def _pick(rng: random.Random, dist: Mapping[str, float]) -> str:
    keys = list(dist)
    return rng.choices(keys, weights=[dist[k] for k in keys])[0]


def _cumulative(dist: Mapping) -> tuple[list, list[float]]:
    keys = list(dist)
    return keys, list(itertools.accumulate(float(dist[k]) for k in keys))


@dataclass(frozen=True)
class _Tables:
    """Cumulative weights of a scenario, built once per log instead of per draw."""

    population: dict
    decisions: dict
    resources: tuple
    pain: tuple
    gaps: dict = field(default_factory=dict)  # (from, to, acuity) -> (mu, sigma), filled lazily

    @classmethod
    def of(cls, sc: "Scenario") -> "_Tables":
        return cls(
            {a: _cumulative(d) for a, d in sc.population.items()},
            {lv: _cumulative(d) for lv, d in sc.decisions.items()},
            _cumulative(sc.resource_weights),
            _cumulative(dict(enumerate(sc.pain_weights))),
        )


def _draw(rng: random.Random, table: tuple[list, list[float]]):
    # same draw as rng.choices(keys, cum_weights=cum)[0], minus the call overhead
    keys, cum = table
    return keys[bisect.bisect(cum, rng.random() * cum[-1], 0, len(cum) - 1)]


def sample_presentation(rng: random.Random, sc: Scenario, demographics: Mapping[str, str],
                        tables: _Tables | None = None) -> PatientPresentation:
    tables = tables or _Tables.of(sc)
    lo_hr, hi_hr = sc.ranges.heart_rate
    lo_rr, hi_rr = sc.ranges.respiratory_rate
    lo_o2, hi_o2 = sc.ranges.spo2
    vitals = Vitals(
        heart_rate=min(max(rng.gauss(sc.vital_means.heart_rate, sc.vital_sds.heart_rate), lo_hr), hi_hr),
        respiratory_rate=min(max(rng.gauss(sc.vital_means.respiratory_rate, sc.vital_sds.respiratory_rate), lo_rr), hi_rr),
        spo2=min(max(rng.gauss(sc.vital_means.spo2, sc.vital_sds.spo2), lo_o2), hi_o2),
    )
    return PatientPresentation(
        life_saving_needed=rng.random() < sc.p_life_saving,
        high_risk=rng.random() < sc.p_high_risk,
        confused=rng.random() < sc.p_confused,
        severe_pain=_draw(rng, tables.pain),
        expected_resources=_draw(rng, tables.resources),
        vitals=vitals,
        demographics=demographics,
        ranges=sc.ranges,
    )


def _case_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"{seed}/{index}")


def generate_case(index: int, seed: int, sc: Scenario, bias: BiasConfig, tables: _Tables | None = None) -> Case:
    tables = tables or _Tables.of(sc)
    rng = _case_rng(seed, index)
    raw = {attr: _draw(rng, tables.population[attr]) for attr in ("race", "gender", "insurance", "language")}
    raw["age"] = str(rng.randint(*sc.age_range))
    groups = map_demographics(raw, sc.age_bands) if bias.entries else None
    pres = sample_presentation(rng, sc, raw, tables)
    level = assign_esi(pres, sc.danger_zone).level

    multiplier, keep_prob, shift = 1.0, 1.0 - sc.p_waste_redo, None
    for e in bias.entries:
        if (e.acuity is None or e.acuity == level) and groups.group_of(e.attribute) == e.group:
            multiplier *= e.time_multiplier
            keep_prob *= 1.0 - e.extra_waste_redo_prob
            if e.decision_shift is not None:
                shift = e.decision_shift

    # (activity, acuity recorded on the event, kind); kind "rapid" marks an
    # injected duplicate, "retriage" a clinically justified re-assessment.
    steps: list[tuple[str, str, str]] = [(ENTER, "", ""), (TRIAGE, str(level), ""), (VITALS, "", "")]
    if rng.random() < sc.p_retriage:
        new = level + rng.choice((-1, 1)) if 1 < level < 5 else (2 if level == 1 else 4)
        steps.append((TRIAGE, str(new), "retriage"))
    if rng.random() < sc.p_med_recon:
        steps.append((MED_RECON, "", ""))
    if rng.random() < sc.p_med_dispense:
        steps.append((MED_DISPENSE, "", ""))
    # a recheck straight after the first check would be a direct repeat (see below)
    if rng.random() < sc.p_recheck_vitals and steps[-1][0] != VITALS:
        steps.append((VITALS, "", ""))
    if rng.random() >= keep_prob:
        # never adjacent to the original: a directly repeated activity would be
        # mined as a self-loop and cost every case a token
        if rng.random() < 0.5:
            steps.insert(2, (ENTER, "", "rapid"))
        else:
            steps.insert(3, (TRIAGE, str(level), "rapid"))
    steps.append((DISCHARGE, "", ""))

    group = _pick(rng, shift) if shift else _draw(rng, tables.decisions[level])
    disposition = rng.choice(_DISPOSITIONS[group])

    t = sc.start + timedelta(seconds=rng.randrange(sc.span_days * 86400))
    # stay-level attributes are repeated on every row, as in MIMICEL
    base = {k: raw[k] for k in SENSITIVE_ATTRIBUTES}
    base["disposition"] = disposition
    cid = str(30_000_000 + index)
    events = []
    last_triage = None
    prev = None
    for act, acuity, kind in steps:
        if prev is not None:
            if kind == "rapid":
                mu, sigma = math.log(3.0), 0.5
            else:
                key = (prev, act, level)
                gap_params = tables.gaps.get(key)
                if gap_params is None:
                    gap_params = tables.gaps[key] = sc.durations.params(prev, act, level)
                mu, sigma = gap_params
            gap = rng.lognormvariate(mu, sigma) * multiplier
            if kind == "retriage":
                gap = max(gap, RETRIAGE_MIN_GAP - (t - last_triage).total_seconds() / 60.0)
            t = t + timedelta(seconds=round(gap * 60.0))
        if act == TRIAGE:
            last_triage = t
        extra = dict(base)
        extra["acuity"] = acuity
        events.append(Event(cid, act, t, extra))
        prev = act
    return Case(cid, tuple(events))


def generate_log(
    n_cases: int,
    bias: BiasConfig | None = None,
    seed: int = 0,
    scenario: Scenario | None = None,
    *,
    first_index: int = 0,
) -> EventLog:
    """Synthetic ED log of ``n_cases`` stays; deterministic in ``seed``."""
    if n_cases < 1:
        raise ConfigError("n_cases must be >= 1", "n_cases")
    bias = bias or BiasConfig()
    bias.validate()
    sc = scenario or Scenario()
    sc.validate()
    cases = {}
    tables = _Tables.of(sc)
    for i in range(first_index, first_index + n_cases):
        c = generate_case(i, seed, sc, bias, tables)
        cases[c.case_id] = c
    n_rows = sum(len(c.events) for c in cases.values())
    return EventLog(cases, Provenance(source=f"simulated(seed={seed})", n_rows=n_rows, n_cases=len(cases)))
