"""Group-difference tests stratified by acuity.

Kruskal-Wallis (with epsilon-squared) for the continuous outcomes, chi-square
independence (with Cramer's V) for the discharge decision. The chi-square
tail probability is computed here from the regularized incomplete gamma
function; scipy is only used by the test-suite as a reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import NotTested
from .outcomes import CaseOutcomes, DecisionGroup

ALPHA = 0.05
MIN_GROUP_N = 30
ACUITY_LEVELS = (1, 2, 3, 4, 5)


class Outcome(str, Enum):
    TIME = "Time"
    REDO = "Redo"
    DEVIATION = "Deviation"
    DECISION = "Decision"


class Attribute(str, Enum):
    RACE = "Race"
    AGE_GROUP = "AgeGroup"
    GENDER = "Gender"
    INSURANCE = "Insurance"
    LANGUAGE = "Language"

    @property
    def profile_key(self) -> str:
        return _PROFILE_KEY[self]


_PROFILE_KEY = {
    Attribute.RACE: "race",
    Attribute.AGE_GROUP: "age",
    Attribute.GENDER: "gender",
    Attribute.INSURANCE: "insurance",
    Attribute.LANGUAGE: "language",
}


class TestKind(str, Enum):
    KRUSKAL_WALLIS = "KruskalWallis"
    CHI_SQUARE = "ChiSquare"

    __test__ = False  # keep pytest from collecting this


class EffectKind(str, Enum):
    EPSILON_SQUARED = "EpsilonSquared"
    CRAMERS_V = "CramersV"


class Interpretation(str, Enum):
    NEGLIGIBLE = "Negligible"
    SMALL = "Small"
    MEDIUM = "Medium"
    LARGE = "Large"
    VERY_LARGE = "VeryLarge"

    @property
    def rank(self) -> int:
        return list(Interpretation).index(self)


_I = Interpretation
EPSILON_BANDS = ((0.0, _I.NEGLIGIBLE), (0.01, _I.SMALL), (0.06, _I.MEDIUM), (0.14, _I.LARGE))
# Edges consistent with every labelled Cramer's V row of the reference decision results.
CRAMERS_V_TABLE_BANDS = ((0.0, _I.SMALL), (0.1, _I.MEDIUM), (0.3, _I.LARGE), (0.5, _I.VERY_LARGE))
# Literal reading of the prose anchors "0.1 small, 0.3 medium, 0.5 large, >0.5 very large".
CRAMERS_V_PROSE_BANDS = ((0.0, _I.NEGLIGIBLE), (0.1, _I.SMALL), (0.3, _I.MEDIUM), (0.5, _I.LARGE),
                         (math.nextafter(0.5, math.inf), _I.VERY_LARGE))


@dataclass(frozen=True)
class EffectBands:
    epsilon_squared: tuple = EPSILON_BANDS
    cramers_v: tuple = CRAMERS_V_TABLE_BANDS
    cramers_v_alt: tuple | None = CRAMERS_V_PROSE_BANDS

    @classmethod
    def for_convention(cls, convention: str) -> "EffectBands":
        if convention == "table":
            return cls()
        if convention == "prose":
            return cls(cramers_v=CRAMERS_V_PROSE_BANDS, cramers_v_alt=CRAMERS_V_TABLE_BANDS)
        raise ValueError(f"unknown effect-band convention {convention!r}")


def _band(value: float, bands: Sequence[tuple[float, Interpretation]]) -> Interpretation:
    label = bands[0][1]
    for edge, lab in bands:
        if value >= edge:
            label = lab
        else:
            break
    return label


def interpret_effect(kind: EffectKind | str, value: float, bands: EffectBands | None = None) -> Interpretation:
    bands = bands or EffectBands()
    kind = EffectKind(kind)
    if value < 0 or math.isnan(value):
        raise ValueError(f"effect size must be >= 0, got {value}")
    table = bands.epsilon_squared if kind is EffectKind.EPSILON_SQUARED else bands.cramers_v
    return _band(value, table)


# --------------------------------------------------------------------------- primitives

def rank_with_ties(values: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
    """Mid-ranks (1-based) and the sizes of tie groups longer than one."""
    x = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if x.size == 0:
        raise ValueError("cannot rank an empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    sizes = np.diff(np.r_[starts, x.size])
    ranks = np.empty(x.size)
    ranks[order] = np.repeat(starts + (sizes + 1) / 2.0, sizes)
    return ranks, sizes[sizes > 1]


class TestResult(NamedTuple):
    statistic: float
    df: int
    p_value: float

    __test__ = False


def _gamma_series(a: float, x: float) -> float:
    # lower regularized P(a, x); converges fast for x < a + 1
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a: float, x: float) -> float:
    # upper regularized Q(a, x) by modified Lentz; for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi2_upper_tail(x: float, df: int) -> float:
    """P(X >= x) for X ~ chi-square(df), i.e. Q(df/2, x/2)."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x < 0 or math.isnan(x):
        raise ValueError(f"x must be >= 0, got {x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    a, h = df / 2.0, x / 2.0
    if h == 0.0:  # x/2 underflowed
        return 1.0
    if h < a + 1.0:
        q = 1.0 - _gamma_series(a, h)
    else:
        q = _gamma_cont_frac(a, h)
    return min(max(q, 0.0), 1.0)


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> TestResult:
    """Tie-corrected Kruskal-Wallis H over the pooled mid-ranks."""
    arrays = [np.asarray(g, dtype=float) for g in groups]
    arrays = [a for a in arrays if a.size]
    if len(arrays) < 2:
        raise NotTested("need at least two non-empty groups")
    pooled = np.concatenate(arrays)
    n = pooled.size
    ranks, ties = rank_with_ties(pooled)
    df = len(arrays) - 1
    correction = 1.0 - float(np.sum(ties.astype(float) ** 3 - ties)) / (n**3 - n)
    if correction <= 0.0:
        return TestResult(0.0, df, 1.0)
    # sum n_i (mean_rank_i - (N+1)/2)^2 is the same quantity as
    # sum R_i^2/n_i - N(N+1)^2/4 without the cancellation at large N
    centre = (n + 1) / 2.0
    spread = 0.0
    start = 0
    for a in arrays:
        mean_rank = ranks[start:start + a.size].mean()
        spread += a.size * (mean_rank - centre) ** 2
        start += a.size
    h = 12.0 / (n * (n + 1)) * spread / correction
    h = float(h)
    return TestResult(h, df, chi2_upper_tail(h, df))


def epsilon_squared(h: float, n: int) -> float:
    if n < 2:
        raise ValueError("need N >= 2")
    return h / (n - 1)


@dataclass(frozen=True)
class ContingencyTable:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (len(self.rows), len(self.cols)):
            raise ValueError(f"counts shape {c.shape} does not match labels")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return int(np.asarray(self.counts).sum())

    def drop_empty(self) -> "ContingencyTable":
        c = np.asarray(self.counts)
        keep_r = c.sum(axis=1) > 0
        keep_c = c.sum(axis=0) > 0
        return ContingencyTable(
            tuple(r for r, k in zip(self.rows, keep_r) if k),
            tuple(x for x, k in zip(self.cols, keep_c) if k),
            c[keep_r][:, keep_c],
        )

    @classmethod
    def from_array(cls, counts) -> "ContingencyTable":
        c = np.asarray(counts)
        return cls(tuple(map(str, range(c.shape[0]))), tuple(map(str, range(c.shape[1]))), c)


def chi_square_independence(t: ContingencyTable | Sequence[Sequence[int]]) -> TestResult:
    """Pearson chi-square after dropping all-zero rows and columns (no continuity correction)."""
    if not isinstance(t, ContingencyTable):
        t = ContingencyTable.from_array(t)
    t = t.drop_empty()
    obs = np.asarray(t.counts, dtype=float)
    r, c = obs.shape
    if r < 2 or c < 2:
        raise NotTested(f"{r}x{c} table after dropping empty margins")
    n = obs.sum()
    expected = np.outer(obs.sum(axis=1), obs.sum(axis=0)) / n
    chi2 = float(np.sum((obs - expected) ** 2 / expected))
    df = (r - 1) * (c - 1)
    return TestResult(chi2, df, chi2_upper_tail(chi2, df))


def cramers_v(chi2: float, n: int, r: int, c: int) -> float:
    k = min(r, c) - 1
    if n <= 0 or k < 1:
        raise ValueError("need N > 0 and min(r, c) >= 2")
    return math.sqrt(chi2 / (n * k))


# --------------------------------------------------------------------------- grid

@dataclass
class StatTestResult:
    outcome: Outcome
    attribute: Attribute
    acuity: int
    tested: bool
    group_sizes: dict[str, int] = field(default_factory=dict)
    test: TestKind | None = None
    statistic: float | None = None
    df: int | None = None
    p_value: float | None = None
    effect: float | None = None
    significant: bool | None = None
    interpretation: Interpretation | None = None
    interpretation_alt: Interpretation | None = None

    @property
    def effect_kind(self) -> EffectKind:
        return EffectKind.CRAMERS_V if self.outcome is Outcome.DECISION else EffectKind.EPSILON_SQUARED


def finalize(res: StatTestResult, alpha: float = ALPHA, bands: EffectBands | None = None) -> StatTestResult:
    """Fill the significance flag and effect labels from p_value and effect."""
    bands = bands or EffectBands()
    if not res.tested:
        return res
    res.significant = bool(res.p_value < alpha)
    res.interpretation = interpret_effect(res.effect_kind, res.effect, bands)
    if res.effect_kind is EffectKind.CRAMERS_V and bands.cramers_v_alt is not None:
        res.interpretation_alt = _band(res.effect, bands.cramers_v_alt)
    return res


_GROUP_ORDER = {
    Attribute.RACE: ("Caucasian", "NonCaucasian", "Multiethnic", "Other", "Deleted"),
    Attribute.AGE_GROUP: ("Until45", "Until65", "Older"),
    Attribute.GENDER: ("Female", "Male", "Unknown"),
    Attribute.INSURANCE: ("Public", "Private", "Unknown"),
    Attribute.LANGUAGE: ("English", "NonEnglish", "Unknown"),
}
_DECISIONS = tuple(g.value for g in DecisionGroup)


def run_attribute_tests(
    outcomes: Sequence[CaseOutcomes],
    min_group_n: int = MIN_GROUP_N,
    alpha: float = ALPHA,
    bands: EffectBands | None = None,
    acuities: Sequence[int] = ACUITY_LEVELS,
) -> list[StatTestResult]:
    """Full acuity x attribute x outcome grid.

    Groups smaller than ``min_group_n`` are left out; a cell with fewer than
    two remaining groups is returned with ``tested=False``. Cases without an
    acuity are not part of any stratum.
    """
    bands = bands or EffectBands()
    acuity = np.array([o.acuity if o.acuity is not None else 0 for o in outcomes], dtype=int)
    values = {
        Outcome.TIME: np.array([o.duration for o in outcomes], dtype=float),
        Outcome.REDO: np.array([o.redo.waste_pct for o in outcomes], dtype=float),
        Outcome.DEVIATION: np.array([o.fitness for o in outcomes], dtype=float),
    }
    decision = np.array([_DECISIONS.index(o.decision_group.value) for o in outcomes], dtype=int)
    labels = {a: np.array([o.profile.group_of(a.profile_key) for o in outcomes], dtype=object)
              for a in Attribute}

    cells: dict[tuple, StatTestResult] = {}
    for level in acuities:
        in_stratum = acuity == level
        for attr in Attribute:
            lab = labels[attr][in_stratum]
            order = _GROUP_ORDER[attr]
            present = sorted(set(lab), key=lambda g: (order.index(g) if g in order else len(order), g))
            masks = {g: lab == g for g in present}
            sizes = {g: int(m.sum()) for g, m in masks.items()}
            eligible = [g for g in present if sizes[g] >= min_group_n]
            for outcome in Outcome:
                res = StatTestResult(outcome, attr, level, tested=False, group_sizes=dict(sizes))
                cells[outcome, level, attr] = res
                if len(eligible) < 2:
                    continue
                n = sum(sizes[g] for g in eligible)
                try:
                    if outcome is Outcome.DECISION:
                        dec = decision[in_stratum]
                        counts = np.array([np.bincount(dec[masks[g]], minlength=len(_DECISIONS))
                                           for g in eligible])
                        table = ContingencyTable(tuple(eligible), _DECISIONS, counts).drop_empty()
                        stat, df, p = chi_square_independence(table)
                        effect = cramers_v(stat, table.n, *table.counts.shape)
                        kind = TestKind.CHI_SQUARE
                    else:
                        v = values[outcome][in_stratum]
                        stat, df, p = kruskal_wallis([v[masks[g]] for g in eligible])
                        effect = epsilon_squared(stat, n)
                        kind = TestKind.KRUSKAL_WALLIS
                except NotTested:
                    continue
                res.tested = True
                res.test, res.statistic, res.df, res.p_value, res.effect = kind, float(stat), int(df), float(p), float(effect)
                finalize(res, alpha, bands)
    return [cells[o, lv, a] for o in Outcome for lv in acuities for a in Attribute]
