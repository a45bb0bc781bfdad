"""Organizational-justice summary and report rendering."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError
from .stats import (
    Attribute,
    EffectKind,
    Interpretation,
    Outcome,
    StatTestResult,
    TestKind,
)


class Justice(str, Enum):
    DISTRIBUTIVE = "Distributive"
    PROCEDURAL = "Procedural"
    INTERACTIONAL = "Interactional"


# Row order: distributive, procedural, interactional.
JUSTICE_MAP: tuple[tuple[Justice, Outcome], ...] = (
    (Justice.DISTRIBUTIVE, Outcome.DECISION),
    (Justice.PROCEDURAL, Outcome.TIME),
    (Justice.PROCEDURAL, Outcome.DEVIATION),
    (Justice.PROCEDURAL, Outcome.REDO),
    (Justice.INTERACTIONAL, Outcome.REDO),
)

# Lowest label that counts as a substantive effect. For Cramer's V the bottom
# band is labelled Small, so Medium plays the role Small plays for epsilon^2.
DEFAULT_FLOORS = {EffectKind.EPSILON_SQUARED: Interpretation.SMALL, EffectKind.CRAMERS_V: Interpretation.MEDIUM}


@dataclass(frozen=True)
class JusticeEntry:
    justice: Justice
    outcome: Outcome
    acuity_levels: tuple[int, ...]
    key_attributes: tuple[Attribute, ...]
    effect_range: tuple[Interpretation, Interpretation]


@dataclass(frozen=True)
class JusticeSummary:
    entries: tuple[JusticeEntry, ...] = ()

    def for_justice(self, justice: Justice) -> list[JusticeEntry]:
        return [e for e in self.entries if e.justice is justice]


def map_to_justice(
    results: Iterable[StatTestResult],
    floors: Mapping[EffectKind, Interpretation] | None = None,
    interactional_attributes: Sequence[Attribute] = (Attribute.LANGUAGE,),
) -> JusticeSummary:
    """Group significant, non-negligible results under the fixed outcome -> justice map."""
    floors = {**DEFAULT_FLOORS, **(floors or {})}
    results = list(results)
    entries = []
    for justice, outcome in JUSTICE_MAP:
        hits = [
            r for r in results
            if r.outcome is outcome and r.tested and r.significant
            and r.interpretation.rank >= floors[r.effect_kind].rank
            and (justice is not Justice.INTERACTIONAL or r.attribute in interactional_attributes)
        ]
        if not hits:
            continue
        attrs = tuple(a for a in Attribute if any(r.attribute is a for r in hits))
        labels = sorted((r.interpretation for r in hits), key=lambda i: i.rank)
        entries.append(JusticeEntry(
            justice, outcome,
            tuple(sorted({r.acuity for r in hits})),
            attrs,
            (labels[0], labels[-1]),
        ))
    return JusticeSummary(tuple(entries))


# --------------------------------------------------------------------------- serialisation

def result_to_dict(r: StatTestResult) -> dict:
    return {
        "outcome": r.outcome.value,
        "acuity": r.acuity,
        "attribute": r.attribute.value,
        "tested": r.tested,
        "test": r.test.value if r.test else None,
        "statistic": r.statistic,
        "df": r.df,
        "p_value": r.p_value,
        "effect": r.effect,
        "effect_kind": r.effect_kind.value,
        "significant": r.significant,
        "interpretation": r.interpretation.value if r.interpretation else None,
        "interpretation_alt": r.interpretation_alt.value if r.interpretation_alt else None,
        "group_sizes": dict(r.group_sizes),
    }


def result_from_dict(d: Mapping) -> StatTestResult:
    def opt(enum, v):
        return enum(v) if v is not None else None

    return StatTestResult(
        outcome=Outcome(d["outcome"]),
        attribute=Attribute(d["attribute"]),
        acuity=int(d["acuity"]),
        tested=bool(d["tested"]),
        group_sizes={k: int(v) for k, v in d.get("group_sizes", {}).items()},
        test=opt(TestKind, d.get("test")),
        statistic=d.get("statistic"),
        df=d.get("df"),
        p_value=d.get("p_value"),
        effect=d.get("effect"),
        significant=d.get("significant"),
        interpretation=opt(Interpretation, d.get("interpretation")),
        interpretation_alt=opt(Interpretation, d.get("interpretation_alt")),
    )


def entry_to_dict(e: JusticeEntry) -> dict:
    return {
        "justice": e.justice.value,
        "outcome": e.outcome.value,
        "acuity_levels": list(e.acuity_levels),
        "key_attributes": [a.value for a in e.key_attributes],
        "effect_range": [e.effect_range[0].value, e.effect_range[1].value],
    }


def entry_from_dict(d: Mapping) -> JusticeEntry:
    lo, hi = d["effect_range"]
    return JusticeEntry(Justice(d["justice"]), Outcome(d["outcome"]), tuple(d["acuity_levels"]),
                        tuple(Attribute(a) for a in d["key_attributes"]), (Interpretation(lo), Interpretation(hi)))


def parse_report_json(text: str) -> tuple[list[StatTestResult], JusticeSummary]:
    d = json.loads(text)
    return ([result_from_dict(r) for r in d["results"]],
            JusticeSummary(tuple(entry_from_dict(e) for e in d.get("justice", []))))


def format_p(p: float | None) -> str:
    if p is None:
        return "--"
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def _span(levels: Sequence[int]) -> str:
    """(1, 2, 3, 5) -> '1-3, 5'"""
    parts, run = [], []
    for lv in sorted(levels):
        if run and lv == run[-1] + 1:
            run.append(lv)
        else:
            if run:
                parts.append(run)
            run = [lv]
    if run:
        parts.append(run)
    return ", ".join(f"{r[0]}-{r[-1]}" if len(r) > 1 else str(r[0]) for r in parts)


_TITLES = {
    Outcome.TIME: "Time: Kruskal-Wallis and epsilon-squared by acuity",
    Outcome.REDO: "Re-do: Kruskal-Wallis and epsilon-squared by acuity",
    Outcome.DEVIATION: "Deviation: Kruskal-Wallis and epsilon-squared by acuity",
    Outcome.DECISION: "Decision: chi-square and Cramer's V by acuity",
}


def _markdown(results: Sequence[StatTestResult], summary: JusticeSummary, meta: Mapping | None) -> str:
    out = ["# Triage fairness report", ""]
    if meta:
        for k, v in meta.items():
            out.append(f"- {k}: {v}")
        out.append("")
    for outcome in Outcome:
        rows = [r for r in results if r.outcome is outcome]
        if not rows:
            continue
        eff = "Cramer's V" if outcome is Outcome.DECISION else "epsilon^2"
        out += [f"## {_TITLES[outcome]}", "",
                f"| Acuity | Attribute | p-value | {eff} | Significant | Interpretation |",
                "|---|---|---|---|---|---|"]
        for r in rows:
            if not r.tested:
                out.append(f"| {r.acuity} | {r.attribute.value} | -- | -- | -- | Not tested |")
                continue
            label = r.interpretation.value
            if r.interpretation_alt is not None and r.interpretation_alt is not r.interpretation:
                label += f" (prose bands: {r.interpretation_alt.value})"
            out.append(f"| {r.acuity} | {r.attribute.value} | {format_p(r.p_value)} | {r.effect:.4f} | "
                       f"{'Yes' if r.significant else 'No'} | {label} |")
        out.append("")
    out += ["## Summary by organizational justice dimension", ""]
    if not summary.entries:
        out += ["No significant, non-negligible differences found.", ""]
    else:
        out += ["| Justice type | Outcome | Acuity level(s) | Key attributes | Effect size |", "|---|---|---|---|---|"]
        for e in summary.entries:
            lo, hi = e.effect_range
            rng = lo.value if lo is hi else f"{lo.value} to {hi.value}"
            out.append(f"| {e.justice.value} | {e.outcome.value} | {_span(e.acuity_levels)} | "
                       f"{', '.join(a.value for a in e.key_attributes)} | {rng} |")
        out.append("")
    return "\n".join(out)


RESULT_CSV_HEADER = ("outcome", "acuity", "attribute", "tested", "test", "statistic", "df", "p_value",
                     "effect", "effect_kind", "significant", "interpretation", "interpretation_alt", "group_sizes")


def _csv(results: Sequence[StatTestResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_CSV_HEADER)
    for r in results:
        d = result_to_dict(r)
        d["group_sizes"] = ";".join(f"{k}={v}" for k, v in r.group_sizes.items())
        w.writerow(["" if d[k] is None else (repr(d[k]) if isinstance(d[k], float) else d[k])
                    for k in RESULT_CSV_HEADER])
    return buf.getvalue()


def render_report(
    results: Sequence[StatTestResult],
    summary: JusticeSummary,
    format: str = "markdown",
    meta: Mapping | None = None,
) -> str:
    fmt = {"md": "markdown"}.get(format, format)
    if fmt == "markdown":
        return _markdown(results, summary, meta)
    if fmt == "json":
        doc = {
            "meta": dict(meta or {}),
            "results": [result_to_dict(r) for r in results],
            "justice": [entry_to_dict(e) for e in summary.entries],
        }
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        return _csv(results)
    raise ConfigError(f"unknown report format {format!r}", "format")


def summary_lines(summary: JusticeSummary) -> list[str]:
    """One line per justice dimension, for terminal output."""
    lines = []
    for justice in Justice:
        entries = summary.for_justice(justice)
        if not entries:
            lines.append(f"{justice.value}: no significant non-negligible differences")
            continue
        parts = []
        for e in entries:
            lo, hi = e.effect_range
            parts.append(f"{e.outcome.value} (acuity {_span(e.acuity_levels)}; "
                         f"{', '.join(a.value for a in e.key_attributes)}; {lo.value}-{hi.value})")
        lines.append(f"{justice.value}: " + "; ".join(parts))
    return lines
