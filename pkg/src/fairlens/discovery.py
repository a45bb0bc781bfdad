"""Heuristic-miner discovery and conversion to a place/transition net."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import StructuralError
from .eventlog import EventLog

SOURCE = "source"
SINK = "sink"


@dataclass
class DirectlyFollows:
    counts: Counter = field(default_factory=Counter)
    activities: set[str] = field(default_factory=set)
    starts: Counter = field(default_factory=Counter)
    ends: Counter = field(default_factory=Counter)

    def __getitem__(self, pair: tuple[str, str]) -> int:
        return self.counts.get(pair, 0)

    def merge(self, other: "DirectlyFollows") -> "DirectlyFollows":
        return DirectlyFollows(
            self.counts + other.counts,
            self.activities | other.activities,
            self.starts + other.starts,
            self.ends + other.ends,
        )

    def add_trace(self, trace: Iterable[str]) -> None:
        trace = list(trace)
        if not trace:
            return
        self.activities.update(trace)
        self.starts[trace[0]] += 1
        self.ends[trace[-1]] += 1
        self.counts.update(zip(trace, trace[1:]))


def count_directly_follows(log: EventLog | Iterable[Iterable[str]]) -> DirectlyFollows:
    """Tally |a>b| over every case. Accepts an EventLog or plain activity sequences."""
    df = DirectlyFollows()
    traces = (c.activities for c in log) if isinstance(log, EventLog) else log
    for t in traces:
        df.add_trace(t)
    return df


def dependency_measure(df: DirectlyFollows, a: str, b: str) -> float:
    if a == b:
        n = df[a, a]
        return n / (n + 1)
    ab, ba = df[a, b], df[b, a]
    return (ab - ba) / (ab + ba + 1)


@dataclass
class DependencyGraph:
    nodes: list[str]
    edges: dict[tuple[str, str], float]
    threshold: float
    starts: Mapping[str, int] = field(default_factory=dict)
    ends: Mapping[str, int] = field(default_factory=dict)
    repaired: set[tuple[str, str]] = field(default_factory=set)


def mine_dependency_graph(df: DirectlyFollows, tau: float = 0.8) -> DependencyGraph:
    """Keep edges with dependency >= tau, then patch dangling activities.

    Every activity that is not a start activity gets its best-scoring incoming
    edge if it has none, and every non-end activity its best outgoing edge.
    Candidates exclude self-loops; ties go to the higher raw count, then name.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    nodes = sorted(df.activities)
    edges: dict[tuple[str, str], float] = {}
    for a in nodes:
        for b in nodes:
            if a == b and df[a, a] == 0:
                continue
            if a != b and df[a, b] == 0:
                continue
            d = dependency_measure(df, a, b)
            if d >= tau:
                edges[a, b] = d

    def best(cands):
        # max() keeps the first of equal keys, and cands arrive name-sorted
        return max(cands, key=lambda e: (dependency_measure(df, *e), df[e]))

    repaired = set()
    for x in nodes:
        others = [y for y in nodes if y != x]
        if not others:
            continue
        if x not in df.starts and not any(b == x and a != x for a, b in edges):
            e = best([(y, x) for y in others])
            edges[e] = dependency_measure(df, *e)
            repaired.add(e)
        if x not in df.ends and not any(a == x and b != x for a, b in edges):
            e = best([(x, y) for y in others])
            edges[e] = dependency_measure(df, *e)
            repaired.add(e)
    return DependencyGraph(nodes, dict(sorted(edges.items())), tau, dict(df.starts), dict(df.ends), repaired)


@dataclass(frozen=True)
class ProcessNet:
    transitions: tuple[str, ...]
    places: tuple[str, ...]
    arcs: tuple[tuple[str, str], ...]  # (place, transition) or (transition, place)
    source: str = SOURCE
    sink: str = SINK

    def inputs(self, t: str) -> list[str]:
        return [a for a, b in self.arcs if b == t and a in self._place_set]

    def outputs(self, t: str) -> list[str]:
        return [b for a, b in self.arcs if a == t and b in self._place_set]

    @property
    def _place_set(self) -> frozenset:
        return frozenset(self.places)

    def to_dict(self) -> dict:
        return {
            "transitions": list(self.transitions),
            "places": list(self.places),
            "arcs": [list(a) for a in self.arcs],
            "source": self.source,
            "sink": self.sink,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProcessNet":
        return cls(tuple(d["transitions"]), tuple(d["places"]), tuple(tuple(a) for a in d["arcs"]),
                   d.get("source", SOURCE), d.get("sink", SINK))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_dot(self) -> str:
        lines = ["digraph net {", "  rankdir=LR;"]
        for p in self.places:
            shape = "doublecircle" if p in (self.source, self.sink) else "circle"
            lines.append(f'  "{p}" [shape={shape}, label=""];' if p not in (self.source, self.sink)
                         else f'  "{p}" [shape={shape}, label="{p}"];')
        for t in self.transitions:
            lines.append(f'  "{t}" [shape=box];')
        for a, b in self.arcs:
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def place_name(a: str, b: str) -> str:
    return f"p({a},{b})"


def to_process_net(g: DependencyGraph) -> ProcessNet:
    """One transition per activity and one place per dependency edge.

    The source place feeds start activities that have no incoming edge from
    another activity, and the sink is fed by end activities with no outgoing
    edge to another activity. If that leaves either side empty, the most
    frequent start (end) activity is used.
    """
    nodes = list(g.nodes)
    if not nodes:
        raise StructuralError("dependency graph has no activities")
    has_in = {b for a, b in g.edges if a != b}
    has_out = {a for a, b in g.edges if a != b}
    firsts = [n for n in nodes if g.starts.get(n, 0) > 0 and n not in has_in]
    lasts = [n for n in nodes if g.ends.get(n, 0) > 0 and n not in has_out]
    if not firsts:
        firsts = [max(nodes, key=lambda n: g.starts.get(n, 0))]
    if not lasts:
        lasts = [max(nodes, key=lambda n: g.ends.get(n, 0))]

    places = [SOURCE]
    arcs: list[tuple[str, str]] = [(SOURCE, t) for t in firsts]
    for a, b in g.edges:
        p = place_name(a, b)
        places.append(p)
        arcs += [(a, p), (p, b)]
    places.append(SINK)
    arcs += [(t, SINK) for t in lasts]

    # reachability from the source over the arc graph
    succ: dict[str, list[str]] = {}
    for a, b in arcs:
        succ.setdefault(a, []).append(b)
    seen, stack = {SOURCE}, [SOURCE]
    while stack:
        for nxt in succ.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    unreachable = [t for t in nodes if t not in seen]
    if unreachable:
        raise StructuralError(f"transitions unreachable from source: {unreachable}")
    return ProcessNet(tuple(nodes), tuple(places), tuple(arcs))


def discover(log: EventLog, tau: float = 0.8) -> ProcessNet:
    return to_process_net(mine_dependency_graph(count_directly_follows(log), tau))
