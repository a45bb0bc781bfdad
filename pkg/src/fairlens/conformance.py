"""Token-based replay of cases on a ProcessNet."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .discovery import ProcessNet
from .errors import ValidationError
from .eventlog import Case, EventLog


@dataclass(frozen=True)
class ReplayResult:
    produced: int
    consumed: int
    missing: int
    remaining: int
    unknown_activities: tuple[str, ...] = ()

    @property
    def fitness(self) -> float:
        return token_fitness(self.produced, self.consumed, self.missing, self.remaining)

    @property
    def flagged(self) -> bool:
        return bool(self.unknown_activities)


def token_fitness(p: int, c: int, m: int, r: int) -> float:
    """Equal-weight fitness from the four replay counters."""
    miss = m / c if c else 0.0
    rem = r / p if p else 0.0
    return 0.5 * (1.0 - miss) + 0.5 * (1.0 - rem)


class CompiledNet:
    """Index-based view of a net for fast repeated replay."""

    def __init__(self, net: ProcessNet):
        self.net = net
        index = {p: i for i, p in enumerate(net.places)}
        self.n_places = len(net.places)
        self.source = index[net.source]
        self.sink = index[net.sink]
        ins: dict[str, list[int]] = {t: [] for t in net.transitions}
        outs: dict[str, list[int]] = {t: [] for t in net.transitions}
        for a, b in net.arcs:
            if a in index and b in ins:
                ins[b].append(index[a])
            elif b in index and a in outs:
                outs[a].append(index[b])
        self.moves = {t: (tuple(ins[t]), tuple(outs[t])) for t in net.transitions}

    def replay(self, activities: Sequence[str]) -> ReplayResult:
        if not activities:
            raise ValidationError("cannot replay an empty case")
        marking = [0] * self.n_places
        marking[self.source] = 1
        p, c, m = 1, 0, 0
        unknown = []
        moves = self.moves
        for act in activities:
            move = moves.get(act)
            if move is None:
                # no transition: one missing token consumed, nothing produced
                unknown.append(act)
                m += 1
                c += 1
                continue
            ins, outs = move
            for i in ins:
                if marking[i]:
                    marking[i] -= 1
                else:
                    m += 1
                c += 1
            for i in outs:
                marking[i] += 1
            p += len(outs)
        if marking[self.sink]:
            marking[self.sink] -= 1
        else:
            m += 1
        c += 1
        return ReplayResult(p, c, m, sum(marking), tuple(unknown))


def replay_case(net: ProcessNet | CompiledNet, case: Case | Sequence[str]) -> ReplayResult:
    """Replay one case; the environment adds a source token and removes a sink token."""
    compiled = net if isinstance(net, CompiledNet) else CompiledNet(net)
    acts = case.activities if isinstance(case, Case) else tuple(case)
    return compiled.replay(acts)


def replay_log(net: ProcessNet, log: EventLog | Iterable[Case]) -> dict[str, ReplayResult]:
    compiled = CompiledNet(net)
    cache: dict[tuple[str, ...], ReplayResult] = {}
    out = {}
    for case in log:
        acts = case.activities
        res = cache.get(acts)
        if res is None:
            res = cache[acts] = compiled.replay(acts)
        out[case.case_id] = res
    return out


def deviation_scores(net: ProcessNet, log: EventLog | Iterable[Case]) -> dict[str, float]:
    """case_id -> replay fitness. Unknown activities are flagged, never fatal."""
    return {cid: r.fitness for cid, r in replay_log(net, log).items()}


def write_replay_csv(results: dict[str, ReplayResult], dest) -> None:
    owned = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8", newline="") if owned else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "p", "c", "m", "r", "fitness"])
        for cid, r in results.items():
            w.writerow([cid, r.produced, r.consumed, r.missing, r.remaining, repr(r.fitness)])
    finally:
        if owned:
            fh.close()
