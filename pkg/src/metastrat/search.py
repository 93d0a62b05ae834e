"""First-improvement hill climbing over a program space against a mixed opponent."""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import games as _games
from .games import GameSpec
from .grammar import DEFAULT_DEPTH_CAP, DEFAULT_NODE_CAP, Grammar, Program, mutate, render, sample_program

EPS = 1e-9

Neighbor = Callable[[Program, Grammar, int, random.Random], Program]


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class SearchBudget:
    max_games: int
    max_evaluations: int | None = None

    def evaluations(self, support_size: int) -> int:
        n = self.max_games // support_size
        if self.max_evaluations is not None:
            n = min(n, self.max_evaluations)
        return n


@dataclass(frozen=True)
class TraceRecord:
    program: Program
    utilities: tuple[int, ...]  # candidate's utility vs each support strategy
    value: float


@dataclass
class SearchTrace:
    probs: tuple[float, ...]
    records: list[TraceRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["candidate"] + [f"opp{j}" for j in range(len(self.probs))] + ["value"])
        for rec in self.records:
            w.writerow([render(rec.program), *rec.utilities, repr(rec.value)])
        return buf.getvalue()


@dataclass
class SearchResult:
    program: Program
    value: float
    games: int
    trace: SearchTrace

    @property
    def evaluations(self) -> int:
        return len(self.trace.records)


def hill_climb(
    spec: GameSpec,
    g: Grammar,
    start: Program | None,
    meta: Sequence[tuple[Program, float]],
    budget: SearchBudget | int,
    rng: random.Random,
    player: int = 0,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    node_cap: int = DEFAULT_NODE_CAP,
    neighbor: Neighbor | None = None,
) -> SearchResult:
    """Approximate a best response for ``player`` to the mixed opponent ``meta``.

    Each candidate evaluation plays every support strategy once and is charged
    ``len(support)`` games, the start candidate included. A neighbour replaces
    the incumbent only when strictly better; the earliest best candidate is
    returned.
    """
    if isinstance(budget, int):
        budget = SearchBudget(budget)
    support = [(p, w) for p, w in meta if w > 0]
    if not support:
        raise ValueError("meta-strategy has empty support")
    total = sum(w for _, w in support)
    if abs(total - 1.0) > EPS:
        raise ValueError(f"meta probabilities sum to {total}")
    n_evals = budget.evaluations(len(support))
    if n_evals < 1:
        raise BudgetError(f"budget of {budget.max_games} games cannot pay for one evaluation of {len(support)}")
    step = neighbor if neighbor is not None else (lambda p, gr, d, r: mutate(p, gr, d, r, node_cap))

    opponents = [p for p, _ in support]
    weights = [w for _, w in support]
    trace = SearchTrace(probs=tuple(weights))
    utility_for = _games.utility_for

    def evaluate(cand: Program) -> float:
        utils = tuple(utility_for(spec, player, cand, opp) for opp in opponents)
        value = sum(w * u for w, u in zip(weights, utils))
        trace.records.append(TraceRecord(cand, utils, value))
        return value

    current = start if start is not None else sample_program(g, depth_cap, rng)
    current_value = evaluate(current)
    for _ in range(n_evals - 1):
        cand = step(current, g, depth_cap, rng)
        value = evaluate(cand)
        if value > current_value + EPS:
            current, current_value = cand, value
    # the incumbent is always the earliest record holding the maximum value
    return SearchResult(current, current_value, n_evals * len(support), trace)


def trace_best_responded_set(trace: SearchTrace, support: Sequence | None = None) -> list[int]:
    """Indices of distinct traced candidates beaten by at least one support strategy.

    A support strategy best-responds a candidate when it scores +1 against it,
    i.e. the candidate's recorded utility is -1. Repeated programs are
    reported once, at their first occurrence.
    """
    width = len(trace.probs)
    if support is not None and len(support) != width:
        raise ValueError(f"trace has {width} opponents, support has {len(support)}")
    seen: set[str] = set()
    out = []
    for idx, rec in enumerate(trace.records):
        if len(rec.utilities) != width:
            raise ValueError(f"record {idx} has {len(rec.utilities)} utilities, expected {width}")
        if -1 in rec.utilities:
            key = render(rec.program)
            if key not in seen:
                seen.add(key)
                out.append(idx)
    return out
