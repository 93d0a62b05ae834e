"""Programmatic PSRO with IBR, FP, DO and Local Learner (2L) meta-strategies.

The driver alternates players. On each turn the responding player ``k`` gets a
meta-strategy over the opponent's strategies, hill-climbs from its own last
strategy towards a best response, and appends the result to the empirical
game. All game plays are charged to one global budget.

2L keeps an explicit support per player. A new strategy always joins its
owner's support. After a search against the opponent's support, opponents
that were not needed to beat any traced candidate (per a greedy set cover)
are dropped from that support. Before that, the search result is checked
against every opponent strategy in the empirical game; if one beats it and
is outside the support, it is restored and the search is repeated.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import games as _games
from .empirical_game import MetaStrategy, PayoffTable, add_strategy, last_strategy, uniform_meta
from .equilibrium import solve_zero_sum
from .games import GameKind, GameSpec
from .grammar import DEFAULT_DEPTH_CAP, DEFAULT_NODE_CAP, Grammar, Program, render, sample_program
from .search import Neighbor, SearchResult, SearchTrace, hill_climb, trace_best_responded_set

log = logging.getLogger(__name__)

DEFAULT_GAMES_PER_SEARCH = 10_000


class LearnerKind(str, enum.Enum):
    IBR = "IBR"
    FP = "FP"
    DO = "DO"
    TWO_L = "2L"

    @classmethod
    def parse(cls, name: str | LearnerKind) -> LearnerKind:
        if isinstance(name, LearnerKind):
            return name
        key = str(name).strip().upper()
        aliases = {"TWOL": "2L", "LOCAL": "2L", "TWO_L": "2L"}
        return cls(aliases.get(key, key))


@dataclass
class IterationLog:
    iteration: int
    player: int
    learner: str
    support_before: int
    support_after: int
    games: int
    searches: int
    added: str
    metric: float | None

    FIELDS = ("iteration", "player", "learner", "support_before", "support_after", "games", "searches", "added", "metric")

    def row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class PpsroState:
    table: PayoffTable
    supports: list[list[int]] = field(default_factory=lambda: [[], []])  # used by 2L
    games_played: int = 0
    iteration: int = 0
    log: list[IterationLog] = field(default_factory=list)

    def charge(self, games: int) -> None:
        self.games_played += games

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(IterationLog.FIELDS)
        for entry in self.log:
            w.writerow(entry.row())
        return buf.getvalue()


@dataclass(frozen=True)
class CoverInstance:
    universe: frozenset[int]
    sets: tuple[frozenset[int], ...]  # aligned with the support, insertion order

    def __post_init__(self):
        covered = frozenset().union(*self.sets) if self.sets else frozenset()
        missing = self.universe - covered
        if missing:
            raise ValueError(f"elements {sorted(missing)} are not covered by any set")


def greedy_cover(inst: CoverInstance) -> list[int]:
    """Greedy set cover; ties go to the lowest set position."""
    covered: set[int] = set()
    chosen: list[int] = []
    while covered != inst.universe:
        gains = [len((s & inst.universe) - covered) for s in inst.sets]
        best = max(range(len(gains)), key=lambda j: (gains[j], -j))
        if gains[best] == 0:
            raise ValueError("universe cannot be covered")
        chosen.append(best)
        covered |= inst.sets[best] & inst.universe
    return sorted(chosen)


def cover_instance(trace: SearchTrace) -> CoverInstance:
    """Universe = distinct traced candidates beaten by some support strategy."""
    universe = trace_best_responded_set(trace)
    width = len(trace.probs)
    sets = tuple(
        frozenset(c for c in universe if trace.records[c].utilities[j] == -1) for j in range(width)
    )
    return CoverInstance(frozenset(universe), sets)


def meta_for(kind: LearnerKind | str, state: PpsroState, player: int) -> MetaStrategy:
    """Meta-strategy over ``player``'s strategies for the opponent to respond to."""
    kind = LearnerKind.parse(kind)
    table = state.table
    n = table.size(player)
    if n == 0:
        raise ValueError(f"player {player} has no strategies")
    if kind is LearnerKind.IBR:
        return uniform_meta(n, player, [n - 1])
    if kind is LearnerKind.FP:
        return uniform_meta(n, player, range(n))
    if kind is LearnerKind.DO:
        eq = solve_zero_sum(table.matrix())
        return MetaStrategy.from_weights(player, eq.row if player == 0 else eq.col)
    return uniform_meta(n, player, state.supports[player])


def prune_redundant(state: PpsroState, player: int, trace: SearchTrace) -> MetaStrategy:
    """Drop support strategies of ``player`` that the trace shows to be redundant.

    ``trace`` must come from a search against the current support of
    ``player``, in the same order. With no beaten candidates the support is
    kept as is.
    """
    support = state.supports[player]
    if len(trace.probs) != len(support):
        raise ValueError("trace is not aligned with the current support")
    inst = cover_instance(trace)
    if inst.universe:
        helpful = greedy_cover(inst)
        state.supports[player] = [support[j] for j in helpful]
    return uniform_meta(state.table, player, state.supports[player])


@dataclass
class PpsroConfig:
    games_per_search: int = DEFAULT_GAMES_PER_SEARCH
    depth_cap: int = DEFAULT_DEPTH_CAP
    node_cap: int = DEFAULT_NODE_CAP
    return_mode: str = "last"  # last | mixed | equilibrium


@dataclass
class RunResult:
    finals: tuple[Program, Program]
    state: PpsroState
    curve: list[tuple[int, float | None]]  # (games played, metric) per new measured strategy
    return_mode: str = "last"

    def solution(self, player: int, mode: str | None = None) -> list[tuple[Program, float]]:
        """The returned strategy as (program, probability) pairs."""
        mode = mode or self.return_mode
        table = self.state.table
        if mode == "last":
            return [(self.finals[player], 1.0)]
        if mode == "mixed":
            meta = uniform_meta(table, player, range(table.size(player)))
        elif mode == "equilibrium":
            eq = solve_zero_sum(table.matrix())
            meta = MetaStrategy.from_weights(player, eq.row if player == 0 else eq.col)
        else:
            raise ValueError(f"unknown return mode {mode!r}")
        return meta.opponents(table)


def measured_player(spec: GameSpec) -> int:
    return spec.rangers if spec.kind is GameKind.POACHERS_RANGERS else 0


def default_metric(spec: GameSpec) -> Callable[[Program], float] | None:
    if spec.kind is GameKind.BLOTTO:
        return None
    player = measured_player(spec)
    return lambda prog: _games.performance(spec, prog, player)


class _Driver:
    def __init__(self, spec, grammars, kind, budget, rng, cfg, neighbor, metric, on_search=None):
        self.spec = spec
        self.grammars = grammars
        self.kind = kind
        self.budget = budget
        self.rng = rng
        self.cfg = cfg
        self.neighbor = neighbor
        self.metric = metric
        self.on_search = on_search
        self.measured = measured_player(spec)
        self.state = PpsroState(PayoffTable(spec))
        self.curve: list[tuple[int, float | None]] = []

    def remaining(self) -> int:
        return self.budget - self.state.games_played

    def add(self, player: int, prog: Program) -> None:
        _, games = add_strategy(self.state.table, player, prog, self.spec)
        self.state.charge(games)
        self.state.supports[player].append(self.state.table.size(player) - 1)
        if player == self.measured:
            self.curve.append((self.state.games_played, self._metric(prog)))

    def _metric(self, prog: Program) -> float | None:
        return self.metric(prog) if self.metric is not None else None

    def search(self, player: int, meta: MetaStrategy, start: Program, fill_cost: int) -> SearchResult | None:
        games = min(self.cfg.games_per_search, self.remaining() - fill_cost)
        if games < len(meta.support):
            return None
        result = hill_climb(
            self.spec,
            self.grammars[player],
            start,
            meta.opponents(self.state.table),
            games,
            self.rng,
            player=player,
            depth_cap=self.cfg.depth_cap,
            node_cap=self.cfg.node_cap,
            neighbor=self.neighbor,
        )
        self.state.charge(result.games)
        if self.on_search is not None:
            self.on_search(self.state.iteration, player, result)
        return result

    def enhance(self, k: int, result: SearchResult, fill_cost: int) -> tuple[SearchResult, int]:
        """Re-search while an empirical-game strategy outside the support beats the result."""
        opp = 1 - k
        state, table = self.state, self.state.table
        extra = 0
        while len(state.supports[opp]) < table.size(opp):
            check_cost = table.size(opp)
            if self.remaining() < check_cost + fill_cost:
                break
            beaters = [
                j for j in range(table.size(opp))
                if _games.utility_for(self.spec, k, result.program, table.program(opp, j)) == -1
            ]
            state.charge(check_cost)
            missing = [j for j in beaters if j not in state.supports[opp]]
            if not missing:
                break
            state.supports[opp] = sorted(state.supports[opp] + [missing[0]])
            meta = uniform_meta(table, opp, state.supports[opp])
            again = self.search(k, meta, result.program, fill_cost)
            if again is None:
                break
            result = again
            extra += 1
        return result, extra

    def half_iteration(self, k: int) -> bool:
        """One turn for player ``k``; False once the budget cannot pay for it."""
        opp = 1 - k
        state, table = self.state, self.state.table
        meta = meta_for(self.kind, state, opp)
        support_before = len(meta.support)
        fill_cost = table.size(opp)
        spent_before = state.games_played
        result = self.search(k, meta, last_strategy(table, k).program, fill_cost)
        if result is None:
            return False
        searches = 1
        support_after = support_before
        if self.kind is LearnerKind.TWO_L:
            result, extra = self.enhance(k, result, fill_cost)
            searches += extra
            support_after = len(prune_redundant(state, opp, result.trace).support)
        self.add(k, result.program)
        state.log.append(
            IterationLog(
                iteration=state.iteration,
                player=k,
                learner=self.kind.value,
                support_before=support_before,
                support_after=support_after,
                games=state.games_played - spent_before,
                searches=searches,
                added=render(result.program),
                metric=self._metric(result.program) if k == self.measured else None,
            )
        )
        return True

    def run(self, initial: Sequence[Program] | None) -> None:
        if self.budget < 1:
            raise ValueError("budget must cover at least the initial game")
        if initial is None:
            initial = [sample_program(self.grammars[p], self.cfg.depth_cap, self.rng) for p in (0, 1)]
        self.add(0, initial[0])
        self.add(1, initial[1])
        while True:
            for k in (0, 1):
                if not self.half_iteration(k):
                    return
            self.state.iteration += 1


def ppsro_run(
    spec: GameSpec,
    grammars: Sequence[Grammar] | None,
    kind: LearnerKind | str,
    budget: int,
    seed: int | random.Random = 0,
    config: PpsroConfig | None = None,
    *,
    initial: Sequence[Program] | None = None,
    neighbor: Neighbor | None = None,
    metric: Callable[[Program], float] | None = None,
    on_search: Callable[[int, int, SearchResult], None] | None = None,
) -> RunResult:
    """Run PPSRO until ``budget`` games are spent.

    ``grammars`` defaults to the game's instruction-list grammars. Both
    players start from a random program unless ``initial`` is given. The
    returned finals are the last strategy added for each player.
    ``on_search(iteration, player, result)`` sees every search, re-searches
    included.
    """
    cfg = config or PpsroConfig()
    kind = LearnerKind.parse(kind)
    if grammars is None:
        grammars = (_games.default_grammar(spec, 0), _games.default_grammar(spec, 1))
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    driver = _Driver(spec, tuple(grammars), kind, budget, rng, cfg, neighbor, metric or default_metric(spec), on_search)
    driver.run(initial)
    table = driver.state.table
    finals = (last_strategy(table, 0).program, last_strategy(table, 1).program)
    log.debug("%s run finished: %d games, table %s", kind.value, driver.state.games_played, table.shape)
    return RunResult(finals, driver.state, driver.curve, cfg.return_mode)


def enhancement_check(
    state: PpsroState,
    new_best: Program,
    k: int,
    spec: GameSpec,
    grammar: Grammar,
    budget: int,
    rng: random.Random,
    config: PpsroConfig | None = None,
    neighbor: Neighbor | None = None,
) -> tuple[Program, int]:
    """Standalone form of the 2L re-search loop for an existing state.

    ``budget`` is the absolute games limit for ``state``. Returns the accepted
    program and the number of extra searches run.
    """
    cfg = config or PpsroConfig()
    driver = _Driver(spec, (grammar, grammar), LearnerKind.TWO_L, budget, rng, cfg, neighbor, None)
    driver.state = state
    result, extra = driver.enhance(k, SearchResult(new_best, 0.0, 0, SearchTrace(probs=())), 0)
    return result.program, extra
