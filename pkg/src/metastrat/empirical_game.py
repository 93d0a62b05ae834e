"""The empirical game: strategy lists per player, payoff table, meta-strategies."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import games as _games
from .games import GameSpec
from .grammar import Program, render

PROB_TOL = 1e-9


@dataclass(frozen=True)
class StrategyHandle:
    player: int
    index: int
    program: Program


@dataclass
class PayoffTable:
    """Row strategies belong to player 0, columns to player 1.

    Entries are player 0's utility. Strategies are only ever appended.
    """

    spec: GameSpec
    strategies: tuple[list[Program], list[Program]] = field(default_factory=lambda: ([], []))
    _rows: list[list[int]] = field(default_factory=list, repr=False)
    plays: int = 0  # total game plays performed filling this table

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.strategies[0]), len(self.strategies[1])

    def size(self, player: int) -> int:
        return len(self.strategies[player])

    def matrix(self) -> np.ndarray:
        m, n = self.shape
        if m == 0 or n == 0:
            return np.zeros((m, n))
        return np.array(self._rows, dtype=float)

    def entry(self, row: int, col: int) -> int:
        return self._rows[row][col]

    def utility_of(self, player: int, own: int, other: int) -> int:
        """Utility for ``player`` when its strategy ``own`` meets ``other``."""
        if player == 0:
            return self._rows[own][other]
        return -self._rows[other][own]

    def program(self, player: int, index: int) -> Program:
        return self.strategies[player][index]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + [render(p) for p in self.strategies[1]])
        for prog, row in zip(self.strategies[0], self._rows):
            w.writerow([render(prog)] + row)
        return buf.getvalue()


def add_strategy(table: PayoffTable, player: int, prog: Program, spec: GameSpec | None = None) -> tuple[StrategyHandle, int]:
    """Append ``prog`` for ``player`` and fill its row/column.

    Each opposing strategy is played exactly once; returns the games played.
    """
    spec = spec if spec is not None else table.spec
    others = table.strategies[1 - player]
    if player == 0:
        table._rows.append([_games.utility(spec, prog, opp) for opp in others])
    else:
        for row, opp in zip(table._rows, others):
            row.append(_games.utility(spec, opp, prog))
    table.strategies[player].append(prog)
    games = len(others)
    table.plays += games
    return StrategyHandle(player, len(table.strategies[player]) - 1, prog), games


def last_strategy(table: PayoffTable, player: int) -> StrategyHandle:
    progs = table.strategies[player]
    if not progs:
        raise IndexError(f"player {player} has no strategies")
    return StrategyHandle(player, len(progs) - 1, progs[-1])


@dataclass(frozen=True)
class MetaStrategy:
    player: int
    probs: tuple[float, ...]

    def __post_init__(self):
        if any(p < 0 for p in self.probs):
            raise ValueError("negative probability in meta-strategy")
        if abs(sum(self.probs) - 1.0) > PROB_TOL:
            raise ValueError(f"meta-strategy sums to {sum(self.probs)}")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.probs) if p > 0)

    def opponents(self, table: PayoffTable) -> list[tuple[Program, float]]:
        """(program, probability) pairs over the support, in insertion order."""
        return [(table.program(self.player, i), self.probs[i]) for i in self.support]

    @classmethod
    def from_weights(cls, player: int, weights: Iterable[float]) -> MetaStrategy:
        w = np.asarray(list(weights), dtype=float)
        w[w < PROB_TOL] = 0.0
        return cls(player, tuple(float(x) for x in w / w.sum()))


def uniform_meta(table: PayoffTable | int, player: int, support: Iterable[int]) -> MetaStrategy:
    """Uniform distribution over ``support``; ``table`` may be a strategy count."""
    n = table if isinstance(table, int) else table.size(player)
    chosen = sorted(set(support))
    if not chosen:
        raise ValueError("support must be non-empty")
    if chosen[0] < 0 or chosen[-1] >= n:
        raise IndexError(f"support {chosen} out of range for {n} strategies")
    p = 1.0 / len(chosen)
    picked = set(chosen)
    return MetaStrategy(player, tuple(p if i in picked else 0.0 for i in range(n)))
