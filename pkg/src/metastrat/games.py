"""Deterministic one-shot zero-sum games played by instruction-list programs.

Three games are provided:

* Poachers & Rangers: rangers win iff every gate the poachers attack is defended.
* Climbing Monkeys: ``climb[k]`` moves a monkey from branch k-1 to k; the
  higher monkey wins, equal heights draw.
* Blotto: each ``add[b]`` puts one troop on battlefield b until the troop
  budget is spent; more battlefields won wins.

Players are indexed 0 (``i``, the row player) and 1 (``-i``).
"""
from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass
from typing import Sequence

from .grammar import Grammar, Program

_INSTR = re.compile(r"^(defend|attack|climb|add)\[(\d+)\]$")


class InterpretationError(ValueError):
    """A program uses instructions that do not belong to the game/role."""


class GameKind(str, enum.Enum):
    POACHERS_RANGERS = "poachers_rangers"
    CLIMBING_MONKEYS = "climbing_monkeys"
    BLOTTO = "blotto"


@dataclass(frozen=True)
class GameSpec:
    kind: GameKind
    n: int = 5
    troops: int = 7
    rangers: int = 0  # which player index plays the Rangers role in P&R

    def __post_init__(self):
        object.__setattr__(self, "kind", GameKind(self.kind))
        if self.n < 1:
            raise ValueError("size parameter n must be >= 1")
        if self.troops < 1:
            raise ValueError("troop budget must be >= 1")
        if self.rangers not in (0, 1):
            raise ValueError("rangers must be player 0 or 1")

    @classmethod
    def poachers_rangers(cls, gates: int, rangers: int = 0) -> GameSpec:
        return cls(GameKind.POACHERS_RANGERS, n=gates, rangers=rangers)

    @classmethod
    def climbing_monkeys(cls, branches: int) -> GameSpec:
        return cls(GameKind.CLIMBING_MONKEYS, n=branches)

    @classmethod
    def blotto(cls, battlefields: int = 5, troops: int = 7) -> GameSpec:
        return cls(GameKind.BLOTTO, n=battlefields, troops=troops)

    def instruction(self, player: int) -> str:
        if self.kind is GameKind.POACHERS_RANGERS:
            return "defend" if player == self.rangers else "attack"
        if self.kind is GameKind.CLIMBING_MONKEYS:
            return "climb"
        return "add"

    @property
    def symmetric(self) -> bool:
        return self.kind is not GameKind.POACHERS_RANGERS


@dataclass(frozen=True)
class MatchResult:
    utility: int  # for player 0
    summary: tuple  # per-player interpreted actions

    @property
    def utility_minus_i(self) -> int:
        return -self.utility


def default_grammar(spec: GameSpec, player: int = 0) -> Grammar:
    """``S -> I | I S`` with one ``I`` alternative per gate/branch/battlefield."""
    op = spec.instruction(player)
    return Grammar.from_rules(
        {"S": [["I"], ["I", "S"]], "I": [[f"{op}[{k}]"] for k in range(1, spec.n + 1)]},
        start="S",
    )


@functools.lru_cache(maxsize=4096)
def _decode(leaf: str) -> tuple[str, int] | None:
    m = _INSTR.match(leaf)
    return None if m is None else (m.group(1), int(m.group(2)))


def instructions(spec: GameSpec, program: Program, player: int) -> tuple[int, ...]:
    """Decode a program's leaves into 1-based targets, validating the role."""
    key = ("instr", spec.kind, spec.n, spec.instruction(player))
    memo = program._memo
    cached = memo.get(key)
    if cached is not None:
        return cached
    want = spec.instruction(player)
    out = []
    for leaf in program.leaves:
        decoded = _decode(leaf)
        if decoded is None or decoded[0] != want:
            raise InterpretationError(f"{leaf!r} is not a {want} instruction")
        k = decoded[1]
        if not 1 <= k <= spec.n:
            raise InterpretationError(f"{leaf!r} out of range 1..{spec.n}")
        out.append(k)
    cached = tuple(out)
    memo[key] = cached
    return cached


def gate_set(spec: GameSpec, program: Program, player: int) -> frozenset[int]:
    key = ("gates", spec.kind, spec.n, player == spec.rangers)
    cached = program._memo.get(key)
    if cached is None:
        cached = frozenset(instructions(spec, program, player))
        program._memo[key] = cached
    return cached


def climb_height(spec: GameSpec, program: Program, player: int = 0) -> int:
    key = ("height", spec.n)
    cached = program._memo.get(key)
    if cached is None:
        cached = 0
        for k in instructions(spec, program, player):
            if k == cached + 1:
                cached = k
        program._memo[key] = cached
    return cached


def allocation(spec: GameSpec, program: Program, player: int = 0) -> tuple[int, ...]:
    key = ("alloc", spec.n, spec.troops)
    cached = program._memo.get(key)
    if cached is None:
        troops = [0] * spec.n
        for b in instructions(spec, program, player)[: spec.troops]:
            troops[b - 1] += 1
        cached = tuple(troops)
        program._memo[key] = cached
    return cached


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def utility(spec: GameSpec, prog_i: Program, prog_minus_i: Program) -> int:
    """Utility for player 0; the hot path used by search."""
    kind = spec.kind
    if kind is GameKind.POACHERS_RANGERS:
        if spec.rangers == 0:
            defended, attacked = gate_set(spec, prog_i, 0), gate_set(spec, prog_minus_i, 1)
            return 1 if attacked <= defended else -1
        attacked, defended = gate_set(spec, prog_i, 0), gate_set(spec, prog_minus_i, 1)
        return -1 if attacked <= defended else 1
    if kind is GameKind.CLIMBING_MONKEYS:
        return _sign(climb_height(spec, prog_i, 0) - climb_height(spec, prog_minus_i, 1))
    a, b = allocation(spec, prog_i, 0), allocation(spec, prog_minus_i, 1)
    won = sum(1 for x, y in zip(a, b) if x > y) - sum(1 for x, y in zip(a, b) if y > x)
    return _sign(won)


def play(spec: GameSpec, prog_i: Program, prog_minus_i: Program) -> MatchResult:
    u = utility(spec, prog_i, prog_minus_i)
    if spec.kind is GameKind.POACHERS_RANGERS:
        summary = (tuple(sorted(gate_set(spec, prog_i, 0))), tuple(sorted(gate_set(spec, prog_minus_i, 1))))
    elif spec.kind is GameKind.CLIMBING_MONKEYS:
        summary = (climb_height(spec, prog_i, 0), climb_height(spec, prog_minus_i, 1))
    else:
        summary = (allocation(spec, prog_i, 0), allocation(spec, prog_minus_i, 1))
    return MatchResult(u, summary)


def utility_for(spec: GameSpec, player: int, prog: Program, opponent: Program) -> int:
    """Utility of ``prog`` playing as ``player`` against ``opponent``."""
    if player == 0:
        return utility(spec, prog, opponent)
    return -utility(spec, opponent, prog)


def expected_utility(
    spec: GameSpec,
    prog: Program,
    opponents: Sequence[tuple[Program, float]],
    player: int = 0,
) -> tuple[float, int]:
    """Probability-weighted utility of ``prog`` against a mixed opponent.

    Every opponent in the list is played exactly once; the second element of
    the result is that game count, to be charged by the caller.
    """
    if not opponents:
        raise ValueError("opponent list is empty")
    total_p = 0.0
    value = 0.0
    for opp, p in opponents:
        if p <= 0:
            raise ValueError("opponent probabilities must be positive")
        total_p += p
        value += p * utility_for(spec, player, prog, opp)
    if abs(total_p - 1.0) > 1e-9:
        raise ValueError(f"opponent probabilities sum to {total_p}, not 1")
    return value, len(opponents)


def performance(spec: GameSpec, prog: Program, player: int = 0) -> int:
    """Domain metric: distinct gates defended (P&R) or final height (CM)."""
    if spec.kind is GameKind.POACHERS_RANGERS:
        if player != spec.rangers:
            raise ValueError("P&R performance is measured on the Rangers program")
        return len(gate_set(spec, prog, player))
    if spec.kind is GameKind.CLIMBING_MONKEYS:
        return climb_height(spec, prog, player)
    raise ValueError("Blotto has no intrinsic metric; use a reference pool")
