"""Small worked examples with known answers, run by ``metastrat selfcheck``."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .empirical_game import PayoffTable, add_strategy
from .equilibrium import solve_zero_sum
from .games import GameSpec, default_grammar
from .grammar import Program, parse_program, render
from .learners import PpsroConfig, PpsroState, ppsro_run, prune_redundant
from .search import SearchTrace, TraceRecord


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _prog(spec: GameSpec, player: int, targets) -> Program:
    op = spec.instruction(player)
    return parse_program(" ".join(f"{op}[{t}]" for t in targets), default_grammar(spec, player))


def check_five_gate_equilibrium() -> CheckResult:
    """Rangers {2}, {1,2,4}, {1,2,3} against Poachers {1}, {1,2,3}, {1,2,5} on five gates."""
    spec = GameSpec.poachers_rangers(5)
    table = PayoffTable(spec)
    for d, a in zip(([2], [1, 2, 4], [1, 2, 3]), ([1], [1, 2, 3], [1, 2, 5])):
        add_strategy(table, 0, _prog(spec, 0, d))
        add_strategy(table, 1, _prog(spec, 1, a))
    eq = solve_zero_sum(table.matrix())
    ok = np.allclose(eq.col, [0, 0, 1], atol=1e-9) and abs(eq.value + 1) <= 1e-9
    return CheckResult("five-gate-equilibrium", ok, f"col={np.round(eq.col, 12).tolist()} value={eq.value:.12g}")


def check_prune() -> CheckResult:
    """defend[2] is redundant next to defend[1,2] once attack[1] and attack[2] were evaluated."""
    spec = GameSpec.poachers_rangers(3)
    table = PayoffTable(spec)
    add_strategy(table, 0, _prog(spec, 0, [2]))
    add_strategy(table, 0, _prog(spec, 0, [1, 2]))
    state = PpsroState(table, supports=[[0, 1], []])
    records = []
    for gate in (1, 2):
        cand = _prog(spec, 1, [gate])
        utils = tuple(-int(gate in d) * 2 + 1 for d in ({2}, {1, 2}))
        records.append(TraceRecord(cand, utils, sum(utils) / 2))
    prune_redundant(state, 0, SearchTrace((0.5, 0.5), records))
    kept = [render(table.program(0, j)) for j in state.supports[0]]
    return CheckResult("prune-redundant", kept == ["defend[1] defend[2]"], f"support={kept}")


def check_ibr_cycle() -> CheckResult:
    """With a neighbour that flips the single gate, IBR returns to where it started."""
    spec = GameSpec.poachers_rangers(2)
    flip = {"defend[1]": "defend[2]", "defend[2]": "defend[1]", "attack[1]": "attack[2]", "attack[2]": "attack[1]"}

    def neighbor(prog, grammar, depth_cap, rng):
        return parse_program(flip[render(prog)], grammar)

    initial = (_prog(spec, 0, [2]), _prog(spec, 1, [1]))
    run = ppsro_run(spec, None, "IBR", 12, random.Random(0), PpsroConfig(games_per_search=2), initial=initial, neighbor=neighbor)
    seq = [render(p) for p in initial] + [e.added for e in run.state.log]
    want = ["defend[2]", "attack[1]", "defend[1]", "attack[2]", "defend[2]"]
    return CheckResult("ibr-cycle", seq == want, " -> ".join(seq))


CHECKS: tuple[Callable[[], CheckResult], ...] = (check_five_gate_equilibrium, check_prune, check_ibr_cycle)


def run_all() -> list[CheckResult]:
    out = []
    for check in CHECKS:
        try:
            out.append(check())
        except Exception as err:  # a crash is a failed check, not a CLI crash
            out.append(CheckResult(check.__name__, False, f"{type(err).__name__}: {err}"))
    return out
