from __future__ import annotations

import itertools
import math
import random

import pytest

from conftest import pr_program
from metastrat.empirical_game import PayoffTable, add_strategy
from metastrat.games import GameSpec, default_grammar, performance
from metastrat.grammar import parse_program, render
from metastrat.learners import (
    CoverInstance,
    LearnerKind,
    PpsroConfig,
    PpsroState,
    enhancement_check,
    greedy_cover,
    meta_for,
    ppsro_run,
    prune_redundant,
)
from metastrat.search import SearchTrace, TraceRecord

LEARNERS = ["IBR", "FP", "DO", "2L"]


def scripted(mapping):
    """Neighbour function that follows a fixed text-to-text table."""

    def step(prog, grammar, depth_cap, rng):
        return parse_program(mapping.get(render(prog), render(prog)), grammar)

    return step


def five_gate_state(spec):
    t = PayoffTable(spec)
    for d, a in zip(([2], [1, 2, 4], [1, 2, 3]), ([1], [1, 2, 3], [1, 2, 5])):
        add_strategy(t, 0, pr_program(spec, 0, d))
        add_strategy(t, 1, pr_program(spec, 1, a))
    return PpsroState(t, supports=[[0, 1, 2], [1, 2]], games_played=t.plays)


def test_learner_parse():
    assert LearnerKind.parse("2l") is LearnerKind.TWO_L
    assert LearnerKind.parse("fp") is LearnerKind.FP
    with pytest.raises(ValueError):
        LearnerKind.parse("PSRO")


def test_meta_for_examples(pr5):
    state = five_gate_state(pr5)
    assert meta_for("IBR", state, 1).probs == (0.0, 0.0, 1.0)
    assert meta_for("FP", state, 1).probs == pytest.approx((1 / 3,) * 3)
    assert meta_for("DO", state, 1).probs == pytest.approx((0.0, 0.0, 1.0), abs=1e-9)
    assert meta_for("2L", state, 1).probs == (0.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        meta_for("FP", PpsroState(PayoffTable(pr5)), 0)


def _exhaustive(inst):
    n = len(inst.sets)
    for size in range(1, n + 1):
        hits = [c for c in itertools.combinations(range(n), size) if frozenset().union(*(inst.sets[j] for j in c)) >= inst.universe]
        if hits:
            return size, hits
    return 0, [()]


def test_greedy_cover_against_oracle():
    rng = random.Random(21)
    checked = 0
    for _ in range(200):
        universe = frozenset(range(rng.randint(1, 8)))
        width = rng.randint(1, 6)
        sets = [frozenset(e for e in universe if rng.random() < 0.4) for _ in range(width)]
        for e in universe:
            if not any(e in s for s in sets):
                j = rng.randrange(width)
                sets[j] = sets[j] | {e}
        inst = CoverInstance(universe, tuple(sets))
        chosen = greedy_cover(inst)
        assert chosen == sorted(set(chosen))
        assert frozenset().union(*(inst.sets[j] for j in chosen)) >= universe
        opt, optima = _exhaustive(inst)
        if len(optima) == 1:
            harmonic = sum(1 / k for k in range(1, len(universe) + 1))
            assert len(chosen) <= harmonic * opt + 1e-12
            checked += 1
    assert checked > 20


def test_greedy_cover_ties_lowest():
    inst = CoverInstance(frozenset({1, 2}), (frozenset({1}), frozenset({1, 2}), frozenset({1, 2})))
    assert greedy_cover(inst) == [1]
    assert greedy_cover(CoverInstance(frozenset(), (frozenset(),))) == []
    with pytest.raises(ValueError):
        CoverInstance(frozenset({3}), (frozenset({1}),))


def test_prune_redundant_defender():
    spec = GameSpec.poachers_rangers(3)
    t = PayoffTable(spec)
    add_strategy(t, 0, pr_program(spec, 0, [2]))
    add_strategy(t, 0, pr_program(spec, 0, [1, 2]))
    state = PpsroState(t, supports=[[0, 1], []])
    recs = [(pr_program(spec, 1, [1]), (1, -1)), (pr_program(spec, 1, [2]), (-1, -1)), (pr_program(spec, 1, [3]), (1, 1))]
    trace = SearchTrace((0.5, 0.5), [TraceRecord(p, u, sum(u) / 2) for p, u in recs])
    meta = prune_redundant(state, 0, trace)
    assert state.supports[0] == [1]
    assert meta.probs == (0.0, 1.0)


def test_prune_keeps_support_without_evidence():
    spec = GameSpec.poachers_rangers(3)
    t = PayoffTable(spec)
    add_strategy(t, 0, pr_program(spec, 0, [2]))
    add_strategy(t, 0, pr_program(spec, 0, [1]))
    state = PpsroState(t, supports=[[0, 1], []])
    trace = SearchTrace((0.5, 0.5), [TraceRecord(pr_program(spec, 1, [3]), (1, 1), 1.0)])
    prune_redundant(state, 0, trace)
    assert state.supports[0] == [0, 1]
    with pytest.raises(ValueError):
        prune_redundant(state, 0, SearchTrace((1.0,), []))


def test_enhancement_restores_beater():
    spec = GameSpec.poachers_rangers(3)
    t = PayoffTable(spec)
    add_strategy(t, 0, pr_program(spec, 0, [1]))
    add_strategy(t, 1, pr_program(spec, 1, [1]))
    add_strategy(t, 1, pr_program(spec, 1, [2]))
    state = PpsroState(t, supports=[[0], [1]], games_played=t.plays)
    step = scripted({"defend[2]": "defend[1] defend[2]"})
    prog, extra = enhancement_check(
        state, pr_program(spec, 0, [2]), 0, spec, default_grammar(spec, 0), state.games_played + 50,
        random.Random(0), PpsroConfig(games_per_search=4), neighbor=step,
    )
    assert render(prog) == "defend[1] defend[2]"
    assert extra == 1
    assert state.supports[1] == [0, 1]
    # one check of two games and one search of four; the support is then full
    assert state.games_played == t.plays + 2 + 4


def test_enhancement_noop_when_nothing_missing():
    spec = GameSpec.poachers_rangers(3)
    t = PayoffTable(spec)
    add_strategy(t, 0, pr_program(spec, 0, [1]))
    add_strategy(t, 1, pr_program(spec, 1, [1]))
    add_strategy(t, 1, pr_program(spec, 1, [2]))
    state = PpsroState(t, supports=[[0], [1]], games_played=t.plays)
    best = pr_program(spec, 0, [1, 2])
    prog, extra = enhancement_check(state, best, 0, spec, default_grammar(spec, 0), 100, random.Random(0))
    assert prog is best and extra == 0 and state.supports[1] == [1]


def test_ibr_flip_cycle():
    spec = GameSpec.poachers_rangers(2)
    step = scripted({
        "defend[2]": "defend[1]", "defend[1]": "defend[2]",
        "attack[1]": "attack[2]", "attack[2]": "attack[1]",
    })
    initial = (pr_program(spec, 0, [2]), pr_program(spec, 1, [1]))
    run = ppsro_run(spec, None, "IBR", 12, 0, PpsroConfig(games_per_search=2), initial=initial, neighbor=step)
    order = ["defend[2]", "attack[1]"] + [e.added for e in run.state.log]
    assert order == ["defend[2]", "attack[1]", "defend[1]", "attack[2]", "defend[2]"]
    assert run.state.games_played == 12


def test_cm_single_branch_converges():
    spec = GameSpec.climbing_monkeys(1)
    for kind in LEARNERS:
        run = ppsro_run(spec, None, kind, 500, seed=3, config=PpsroConfig(games_per_search=20))
        assert performance(spec, run.finals[0]) == 1
        assert run.curve and all(m == 1 for _, m in run.curve)


@pytest.mark.parametrize("kind", LEARNERS)
def test_budget_conservation(kind, play_counter):
    rng = random.Random(LEARNERS.index(kind))
    for _ in range(20):
        spec = rng.choice([GameSpec.poachers_rangers(rng.randint(2, 6)), GameSpec.climbing_monkeys(rng.randint(2, 8)), GameSpec.blotto(3, 4)])
        budget = rng.randint(50, 1500)
        before = play_counter["n"]
        run = ppsro_run(spec, None, kind, budget, seed=rng.randrange(10**6), config=PpsroConfig(games_per_search=rng.randint(5, 150), depth_cap=10))
        assert run.state.games_played == play_counter["n"] - before
        assert run.state.games_played <= budget


def test_run_shape_and_log():
    spec = GameSpec.poachers_rangers(4)
    run = ppsro_run(spec, None, "2L", 3000, seed=1, config=PpsroConfig(games_per_search=200))
    state = run.state
    rows, cols = state.table.shape
    assert rows - cols in (0, 1)
    assert render(run.finals[0]) == render(state.table.strategies[0][-1])
    for entry in state.log:
        assert entry.support_after <= entry.support_before or entry.searches > 1
    # each player's newest strategy is always in its own support
    assert state.supports[1][-1] == cols - 1 or state.supports[0][-1] == rows - 1
    header = state.log_csv().splitlines()[0]
    assert header == "iteration,player,learner,support_before,support_after,games,searches,added,metric"
    assert [(p, 1.0) for p in [run.finals[0]]] == run.solution(0)
    mixed = run.solution(0, "mixed")
    assert math.isclose(sum(w for _, w in mixed), 1.0)
    assert math.isclose(sum(w for _, w in run.solution(1, "equilibrium")), 1.0)


def test_run_determinism():
    spec = GameSpec.blotto()
    a = ppsro_run(spec, None, "DO", 4000, seed=9, config=PpsroConfig(games_per_search=300))
    b = ppsro_run(spec, None, "DO", 4000, seed=9, config=PpsroConfig(games_per_search=300))
    assert a.state.log_csv() == b.state.log_csv()
    assert a.state.table.to_csv() == b.state.table.to_csv()
