from __future__ import annotations

import csv
import io
import random

import numpy as np
import pytest

from conftest import pr_program
from metastrat import games
from metastrat.empirical_game import MetaStrategy, PayoffTable, add_strategy, last_strategy, uniform_meta
from metastrat.games import GameSpec, default_grammar
from metastrat.grammar import render, sample_program

RANGERS = ([2], [1, 2, 4], [1, 2, 3])
POACHERS = ([1], [1, 2, 3], [1, 2, 5])


def five_gate_table(spec):
    t = PayoffTable(spec)
    for d, a in zip(RANGERS, POACHERS):
        add_strategy(t, 0, pr_program(spec, 0, d))
        add_strategy(t, 1, pr_program(spec, 1, a))
    return t


def test_five_gate_matrix(pr5):
    t = five_gate_table(pr5)
    assert t.shape == (3, 3)
    assert t.matrix().tolist() == [[-1, -1, -1], [1, -1, -1], [1, 1, -1]]
    assert [t.entry(2, j) for j in range(3)] == [1, 1, -1]
    assert t.utility_of(1, 2, 0) == 1
    # 0 + 1 + 1 + 2 + 2 + 3 plays
    assert t.plays == 9


def test_first_addition_plays_nothing(pr5):
    t = PayoffTable(pr5)
    handle, n = add_strategy(t, 0, pr_program(pr5, 0, [1]))
    assert n == 0 and handle.index == 0 and t.shape == (1, 0)
    assert t.matrix().shape == (1, 0)


def test_replay_oracle(play_counter):
    spec = GameSpec.blotto(4, 5)
    grammars = [default_grammar(spec, 0), default_grammar(spec, 1)]
    rng = random.Random(11)
    t = PayoffTable(spec)
    expected_games = 0
    for _ in range(100):
        player = rng.randrange(2)
        expected_games += t.size(1 - player)
        add_strategy(t, player, sample_program(grammars[player], 8, rng))
    assert play_counter["n"] == expected_games == t.plays
    rows, cols = t.strategies
    oracle = np.array([[games.play(spec, r, c).utility for c in cols] for r in rows], dtype=float)
    assert np.array_equal(t.matrix(), oracle)


def test_strategies_append_only(pr5):
    t = five_gate_table(pr5)
    before = [render(p) for p in t.strategies[0]]
    add_strategy(t, 0, pr_program(pr5, 0, [5]))
    assert [render(p) for p in t.strategies[0]][:3] == before


def test_uniform_meta():
    for n in range(1, 51):
        m = uniform_meta(n, 0, range(n))
        assert len(m.probs) == n
        assert all(p == pytest.approx(1 / n) for p in m.probs)
        assert sum(m.probs) == pytest.approx(1.0, abs=1e-12)
    m = uniform_meta(4, 1, [3, 1])
    assert m.probs == (0.0, 0.5, 0.0, 0.5) and m.support == (1, 3)
    with pytest.raises(ValueError):
        uniform_meta(3, 0, [])
    with pytest.raises(IndexError):
        uniform_meta(3, 0, [3])


def test_meta_validation():
    with pytest.raises(ValueError):
        MetaStrategy(0, (0.5, 0.4))
    with pytest.raises(ValueError):
        MetaStrategy(0, (1.5, -0.5))
    assert MetaStrategy.from_weights(0, [2, 0, 2]).probs == (0.5, 0.0, 0.5)


def test_meta_opponents(pr5):
    t = five_gate_table(pr5)
    pairs = uniform_meta(t, 1, [0, 2]).opponents(t)
    assert [(render(p), w) for p, w in pairs] == [("attack[1]", 0.5), ("attack[1] attack[2] attack[5]", 0.5)]


def test_last_strategy_shadow(pr5):
    t = PayoffTable(pr5)
    shadow = {0: [], 1: []}
    rng = random.Random(0)
    with pytest.raises(IndexError):
        last_strategy(t, 0)
    for _ in range(40):
        p = rng.randrange(2)
        prog = sample_program(default_grammar(pr5, p), 6, rng)
        add_strategy(t, p, prog)
        shadow[p].append(prog)
        h = last_strategy(t, p)
        assert h.program is shadow[p][-1] and h.index == len(shadow[p]) - 1


def test_csv_export(pr5):
    rows = list(csv.reader(io.StringIO(five_gate_table(pr5).to_csv())))
    assert rows[0] == ["", "attack[1]", "attack[1] attack[2] attack[3]", "attack[1] attack[2] attack[5]"]
    assert rows[3] == ["defend[1] defend[2] defend[3]", "1", "1", "-1"]
