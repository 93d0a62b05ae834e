from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from metastrat.equilibrium import check_equilibrium, solve_zero_sum, value_vs_mix

GATES5 = [[-1, -1, -1], [1, -1, -1], [1, 1, -1]]


def maximin_by_vertices(a: np.ndarray) -> float:
    """Game value by enumerating vertices of the row player's maximin LP.

    Unknowns are the row mix x (m entries) and v. A vertex fixes m of the
    constraints {x_r = 0} and {(x^T A)_c = v} tight, plus sum(x) = 1.
    """
    m, n = a.shape
    best = -np.inf
    for k in range(1, n + 1):
        for cols in itertools.combinations(range(n), k):
            zero_count = m - k
            if zero_count < 0:
                continue
            for zeros in itertools.combinations(range(m), zero_count):
                rows = []
                rhs = []
                for c in cols:
                    rows.append(list(a[:, c]) + [-1.0])
                    rhs.append(0.0)
                for r in zeros:
                    e = [0.0] * (m + 1)
                    e[r] = 1.0
                    rows.append(e)
                    rhs.append(0.0)
                rows.append([1.0] * m + [0.0])
                rhs.append(1.0)
                mat = np.array(rows)
                if abs(np.linalg.det(mat)) < 1e-12:
                    continue
                sol = np.linalg.solve(mat, np.array(rhs))
                x = sol[:m]
                if np.any(x < -1e-12):
                    continue
                best = max(best, float(np.min(x @ a)))
    return best


def test_five_gate_game():
    eq = solve_zero_sum(GATES5)
    assert eq.col == pytest.approx([0.0, 0.0, 1.0], abs=1e-9)
    assert eq.value == pytest.approx(-1.0, abs=1e-9)
    assert check_equilibrium(GATES5, eq)


def test_rock_paper_scissors():
    rps = [[0, -1, 1], [1, 0, -1], [-1, 1, 0]]
    eq = solve_zero_sum(rps)
    assert eq.row == pytest.approx([1 / 3] * 3, abs=1e-9)
    assert eq.col == pytest.approx([1 / 3] * 3, abs=1e-9)
    assert eq.value == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("u", [-1.0, 0.0, 0.5, 3.0])
def test_one_by_one(u):
    eq = solve_zero_sum([[u]])
    assert eq.value == pytest.approx(u)
    assert list(eq.row) == [1.0] and list(eq.col) == [1.0]


def test_value_vs_mix():
    assert list(value_vs_mix([[1, -1], [-1, 1]], row_mix=[0.5, 0.5])) == [0.0, 0.0]
    assert list(value_vs_mix(GATES5, row_mix=[1, 0, 0])) == [-1, -1, -1]
    with pytest.raises(ValueError):
        value_vs_mix(GATES5, row_mix=[1, 0])
    with pytest.raises(ValueError):
        value_vs_mix(GATES5)


def test_value_vs_mix_dot_product():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = rng.normal(size=(3, 5))
        x, y = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(5))
        assert np.allclose(value_vs_mix(a, row_mix=x), [sum(x[i] * a[i, j] for i in range(3)) for j in range(5)])
        assert np.allclose(value_vs_mix(a, col_mix=y), [sum(y[j] * a[i, j] for j in range(5)) for i in range(3)])


def test_vertex_oracle_agrees_on_random_4x4():
    rng = np.random.default_rng(7)
    for _ in range(100):
        a = rng.integers(-1, 2, size=(4, 4)).astype(float)
        eq = solve_zero_sum(a)
        assert eq.value == pytest.approx(maximin_by_vertices(a), abs=1e-7)
        assert check_equilibrium(a, eq, 1e-9)


def test_deterministic():
    a = np.ones((3, 3))
    first = solve_zero_sum(a)
    for _ in range(5):
        again = solve_zero_sum(a)
        assert np.array_equal(again.row, first.row) and np.array_equal(again.col, first.col)


def test_invalid_matrix():
    with pytest.raises(ValueError):
        solve_zero_sum(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        solve_zero_sum([[np.inf]])


small = st.integers(1, 6).flatmap(
    lambda m: st.integers(1, 6).flatmap(lambda n: arrays(np.float64, (m, n), elements=st.integers(-3, 3).map(float)))
)


@settings(max_examples=150, deadline=None)
@given(a=small)
def test_duality_and_transpose(a):
    eq = solve_zero_sum(a)
    assert check_equilibrium(a, eq, 1e-9)
    assert np.min(value_vs_mix(a, row_mix=eq.row)) == pytest.approx(eq.value, abs=1e-9)
    assert np.max(value_vs_mix(a, col_mix=eq.col)) == pytest.approx(eq.value, abs=1e-9)
    assert solve_zero_sum(-a.T).value == pytest.approx(-eq.value, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(a=small, slack=st.integers(1, 3))
def test_dominated_column_keeps_value(a, slack):
    # a column strictly worse for the column player than column 0
    extra = a[:, :1] + slack
    eq = solve_zero_sum(a)
    assert solve_zero_sum(np.hstack([a, extra])).value == pytest.approx(eq.value, abs=1e-9)
