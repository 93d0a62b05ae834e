"""Exact-enough equilibria of small two-player zero-sum matrix games."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

EPS = 1e-9
_PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class Equilibrium:
    row: np.ndarray
    col: np.ndarray
    value: float

    def support(self, side: str) -> tuple[int, ...]:
        mix = self.row if side == "row" else self.col
        return tuple(int(i) for i in np.flatnonzero(mix > EPS))


def _as_matrix(g) -> np.ndarray:
    a = np.asarray(g, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _simplex_max(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximise c.x s.t. a x <= b, x >= 0 with b >= 0, Bland's rule.

    Returns the primal solution and the dual prices of the constraints.
    """
    m, n = a.shape
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -c
    basis = list(range(n, n + m))
    while True:
        reduced = tab[m, :-1]
        entering = next((j for j in range(n + m) if reduced[j] < -_PIVOT_TOL), None)
        if entering is None:
            break
        column = tab[:m, entering]
        best_ratio = None
        leaving = None
        for r in range(m):
            if column[r] > _PIVOT_TOL:
                ratio = tab[r, -1] / column[r]
                if (
                    best_ratio is None
                    or ratio < best_ratio - _PIVOT_TOL
                    or (abs(ratio - best_ratio) <= _PIVOT_TOL and basis[r] < basis[leaving])
                ):
                    best_ratio, leaving = ratio, r
        if leaving is None:
            raise ArithmeticError("unbounded LP; impossible for a positive payoff matrix")
        tab[leaving] /= tab[leaving, entering]
        for r in range(m + 1):
            if r != leaving and tab[r, entering] != 0.0:
                tab[r] -= tab[r, entering] * tab[leaving]
        basis[leaving] = entering
    x = np.zeros(n)
    for r, var in enumerate(basis):
        if var < n:
            x[var] = tab[r, -1]
    duals = tab[m, n : n + m].copy()
    return x, duals


def solve_zero_sum(g) -> Equilibrium:
    """Maximin strategies and value for the row player of payoff matrix ``g``.

    The matrix is shifted to be strictly positive and the column player's LP
    ``max 1.y s.t. A y <= 1`` is solved by tableau simplex with Bland's
    anti-cycling rule, which makes the result a deterministic function of the
    matrix. The row strategy is read off the dual prices.
    """
    a = _as_matrix(g)
    shift = 1.0 - a.min()
    ap = a + shift
    m, n = ap.shape
    y, duals = _simplex_max(ap, np.ones(m), np.ones(n))
    total = y.sum()
    col = y / total
    row = np.clip(duals, 0.0, None)
    row = row / row.sum()
    value = 1.0 / total - shift
    col[col < _PIVOT_TOL] = 0.0
    row[row < _PIVOT_TOL] = 0.0
    return Equilibrium(row=row / row.sum(), col=col / col.sum(), value=float(value))


def value_vs_mix(g, row_mix: Sequence[float] | None = None, col_mix: Sequence[float] | None = None) -> np.ndarray:
    """Payoffs (to the row player) of each opposing pure strategy against a mix.

    With ``row_mix`` this is one entry per column; with ``col_mix`` one entry
    per row.
    """
    a = _as_matrix(g)
    if (row_mix is None) == (col_mix is None):
        raise ValueError("pass exactly one of row_mix, col_mix")
    if row_mix is not None:
        mix = np.asarray(row_mix, dtype=float)
        if mix.shape != (a.shape[0],):
            raise ValueError(f"row mix has length {mix.size}, matrix has {a.shape[0]} rows")
        return mix @ a
    mix = np.asarray(col_mix, dtype=float)
    if mix.shape != (a.shape[1],):
        raise ValueError(f"column mix has length {mix.size}, matrix has {a.shape[1]} columns")
    return a @ mix


def check_equilibrium(g, eq: Equilibrium, tol: float = EPS) -> bool:
    a = _as_matrix(g)
    for mix in (eq.row, eq.col):
        if np.any(mix < -tol) or abs(mix.sum() - 1.0) > tol:
            return False
    rows = value_vs_mix(a, col_mix=eq.col)
    cols = value_vs_mix(a, row_mix=eq.row)
    return bool(np.all(rows <= eq.value + tol) and np.all(cols >= eq.value - tol))
