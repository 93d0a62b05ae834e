from __future__ import annotations

import pytest

from metastrat import games
from metastrat.games import GameSpec, default_grammar
from metastrat.grammar import load_grammar, parse_program

GUARDED_TEXT = """\
# branching DSL: a command, or a guarded command
S -> C | if B then C
C -> c1 | c2
B -> b1 | b2
"""


@pytest.fixture
def guarded():
    return load_grammar(GUARDED_TEXT)


@pytest.fixture
def pr5():
    return GameSpec.poachers_rangers(5)


def pr_program(spec: GameSpec, player: int, targets):
    op = spec.instruction(player)
    return parse_program(" ".join(f"{op}[{t}]" for t in targets), default_grammar(spec, player))


@pytest.fixture
def play_counter(monkeypatch):
    """Counts every game evaluation by wrapping the single utility primitive."""
    calls = {"n": 0}
    original = games.utility

    def counted(spec, a, b):
        calls["n"] += 1
        return original(spec, a, b)

    monkeypatch.setattr(games, "utility", counted)
    return calls


ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
