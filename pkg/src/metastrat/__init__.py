"""Synthesis of programmatic strategies for two-player zero-sum games."""
from .games import GameKind, GameSpec, default_grammar, expected_utility, play
from .grammar import Grammar, Program, load_grammar, mutate, parse_program, render, sample_program
from .learners import LearnerKind, PpsroConfig, ppsro_run

__version__ = "0.1.0"

__all__ = [
    "GameKind",
    "GameSpec",
    "Grammar",
    "LearnerKind",
    "PpsroConfig",
    "Program",
    "default_grammar",
    "expected_utility",
    "load_grammar",
    "mutate",
    "parse_program",
    "play",
    "ppsro_run",
    "render",
    "sample_program",
]
