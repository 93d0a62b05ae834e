"""Command-line entry point: ``metastrat {synth,curves,tournament,selfcheck}``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 when
a selfcheck fixture fails.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import selfcheck
from .games import GameSpec
from .grammar import GrammarError, ProgramError, load_grammar, render
from .harness import ConfigError, ExperimentConfig, TournamentConfig, read_json, round_robin, run_learning_curves
from .learners import LearnerKind, PpsroConfig, ppsro_run

EXIT_OK, EXIT_CONFIG, EXIT_FIXTURE = 0, 1, 2

log = logging.getLogger("metastrat")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _game(args) -> GameSpec:
    if args.game == "pr":
        return GameSpec.poachers_rangers(args.n, rangers=args.rangers)
    if args.game == "cm":
        return GameSpec.climbing_monkeys(args.n)
    return GameSpec.blotto(args.n, args.troops)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="metastrat", description="Programmatic PSRO with IBR, FP, DO and 2L meta-strategies.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="one learning run; prints the final programs")
    s.add_argument("--game", choices=("pr", "cm", "blotto"), default="pr")
    s.add_argument("--n", type=int, default=5, help="gates, branches or battlefields")
    s.add_argument("--troops", type=int, default=7)
    s.add_argument("--rangers", type=int, choices=(0, 1), default=0)
    s.add_argument("--learner", default="2L", help="IBR, FP, DO or 2L")
    s.add_argument("--budget", type=int, default=20_000)
    s.add_argument("--games-per-search", type=int, default=2_000)
    s.add_argument("--depth-cap", type=int, default=12)
    s.add_argument("--grammar", nargs=2, metavar=("G0", "G1"), help="grammar files for players 0 and 1")
    s.add_argument("--trace", action="store_true", help="dump every search trace as CSV under --out")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="directory for log, payoff table and traces")

    c = sub.add_parser("curves", help="learning curves from an experiment config")
    c.add_argument("--config", required=True)
    c.add_argument("--seed", type=int, help="first seed; overrides the config")
    c.add_argument("--out", help="output directory; overrides the config")

    t = sub.add_parser("tournament", help="round robin between programs listed in a config")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, help="accepted for symmetry; matches are deterministic")
    t.add_argument("--out", help="directory for tournament.csv")

    k = sub.add_parser("selfcheck", help="run the worked-example fixtures")
    k.add_argument("--seed", type=int, help="unused; fixtures are fixed")
    k.add_argument("--out", help="unused")
    return p


def cmd_synth(args) -> int:
    spec = _game(args)
    if args.grammar:
        try:
            grammars = tuple(load_grammar(Path(f).read_text(encoding="utf-8")) for f in args.grammar)
        except OSError as err:
            raise ConfigError(str(err)) from None
    else:
        grammars = None
    traces = []

    def keep(iteration, player, result):
        traces.append((iteration, player, result.trace))

    cfg = PpsroConfig(games_per_search=args.games_per_search, depth_cap=args.depth_cap)
    run = ppsro_run(spec, grammars, args.learner, args.budget, args.seed, cfg, on_search=keep if args.trace else None)
    print(f"player0: {render(run.finals[0])}")
    print(f"player1: {render(run.finals[1])}")
    print(f"games played: {run.state.games_played}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "log.csv").write_text(run.state.log_csv(), encoding="utf-8")
        (out / "table.csv").write_text(run.state.table.to_csv(), encoding="utf-8")
        for n, (iteration, player, trace) in enumerate(traces):
            (out / f"trace_{n:04d}_it{iteration}_p{player}.csv").write_text(trace.to_csv(), encoding="utf-8")
    elif args.trace:
        for iteration, player, trace in traces:
            print(f"# iteration {iteration} player {player}")
            sys.stdout.write(trace.to_csv())
    return EXIT_OK


def cmd_curves(args) -> int:
    cfg = ExperimentConfig.load(args.config, seed=args.seed)
    report = run_learning_curves(cfg)
    paths = report.write(args.out or cfg.out_dir)
    for learner, t, mean, std in report.summary():
        if t == cfg.schedule[-1]:
            print(f"{learner:>3} @ {t}: {mean:.3f} +/- {std:.3f}")
    print(f"wrote {paths['curves']} {paths['summary']} {paths['chart']}")
    return EXIT_OK


def cmd_tournament(args) -> int:
    tc = TournamentConfig.from_dict(read_json(args.config))
    try:
        res = round_robin(tc.entrants, tc.game, tc.repetitions, tc.swap_roles)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    text = res.to_csv()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "tournament.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    for name, mean, std in res.method_stats():
        print(f"# {name}: {mean:.3f} +/- {std:.3f}")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    results = selfcheck.run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FIXTURE


COMMANDS = {"synth": cmd_synth, "curves": cmd_curves, "tournament": cmd_tournament, "selfcheck": cmd_selfcheck}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exit_:  # --help
        return EXIT_OK if exit_.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            LearnerKind.parse(args.learner)
        return COMMANDS[args.command](args)
    except (ConfigError, GrammarError, ProgramError, ValueError) as err:
        print(f"metastrat: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
