"""Experiment plumbing: learning curves, round-robin tournaments, significance tests."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import jsonschema
from scipy import stats

from . import games as _games
from .games import GameKind, GameSpec, default_grammar
from .grammar import DEFAULT_DEPTH_CAP, DEFAULT_NODE_CAP, Program, parse_program, render, sample_program
from .learners import LearnerKind, PpsroConfig, measured_player, ppsro_run

THREADS_ENV = "METASTRAT_THREADS"


class ConfigError(ValueError):
    pass


def config_schema(name: str = "experiment") -> dict:
    text = resources.files("metastrat").joinpath(f"data/{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _validate(raw: Any, name: str) -> None:
    try:
        jsonschema.validate(raw, config_schema(name))
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {err.message}") from None


def _game_from(raw: dict) -> GameSpec:
    try:
        return GameSpec(raw["kind"], n=raw.get("n", 5), troops=raw.get("troops", 7), rangers=raw.get("rangers", 0))
    except ValueError as err:
        raise ConfigError(str(err)) from None


def read_json(path: str | os.PathLike) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from None


@dataclass(frozen=True)
class ExperimentConfig:
    game: GameSpec
    learners: tuple[LearnerKind, ...]
    budget: int
    schedule: tuple[int, ...]
    seeds: tuple[int, ...]
    games_per_search: int = 10_000
    depth_cap: int = DEFAULT_DEPTH_CAP
    node_cap: int = DEFAULT_NODE_CAP
    pool_size: int = 20
    pool_seed: int = 20240
    pool_depth_cap: int = DEFAULT_DEPTH_CAP
    out_dir: str = "out"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one run is required")
        if not self.learners:
            raise ConfigError("no learners given")
        if any(b <= a for a, b in zip(self.schedule, self.schedule[1:])):
            raise ConfigError(f"schedule must be strictly increasing: {list(self.schedule)}")
        if not self.schedule or self.schedule[0] < 1:
            raise ConfigError("schedule points must be >= 1")
        if self.budget < self.schedule[-1]:
            raise ConfigError(f"budget {self.budget} is below the last schedule point {self.schedule[-1]}")

    @property
    def runs(self) -> int:
        return len(self.seeds)

    def ppsro_config(self) -> PpsroConfig:
        return PpsroConfig(games_per_search=self.games_per_search, depth_cap=self.depth_cap, node_cap=self.node_cap)

    @classmethod
    def from_dict(cls, raw: dict[str, Any], seed: int | None = None) -> ExperimentConfig:
        _validate(raw, "experiment")
        spec = _game_from(raw["game"])
        if "seeds" in raw:
            seeds = tuple(raw["seeds"])
        else:
            first = raw.get("seed", 0) if seed is None else seed
            seeds = tuple(first + r for r in range(raw.get("runs", 50)))
        pool = raw.get("reference_pool", {})
        return cls(
            game=spec,
            learners=tuple(LearnerKind.parse(k) for k in raw["learners"]),
            budget=raw["budget"],
            schedule=tuple(raw["schedule"]),
            seeds=seeds,
            games_per_search=raw.get("games_per_search", 10_000),
            depth_cap=raw.get("depth_cap", DEFAULT_DEPTH_CAP),
            node_cap=raw.get("node_cap", DEFAULT_NODE_CAP),
            pool_size=pool.get("size", 20),
            pool_seed=pool.get("seed", 20240),
            pool_depth_cap=pool.get("depth_cap", DEFAULT_DEPTH_CAP),
            out_dir=raw.get("out_dir", "out"),
        )

    @classmethod
    def load(cls, path: str | os.PathLike, seed: int | None = None) -> ExperimentConfig:
        return cls.from_dict(read_json(path), seed)


def reference_pool(spec: GameSpec, size: int = 20, seed: int = 20240, depth_cap: int = DEFAULT_DEPTH_CAP) -> list[Program]:
    """Fixed random opponents (player 1 role) used to score Blotto programs."""
    rng = random.Random(seed)
    g = default_grammar(spec, 1)
    return [sample_program(g, depth_cap, rng) for _ in range(size)]


def winning_rate(wins: int, draws: int, matches: int) -> float:
    if matches <= 0:
        raise ValueError("no matches played")
    return (wins + 0.5 * draws) / matches


def pool_rate(spec: GameSpec, prog: Program, pool: Sequence[Program]) -> float:
    """Winning rate of ``prog`` as player 0 against each pool member once."""
    results = [_games.play(spec, prog, opp).utility for opp in pool]
    return winning_rate(results.count(1), results.count(0), len(results))


def snapshot(points: Sequence[tuple[int, Program]], t: int) -> Program | None:
    """The newest program added with at most ``t`` games played."""
    current = None
    for games_played, prog in points:
        if games_played > t:
            break
        current = prog
    return current


@dataclass
class CurveRun:
    learner: str
    seed: int
    values: list[float | None]  # one per schedule point
    programs: list[str]  # rendered snapshot program per schedule point
    games_played: int


def _metric_fn(cfg: ExperimentConfig):
    spec = cfg.game
    if spec.kind is GameKind.BLOTTO:
        pool = reference_pool(spec, cfg.pool_size, cfg.pool_seed, cfg.pool_depth_cap)
        return lambda prog: pool_rate(spec, prog, pool)
    player = measured_player(spec)
    return lambda prog: float(_games.performance(spec, prog, player))


def run_one(cfg: ExperimentConfig, learner: LearnerKind, seed: int) -> CurveRun:
    spec = cfg.game
    result = ppsro_run(spec, None, learner, cfg.budget, seed, cfg.ppsro_config(), metric=lambda _p: None)
    measured = measured_player(spec)
    # curve entries line up one-to-one with the measured player's strategies
    added = [(gp, prog) for (gp, _), prog in zip(result.curve, result.state.table.strategies[measured])]
    metric = _metric_fn(cfg)
    values, programs = [], []
    for t in cfg.schedule:
        prog = snapshot(added, t)
        values.append(None if prog is None else metric(prog))
        programs.append("" if prog is None else render(prog))
    return CurveRun(learner.value, seed, values, programs, result.state.games_played)


def _run_job(args) -> CurveRun:
    return run_one(*args)


def worker_count(jobs: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    limit = os.cpu_count() or 1
    if raw:
        try:
            limit = max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, min(limit, jobs))


@dataclass
class CurveReport:
    config: ExperimentConfig
    runs: list[CurveRun]

    def values(self, learner: LearnerKind | str, point: int = -1) -> list[float]:
        name = LearnerKind.parse(learner).value
        return [r.values[point] for r in self.runs if r.learner == name and r.values[point] is not None]

    def summary(self) -> list[tuple[str, int, float, float]]:
        rows = []
        for learner in self.config.learners:
            for i, t in enumerate(self.config.schedule):
                vals = self.values(learner, i)
                mean = statistics.fmean(vals) if vals else math.nan
                std = statistics.stdev(vals) if len(vals) > 1 else 0.0
                rows.append((learner.value, t, mean, std))
        return rows

    def curves_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["learner", "seed", "games_played", "metric"])
        for run in self.runs:
            for t, v in zip(self.config.schedule, run.values):
                w.writerow([run.learner, run.seed, t, "" if v is None else repr(v)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["learner", "games_played", "mean", "std"])
        for learner, t, mean, std in self.summary():
            w.writerow([learner, t, repr(mean), repr(std)])
        return buf.getvalue()

    def programs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["learner", "seed", "games_played", "program"])
        for run in self.runs:
            for t, text in zip(self.config.schedule, run.programs):
                w.writerow([run.learner, run.seed, t, text])
        return buf.getvalue()

    def write(self, out_dir: str | os.PathLike) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "curves": out / "curves.csv",
            "summary": out / "summary.csv",
            "programs": out / "programs.csv",
            "chart": out / "curves.svg",
        }
        paths["curves"].write_text(self.curves_csv(), encoding="utf-8")
        paths["summary"].write_text(self.summary_csv(), encoding="utf-8")
        paths["programs"].write_text(self.programs_csv(), encoding="utf-8")
        paths["chart"].write_text(svg_chart(self.summary(), _metric_label(self.config.game)), encoding="utf-8")
        return paths


def _metric_label(spec: GameSpec) -> str:
    return {
        GameKind.POACHERS_RANGERS: "gates defended",
        GameKind.CLIMBING_MONKEYS: "branches climbed",
        GameKind.BLOTTO: "winning rate vs reference pool",
    }[spec.kind]


def run_learning_curves(cfg: ExperimentConfig) -> CurveReport:
    """Run every (learner, seed) pair and snapshot the metric at each schedule point.

    Runs execute in a process pool sized by ``METASTRAT_THREADS`` (default:
    CPU count). Results are ordered by learner then seed regardless of
    completion order, so output files are reproducible.
    """
    jobs = [(cfg, learner, seed) for learner in cfg.learners for seed in cfg.seeds]
    workers = worker_count(len(jobs))
    if workers == 1:
        runs = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_job, jobs, chunksize=1))
    return CurveReport(cfg, runs)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_chart(summary: Sequence[tuple[str, int, float, float]], ylabel: str, width: int = 640, height: int = 400) -> str:
    """Mean curves per learner on a log-scaled games axis."""
    series: dict[str, list[tuple[int, float]]] = {}
    for learner, t, mean, _ in summary:
        if not math.isnan(mean):
            series.setdefault(learner, []).append((t, mean))
    xs = [t for pts in series.values() for t, _ in pts] or [1, 10]
    ys = [m for pts in series.values() for _, m in pts] or [0.0, 1.0]
    left, right, top, bottom = 60, 110, 20, 50
    lx0, lx1 = math.log10(min(xs)), math.log10(max(xs))
    if lx1 == lx0:
        lx0, lx1 = lx0 - 0.5, lx1 + 0.5
    y0, y1 = min(0.0, min(ys)), max(ys)
    if y1 == y0:
        y1 = y0 + 1.0

    def px(t: float) -> float:
        return left + (math.log10(t) - lx0) / (lx1 - lx0) * (width - left - right)

    def py(v: float) -> float:
        return height - bottom - (v - y0) / (y1 - y0) * (height - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
    ]
    for e in range(math.ceil(lx0), math.floor(lx1) + 1):
        x = px(10**e)
        out.append(f'<line x1="{x:.1f}" y1="{height - bottom}" x2="{x:.1f}" y2="{height - bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{height - bottom + 18}" font-size="11" text-anchor="middle">1e{e}</text>')
    for k in range(5):
        v = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{left - 6}" y="{py(v) + 4:.1f}" font-size="11" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{(left + width - right) / 2}" y="{height - 12}" font-size="12" text-anchor="middle">games played</text>')
    out.append(
        f'<text x="14" y="{(top + height - bottom) / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {(top + height - bottom) / 2})">{ylabel}</text>'
    )
    for i, (learner, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        path = " ".join(f"{px(t):.1f},{py(m):.1f}" for t, m in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        ly = top + 16 * (i + 1)
        out.append(f'<line x1="{width - right + 10}" y1="{ly}" x2="{width - right + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - right + 35}" y="{ly + 4}" font-size="12">{learner}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Entrant:
    """A tournament participant: one program per role (the same one for symmetric games)."""

    name: str
    first: Program
    second: Program | None = None

    def as_player(self, player: int) -> Program:
        if player == 1 and self.second is not None:
            return self.second
        return self.first


@dataclass
class TournamentResult:
    names: list[str]
    wins: list[list[int]]
    draws: list[list[int]]
    losses: list[list[int]]
    matches: list[list[int]] = field(default_factory=list)

    def rate(self, a: int, b: int) -> float:
        return winning_rate(self.wins[a][b], self.draws[a][b], self.matches[a][b])

    def method_stats(self) -> list[tuple[str, float, float]]:
        """(name, mean rate vs others, sample std of those rates)."""
        out = []
        for a, name in enumerate(self.names):
            rates = [self.rate(a, b) for b in range(len(self.names)) if b != a]
            std = statistics.stdev(rates) if len(rates) > 1 else 0.0
            out.append((name, statistics.fmean(rates), std))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "wins", "draws", "losses", "rate"])
        for a, row in enumerate(self.names):
            for b, col in enumerate(self.names):
                if a != b:
                    w.writerow([row, col, self.wins[a][b], self.draws[a][b], self.losses[a][b], repr(self.rate(a, b))])
        return buf.getvalue()


@dataclass(frozen=True)
class TournamentConfig:
    game: GameSpec
    entrants: tuple[Entrant, ...]
    repetitions: int = 10
    swap_roles: bool = True

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> TournamentConfig:
        _validate(raw, "tournament")
        spec = _game_from(raw["game"])
        grammars = (default_grammar(spec, 0), default_grammar(spec, 1))
        entrants = []
        for e in raw["entrants"]:
            try:
                first = parse_program(e["first"], grammars[0])
                second = parse_program(e["second"], grammars[1]) if "second" in e else None
            except ValueError as err:
                raise ConfigError(f"entrant {e['name']!r}: {err}") from None
            entrants.append(Entrant(e["name"], first, second))
        return cls(spec, tuple(entrants), raw.get("repetitions", 10), raw.get("swap_roles", True))


def round_robin(entrants: Sequence[Entrant], spec: GameSpec, repetitions: int = 10, swap_roles: bool = True) -> TournamentResult:
    """Every pair plays ``repetitions`` matches.

    With ``swap_roles`` the matches are split evenly between the two role
    assignments; otherwise the earlier entrant always takes player 0.
    """
    if len(entrants) < 2:
        raise ValueError("a tournament needs at least two entrants")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if swap_roles and repetitions % 2:
        raise ValueError("repetitions must be even when roles are swapped")
    n = len(entrants)
    wins = [[0] * n for _ in range(n)]
    draws = [[0] * n for _ in range(n)]
    losses = [[0] * n for _ in range(n)]
    matches = [[0] * n for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            for rep in range(repetitions):
                first, second = (a, b) if not swap_roles or rep % 2 == 0 else (b, a)
                u = _games.play(spec, entrants[first].as_player(0), entrants[second].as_player(1)).utility
                for me, other, val in ((first, second, u), (second, first, -u)):
                    matches[me][other] += 1
                    if val > 0:
                        wins[me][other] += 1
                    elif val < 0:
                        losses[me][other] += 1
                    else:
                        draws[me][other] += 1
    return TournamentResult([e.name for e in entrants], wins, draws, losses, matches)


def welch_t(sample_a: Sequence[float], sample_b: Sequence[float]) -> tuple[float, float]:
    """Welch's unequal-variance t statistic and two-sided p-value."""
    a, b = [float(x) for x in sample_a], [float(x) for x in sample_b]
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    va, vb = statistics.variance(a), statistics.variance(b)
    if va == 0 and vb == 0:
        raise ValueError("both samples have zero variance")
    sa, sb = va / len(a), vb / len(b)
    t = (statistics.fmean(a) - statistics.fmean(b)) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    return t, float(2.0 * stats.t.sf(abs(t), df))
