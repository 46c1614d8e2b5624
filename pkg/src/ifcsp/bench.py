"""Batch experiment runner: sweeps, aggregation, CSV emission.

A grid sweeps one generator parameter (i, d, or t), runs every strategy
on the same generated instances (seed derived from base seed, sweep
value, and trial index), and aggregates per (point, strategy):
elicited and effort as percentages of the initially missing cells, wall
time, and the mean normalized quality trace over elicitation events.

Aggregation uses compensated summation in a fixed order, so results.csv
and quality_trace.csv are byte-identical across runs with the same grid
and base seed.  Wall-clock columns are written as 0.0 unless timing
output is explicitly enabled, to keep the files reproducible.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ContractViolation
from .generate import GenParams, Kind, generate
from .oracle import SimulatedOracle
from .rng import mix
from .solve import BASELINE, SolveResult, run_strategy, verify_nos

SWEEPABLE = ("i", "d", "t")


@dataclass(frozen=True)
class ExperimentGrid:
    sweep: str
    values: tuple[int, ...]
    strategies: tuple[str, ...]
    n: int = 10
    m: int = 5
    d: int = 50
    t: int = 10
    i: int = 30
    kind: Kind = Kind.FUZZY
    trials: int = 100
    base_seed: int = 0
    baseline_k: int = 1

    def __post_init__(self):
        if self.sweep not in SWEEPABLE:
            raise ContractViolation(f"sweep must be one of {SWEEPABLE}")
        if self.trials < 1:
            raise ContractViolation("trials must be >= 1")
        if not self.values:
            raise ContractViolation("need at least one sweep value")
        for v in self.values:
            if not 0 <= v <= 100:
                raise ContractViolation(f"sweep value {v} outside 0..100")

    def params_at(self, value: int, trial: int) -> GenParams:
        fields = {"n": self.n, "m": self.m, "d": self.d, "t": self.t, "i": self.i}
        fields[self.sweep] = value
        return GenParams(
            seed=mix(self.base_seed, value, trial), kind=self.kind, **fields
        )

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentGrid":
        return cls(
            sweep=d["sweep"],
            values=tuple(int(v) for v in d["values"]),
            strategies=tuple(d["strategies"]),
            n=int(d.get("n", 10)),
            m=int(d.get("m", 5)),
            d=int(d.get("d", 50)),
            t=int(d.get("t", 10)),
            i=int(d.get("i", 30)),
            kind=Kind(d.get("kind", "fuzzy")),
            trials=int(d.get("trials", 100)),
            base_seed=int(d.get("base_seed", 0)),
            baseline_k=int(d.get("baseline_k", 1)),
        )


@dataclass
class RunRecord:
    """One solve inside a grid."""

    value: int
    strategy: str
    trial: int
    seed: int
    pref: float
    elicited: int
    effort: int
    missing: int
    wall_ms: float
    quality: list[float]  # normalized trace, one entry per elicitation event
    max_pass_nodes: int
    passes: int


@dataclass
class PointSummary:
    sweep_var: str
    value: int
    strategy: str
    mean_elicited_pct: float
    sd_elicited_pct: float
    mean_effort_pct: float
    sd_effort_pct: float
    mean_ms: float
    trials: int
    mean_quality: list[float] = field(default_factory=list)


def normalize_quality(values: list[float], final_pref: float) -> list[float]:
    """Each bound divided by the final preference; all 1.0 when it is 0."""
    if final_pref == 0.0:
        return [1.0] * len(values)
    return [v / final_pref for v in values]


def trace_steps(trace: list[tuple[int, float]], length: int) -> list[float]:
    """Expand (event index, bound) pairs to one value per event 0..length-1,
    holding the last bound between events."""
    out = []
    cur = trace[0][1] if trace else 0.0
    k = 0
    for e in range(length):
        while k < len(trace) and trace[k][0] <= e:
            cur = trace[k][1]
            k += 1
        out.append(cur)
    return out


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


def _mean_sd(xs: list[float]) -> tuple[float, float]:
    n = len(xs)
    mean = math.fsum(xs) / n
    var = math.fsum((x - mean) ** 2 for x in xs) / n
    return mean, math.sqrt(var)


def run_one(grid: ExperimentGrid, value: int, trial: int) -> list[RunRecord]:
    """Generate one instance and run every strategy of the grid on it."""
    import time

    params = grid.params_at(value, trial)
    inst = generate(params)
    hard = grid.kind is Kind.HARD
    records = []
    for strategy in grid.strategies:
        oracle = SimulatedOracle(inst.visible, inst.truth)
        t0 = time.perf_counter()
        res = run_strategy(
            strategy, inst.visible, oracle, hard=hard,
            baseline_k=grid.baseline_k, baseline_seed=mix(params.seed, 0xBA5E),
        )
        wall = (time.perf_counter() - t0) * 1e3
        events = res.stats.queries
        steps = trace_steps(res.stats.quality_trace, events + 1)
        records.append(
            RunRecord(
                value=value,
                strategy=strategy,
                trial=trial,
                seed=params.seed,
                pref=res.pref,
                elicited=res.stats.elicited,
                effort=res.stats.effort,
                missing=res.stats.missing_initial,
                wall_ms=wall,
                quality=normalize_quality(steps, res.pref),
                max_pass_nodes=res.stats.max_pass_nodes,
                passes=res.stats.passes,
            )
        )
    return records


def _run_one_star(args) -> list[RunRecord]:
    return run_one(*args)


def run_grid(
    grid: ExperimentGrid, workers: int = 1
) -> tuple[list[PointSummary], list[RunRecord]]:
    """All runs of the grid; summaries aggregated in a fixed order."""
    jobs = [(grid, v, t) for v in grid.values for t in range(grid.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_one_star, jobs, chunksize=8))
    else:
        chunks = [run_one(*job) for job in jobs]
    records = [r for chunk in chunks for r in chunk]

    summaries = []
    for value in grid.values:
        for strategy in grid.strategies:
            runs = [
                r for r in records if r.value == value and r.strategy == strategy
            ]
            el, sd_el = _mean_sd([_pct(r.elicited, r.missing) for r in runs])
            ef, sd_ef = _mean_sd([_pct(r.effort, r.missing) for r in runs])
            ms, _ = _mean_sd([r.wall_ms for r in runs])
            width = max(len(r.quality) for r in runs)
            mean_q = [
                math.fsum(
                    r.quality[e] if e < len(r.quality) else r.quality[-1]
                    for r in runs
                )
                / len(runs)
                for e in range(width)
            ]
            summaries.append(
                PointSummary(
                    sweep_var=grid.sweep,
                    value=value,
                    strategy=strategy,
                    mean_elicited_pct=el,
                    sd_elicited_pct=sd_el,
                    mean_effort_pct=ef,
                    sd_effort_pct=sd_ef,
                    mean_ms=ms,
                    trials=len(runs),
                    mean_quality=mean_q,
                )
            )
    return summaries, records


def verify_records(grid: ExperimentGrid, records: list[RunRecord], guard: int = 10**6):
    """Re-solve and exhaustively verify every record (small instances only)."""
    for r in records:
        params = grid.params_at(r.value, r.trial)
        inst = generate(params)
        oracle = SimulatedOracle(inst.visible, inst.truth)
        res = run_strategy(
            r.strategy, inst.visible, oracle, hard=grid.kind is Kind.HARD,
            baseline_k=grid.baseline_k, baseline_seed=mix(params.seed, 0xBA5E),
        )
        if not verify_nos(res.problem, res.sol, res.pref, guard=guard):
            raise AssertionError(f"verification failed: {r.strategy} seed={r.seed}")


def write_results_csv(
    path: str | Path, summaries: list[PointSummary], timing: bool = False
) -> None:
    lines = [
        "sweep_var,value,strategy,mean_elicited_pct,sd_elicited_pct,"
        "mean_effort_pct,sd_effort_pct,mean_ms,trials"
    ]
    for s in summaries:
        ms = s.mean_ms if timing else 0.0
        lines.append(
            f"{s.sweep_var},{s.value},{s.strategy},{s.mean_elicited_pct!r},"
            f"{s.sd_elicited_pct!r},{s.mean_effort_pct!r},{s.sd_effort_pct!r},"
            f"{ms!r},{s.trials}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_traces_csv(path: str | Path, summaries: list[PointSummary]) -> None:
    lines = ["sweep_var,value,strategy,event_index,mean_quality"]
    for s in summaries:
        for e, q in enumerate(s.mean_quality):
            lines.append(f"{s.sweep_var},{s.value},{s.strategy},{e},{q!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_gnuplot_dat(path: str | Path, summaries: list[PointSummary]) -> None:
    """Per-strategy blocks of (value, elicited%, effort%) for gnuplot."""
    by_strategy: dict[str, list[PointSummary]] = {}
    for s in summaries:
        by_strategy.setdefault(s.strategy, []).append(s)
    lines = []
    for strategy in sorted(by_strategy):
        lines.append(f"# {strategy}")
        for s in sorted(by_strategy[strategy], key=lambda x: x.value):
            lines.append(
                f"{s.value} {s.mean_elicited_pct!r} {s.mean_effort_pct!r}"
            )
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
