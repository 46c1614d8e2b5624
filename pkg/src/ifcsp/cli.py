"""Command-line entry point: gen, solve, bench, verify, serve.

Exit codes: 0 success, 2 usage, 3 I/O or malformed input, 4 inconsistent
strategy triple, 5 verification failure.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from .errors import ContractViolation, InconsistentStrategy, SizeGuardExceeded
from .generate import GenParams, Kind, generate
from .jsonio import dumps_canonical, load_problem, problem_to_json, save_json
from .oracle import ScriptedOracle, SimulatedOracle
from .rng import mix
from .solve import (
    ALL_STRATEGIES,
    BASELINE,
    StrategyConfig,
    run_strategy,
    verify_nos,
)

EXIT_IO = 3
EXIT_STRATEGY = 4
EXIT_VERIFY = 5


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _out_dir(out) -> Path:
    path = Path(out or os.environ.get("IFCSP_OUT_DIR", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
def main():
    """Incomplete fuzzy constraint problems: generate, solve, benchmark, serve."""


@main.command()
@click.option("--n", default=10, show_default=True, help="variables")
@click.option("--m", default=5, show_default=True, help="domain cardinality")
@click.option("--d", default=50, show_default=True, help="density percent")
@click.option("--t", default=10, show_default=True, help="tightness percent")
@click.option("--i", default=30, show_default=True, help="incompleteness percent")
@click.option("--kind", type=click.Choice([k.value for k in Kind]), default="fuzzy",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, help="output directory (default $IFCSP_OUT_DIR or .)")
def gen(n, m, d, t, i, kind, seed, out):
    """Generate visible.json, truth.json, and meta.json."""
    try:
        params = GenParams(n=n, m=m, d=d, t=t, i=i, seed=seed, kind=Kind(kind))
        inst = generate(params)
    except ContractViolation as e:
        _fail(2, str(e))
    try:
        path = _out_dir(out)
        save_json(path / "visible.json", problem_to_json(inst.visible))
        save_json(path / "truth.json", problem_to_json(inst.truth))
        save_json(path / "meta.json", params.to_json())
    except OSError as e:
        _fail(EXIT_IO, str(e))
    click.echo(f"wrote visible.json truth.json meta.json in {path}")


def _resolve_strategy(strategy, who, what, when) -> str:
    if strategy:
        return strategy  # dotted form wins over the three flags
    if who and what and when:
        return f"{who}.{what}.{when}"
    raise click.UsageError("give --strategy or all of --who/--what/--when")


@main.command()
@click.option("--problem", "problem_path", required=True, type=click.Path())
@click.option("--truth", "truth_path", type=click.Path(), default=None,
              help="ground truth for the simulated oracle")
@click.option("--strategy", default=None, help=f"dotted name, e.g. {BASELINE}")
@click.option("--who", type=click.Choice(["dp", "dpi", "lu", "su"]), default=None)
@click.option("--what", type=click.Choice(["all", "worst"]), default=None)
@click.option("--when", type=click.Choice(["tree", "branch", "node"]), default=None)
@click.option("--hard", is_flag=True, help="treat as a hard instance (0/1 preferences)")
@click.option("--k", "baseline_k", default=1, show_default=True,
              help="cells revealed per baseline round")
@click.option("--seed", default=0, show_default=True, help="baseline reveal seed")
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="write the deterministic event log here")
@click.option("--transcript", "transcript_path", type=click.Path(), default=None,
              help="replay answers from a recorded transcript instead of --truth")
@click.option("--transcript-out", type=click.Path(), default=None,
              help="record the oracle transcript here")
@click.option("--out", type=click.Path(), default=None, help="report file (default stdout)")
def solve(problem_path, truth_path, strategy, who, what, when, hard, baseline_k,
          seed, trace_path, transcript_path, transcript_out, out):
    """Solve one instance and emit a JSON report."""
    name = _resolve_strategy(strategy, who, what, when)
    if name.strip().upper() != BASELINE:
        try:
            StrategyConfig.parse(name)
        except InconsistentStrategy as e:
            _fail(EXIT_STRATEGY, str(e))
    try:
        problem = load_problem(problem_path)
        if transcript_path:
            entries = json.loads(Path(transcript_path).read_text(encoding="utf-8"))
            oracle = ScriptedOracle(problem, [tuple(e) for e in entries])
        elif truth_path:
            truth = load_problem(truth_path)
            oracle = SimulatedOracle(problem, truth, record=transcript_out is not None)
        else:
            _fail(EXIT_IO, "need --truth or --transcript")
    except (OSError, json.JSONDecodeError, ContractViolation) as e:
        _fail(EXIT_IO, str(e))
    trace = [] if trace_path else None
    result = run_strategy(
        name, problem, oracle, hard=hard, baseline_k=baseline_k,
        baseline_seed=seed, trace=trace,
    )
    report = dumps_canonical(result.to_json())
    if trace_path:
        Path(trace_path).write_text("\n".join(trace) + "\n", encoding="utf-8")
    if transcript_out and oracle.transcript is not None:
        save_json(transcript_out, [list(e) for e in oracle.transcript])
    if out:
        Path(out).write_text(report + "\n", encoding="utf-8")
    else:
        click.echo(report)


@main.command()
@click.option("--grid-file", required=True, type=click.Path())
@click.option("--out-dir", default=None)
@click.option("--workers", default=1, show_default=True)
@click.option("--timing", is_flag=True,
              help="write measured wall time (breaks byte reproducibility)")
@click.option("--gnuplot", is_flag=True, help="also emit results.dat")
def bench(grid_file, out_dir, workers, timing, gnuplot):
    """Run an experiment grid; write results.csv and quality_trace.csv."""
    try:
        grid = bench_mod.ExperimentGrid.from_json(
            json.loads(Path(grid_file).read_text(encoding="utf-8"))
        )
    except (OSError, json.JSONDecodeError, KeyError, ContractViolation) as e:
        _fail(EXIT_IO, f"bad grid file: {e}")
    path = _out_dir(out_dir)
    summaries, _ = bench_mod.run_grid(grid, workers=workers)
    bench_mod.write_results_csv(path / "results.csv", summaries, timing=timing)
    bench_mod.write_traces_csv(path / "quality_trace.csv", summaries)
    if gnuplot:
        bench_mod.write_gnuplot_dat(path / "results.dat", summaries)
    click.echo(f"wrote results.csv quality_trace.csv in {path}")


@main.command()
@click.option("--problem", "problem_path", required=True, type=click.Path())
@click.option("--truth", "truth_path", required=True, type=click.Path())
@click.option("--all-strategies", is_flag=True, default=False,
              help="run all 16 strategies plus the baseline")
@click.option("--strategy", default="DPI.WORST.BRANCH", show_default=True)
@click.option("--hard", is_flag=True)
@click.option("--guard", default=10**6, show_default=True,
              help="skip exhaustive checks above this m**n")
def verify(problem_path, truth_path, all_strategies, strategy, hard, guard):
    """Solve and exhaustively check results on a small instance."""
    try:
        problem = load_problem(problem_path)
        truth = load_problem(truth_path)
    except (OSError, json.JSONDecodeError, ContractViolation) as e:
        _fail(EXIT_IO, str(e))
    names = list(ALL_STRATEGIES) + [BASELINE] if all_strategies else [strategy]
    failures = 0
    for name in names:
        oracle = SimulatedOracle(problem, truth)
        result = run_strategy(name, problem, oracle, hard=hard, baseline_seed=0)
        try:
            ok = verify_nos(result.problem, result.sol, result.pref, guard=guard)
        except SizeGuardExceeded as e:
            click.echo(f"{name}: SKIP ({e})")
            continue
        click.echo(f"{name}: {'PASS' if ok else 'FAIL'} pref={result.pref!r} "
                   f"elicited={result.stats.elicited}/{result.stats.missing_initial}")
        failures += 0 if ok else 1
    if failures:
        _fail(EXIT_VERIFY, f"{failures} strategies failed verification")


@main.command()
@click.option("--port", default=8540, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--session-ttl", default=1800.0, show_default=True,
              help="seconds before an unanswered session aborts")
def serve(port, host, session_ttl):
    """Run the interactive elicitation service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(session_ttl=session_ttl), host=host, port=port,
                log_level="warning")


if __name__ == "__main__":
    main()
