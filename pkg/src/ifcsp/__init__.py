"""Incomplete fuzzy constraint problems: model, solvers, elicitation."""

from .core import (
    Assignment,
    CompletionKind,
    Constraint,
    Ifcsp,
    Preference,
    TupleRef,
    completion,
    incomplete_tuples,
    is_complete,
    pref_of,
    projected_tuples,
    reveal,
)
from .generate import GenParams, GeneratedInstance, Kind, generate, generate_temporal
from .oracle import EffortLedger, ScriptedOracle, SimulatedOracle
from .solve import (
    ALL_STRATEGIES,
    BASELINE,
    SolveResult,
    StrategyConfig,
    What,
    When,
    Who,
    baseline_random_tree,
    bb,
    brute_force_optimal,
    ifcsp_scheme,
    run_strategy,
    verify_nos,
)

__all__ = [
    "ALL_STRATEGIES",
    "Assignment",
    "BASELINE",
    "CompletionKind",
    "Constraint",
    "EffortLedger",
    "GenParams",
    "GeneratedInstance",
    "Ifcsp",
    "Kind",
    "Preference",
    "ScriptedOracle",
    "SimulatedOracle",
    "SolveResult",
    "StrategyConfig",
    "TupleRef",
    "What",
    "When",
    "Who",
    "baseline_random_tree",
    "bb",
    "brute_force_optimal",
    "completion",
    "generate",
    "generate_temporal",
    "ifcsp_scheme",
    "incomplete_tuples",
    "is_complete",
    "pref_of",
    "projected_tuples",
    "reveal",
    "run_strategy",
    "verify_nos",
]
