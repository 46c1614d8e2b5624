"""Branch-and-bound solving with interleaved preference elicitation.

The solver interleaves depth-first branch and bound over completion
views of the incomplete problem with queries to an oracle, until the
returned assignment is optimal in every completion of the (partially
revealed) problem it returns.  Three strategy axes select a concrete
algorithm:

- who orders the values of a variable: the solver, reading unknown cells
  optimistically (dp) or pessimistically (dpi), or the user, scoring
  candidates by their true unary preference (lu) or also by the binary
  cells toward already-bound variables (su);
- what is elicited: every hidden cell touched (all), or only the worst
  one when it beats the known minimum (worst);
- when elicitation happens: after each full search pass (tree), at every
  complete assignment met during the search (branch), or at every value
  binding (node).

User-driven value choice needs the user in the loop at every binding, so
lu/su pair only with when=branch; the 16 consistent triples are listed
in ALL_STRATEGIES.  A 17th algorithm, the baseline DPI.RANDOM.TREE,
alternates full passes on both completion views with reveals of randomly
chosen hidden cells until the two optima coincide.

On hard instances (all preferences 0 or 1) a worst-of elicitation is
asked as a has-zero question; a "no zero" reply lets the solver mark
every queried cell as 1 for free.

Bound checks and improvements are strict everywhere: a subtree is pruned
unless its upper bound exceeds the incumbent, so a search pass returns
the first optimum met in visit order and terminates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional

import numpy as np

from .core import (
    Assignment,
    CompletionKind,
    Ifcsp,
    TupleRef,
    apply_reveals,
    completion,
    incomplete_tuples,
    is_complete,
    known_projection_min,
    pref_of,
)
from .errors import (
    ContractViolation,
    IfcspError,
    InconsistentStrategy,
    SizeGuardExceeded,
)
from .jsonio import problem_to_json
from .oracle import (
    HasZero,
    OracleBase,
    RevealAll,
    RevealWorst,
    SuggestValue,
    Suggested,
    Worst,
    ZeroAt,
)
from .rng import SplitMix64
from .search import Workspace, node_budget


class Who(str, Enum):
    DP = "dp"
    DPI = "dpi"
    LU = "lu"
    SU = "su"


class What(str, Enum):
    ALL = "all"
    WORST = "worst"


class When(str, Enum):
    TREE = "tree"
    BRANCH = "branch"
    NODE = "node"


@dataclass(frozen=True)
class StrategyConfig:
    who: Who
    what: What
    when: When

    def validate(self) -> "StrategyConfig":
        # user-driven value choice requires when=branch
        if self.when is not When.BRANCH and self.who in (Who.LU, Who.SU):
            raise InconsistentStrategy(
                f"who={self.who.value} requires when=branch, got when={self.when.value}"
            )
        return self

    @property
    def name(self) -> str:
        return f"{self.who.value}.{self.what.value}.{self.when.value}".upper()

    @classmethod
    def parse(cls, name: str) -> "StrategyConfig":
        parts = name.strip().lower().split(".")
        if len(parts) != 3:
            raise InconsistentStrategy(f"strategy must be WHO.WHAT.WHEN, got {name!r}")
        try:
            cfg = cls(Who(parts[0]), What(parts[1]), When(parts[2]))
        except ValueError as e:
            raise InconsistentStrategy(str(e))
        return cfg.validate()


BASELINE = "DPI.RANDOM.TREE"

ALL_STRATEGIES: tuple[str, ...] = tuple(
    StrategyConfig(who, what, when).name
    for who in Who
    for what in What
    for when in When
    if not (when is not When.BRANCH and who in (Who.LU, Who.SU))
)


@dataclass
class RunStats:
    elicited: int
    missing_initial: int
    effort: int
    queries: int
    wall_ms: float
    quality_trace: list[tuple[int, float]]
    nodes: int
    max_pass_nodes: int
    passes: int

    def to_json(self) -> dict:
        # wall_ms is intentionally left out: reports must be reproducible
        return {
            "elicited": self.elicited,
            "missing_initial": self.missing_initial,
            "effort": self.effort,
            "queries": self.queries,
            "quality_trace": [[q, lb] for q, lb in self.quality_trace],
            "nodes": self.nodes,
            "max_pass_nodes": self.max_pass_nodes,
            "passes": self.passes,
        }


@dataclass
class SolveResult:
    strategy: str
    problem: Ifcsp  # the input plus every revealed cell
    sol: Assignment
    pref: float
    stats: RunStats

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "pref": self.pref,
            "sol": [self.sol[v] for v in range(self.problem.n)],
            "problem": problem_to_json(self.problem),
            "stats": self.stats.to_json(),
        }


# ---------------------------------------------------------------------------
# Spec-level helper operations


def bb(
    p: Ifcsp, lb: Optional[float] = None, trace: Optional[list[str]] = None
) -> tuple[Optional[Assignment], float]:
    """Optimal solution of a complete problem by depth-first branch and bound.

    With lb given, only solutions strictly better than lb count; returns
    (None, lb) when none exists.  With lb=None the optimum is returned
    even when its preference is 0.
    """
    if not is_complete(p):
        raise ContractViolation("bb requires a complete problem")
    ws = Workspace(p)
    sol, pref, _ = ws.bb_pass("one", False, lb, trace.append if trace is not None else None)
    if sol is None:
        return None, float(lb)
    return ws.assignment_of(sol), pref


def upper_bound(p1: Ifcsp, s: Assignment) -> float:
    """Min over the cells of constraints fully bound by s; 1.0 if none."""
    if not is_complete(p1):
        raise ContractViolation("upper_bound expects a complete problem")
    return known_projection_min(p1, s)


def next_variable(p1: Ifcsp, bound: Assignment) -> int:
    """Unbound variable with the most constraints toward bound ones, ties
    to the smallest id."""
    free = [v for v in range(p1.n) if v not in bound]
    if not free:
        raise ContractViolation("all variables are bound")
    counts = {v: 0 for v in free}
    for x, y in p1.binary_scopes():
        if x in counts and y in bound:
            counts[x] += 1
        if y in counts and x in bound:
            counts[y] += 1
    return min(free, key=lambda v: (-counts[v], v))


def order_values(
    var: int,
    who: Who,
    p: Ifcsp,
    bound: Optional[Assignment] = None,
    oracle: Optional[OracleBase] = None,
) -> Iterator[int]:
    """Candidate values for var, in the order the strategy tries them.

    dp/dpi yield all m values by decreasing unary preference (unknown
    cells read as 1 and 0 respectively), ties to the smallest value.
    lu/su ask the oracle to suggest one value per step among the still
    untried candidates.
    """
    unary = next(c for c in p.constraints if c.scope == (var,))
    if who in (Who.DP, Who.DPI):
        fill = 1.0 if who is Who.DP else 0.0
        key = [fill if x is None else x for x in unary.table]
        yield from sorted(range(p.m), key=lambda v: (-key[v], v))
        return
    if oracle is None:
        raise ContractViolation(f"who={who.value} needs an oracle")
    context = "lazy" if who is Who.LU else "smart"
    items = tuple(sorted((bound or {}).items()))
    remaining = list(range(p.m))
    while remaining:
        ans = oracle.answer(SuggestValue(var, tuple(remaining), context, items))
        assert isinstance(ans, Suggested)
        remaining.remove(ans.value)
        yield ans.value


# ---------------------------------------------------------------------------
# The general scheme


class _Solve:
    def __init__(
        self,
        p: Ifcsp,
        cfg: StrategyConfig,
        oracle: OracleBase,
        hard: bool,
        trace: Optional[list[str]],
        progress: Optional[Callable[[float, Assignment], None]],
    ):
        self.p = p
        self.cfg = cfg
        self.oracle = oracle
        self.hard = hard
        self.trace = trace
        self.progress = progress
        self.ws = Workspace(p)
        self.revealed: list[tuple[TupleRef, float]] = []
        self.qtrace: list[tuple[int, float]] = []
        self.nodes = 0
        self.max_pass_nodes = 0
        self.passes = 0
        self.budget = node_budget(p.n, p.m)
        self.lb = 0.0
        self.sol_pos: list[int] = []
        self.base_pref = 0.0  # preference of the all-unknowns-as-0 optimum

    def _tr(self, line: str) -> None:
        if self.trace is not None:
            self.trace.append(line)

    def _apply(self, ref: TupleRef, value: float) -> None:
        self.ws.apply_reveal(ref, value)
        self.revealed.append((ref, value))

    def _mark(self, certified: float) -> None:
        self.qtrace.append((self.oracle.ledger.queries, certified))
        self._tr(f"lb {certified!r} queries={self.oracle.ledger.queries}")
        if self.progress is not None:
            self.progress(certified, self.ws.assignment_of(self.sol_pos))

    def _elicit(self, refs: list[TupleRef], known_min: float) -> float:
        """Resolve hidden cells; returns the exact minimum over the queried
        cells together with known_min."""
        if not refs:
            return known_min
        refs = sorted(refs)
        if self.cfg.what is What.ALL:
            ans = self.oracle.answer(RevealAll(tuple(refs)))
            vmin = known_min
            for t, v in ans.cells:
                self._apply(t, v)
                if v < vmin:
                    vmin = v
            self._tr(f"elicit all k={len(refs)} min={vmin!r}")
            return vmin
        if self.hard:
            ans = self.oracle.answer(HasZero(tuple(refs)))
            if isinstance(ans, ZeroAt):
                self._apply(ans.ref, 0.0)
                self._tr(f"elicit has_zero k={len(refs)} zero_at={tuple(ans.ref)}")
                return 0.0
            for t in refs:
                self._apply(t, 1.0)
            self._tr(f"elicit has_zero k={len(refs)} none")
            return known_min
        ans = self.oracle.answer(RevealWorst(tuple(refs), known_min))
        if isinstance(ans, Worst):
            self._apply(ans.ref, ans.value)
            self._tr(f"elicit worst k={len(refs)} value={ans.value!r}")
            return ans.value
        self._tr(f"elicit worst k={len(refs)} none_worse")
        return known_min

    # -- value ordering -------------------------------------------------------

    def _values_at(self, k: int, vals: list[int]) -> Iterator[int]:
        who = self.cfg.who
        if who in (Who.DP, Who.DPI):
            yield from self.ws.value_order(k, zero_view=who is Who.DPI)
            return
        var = self.ws.order[k]
        context = "lazy" if who is Who.LU else "smart"
        # the bound prefix does not change while this position iterates
        items = tuple(sorted((self.ws.order[j], vals[j]) for j in range(k)))
        remaining = list(range(self.ws.m))
        while remaining:
            ans = self.oracle.answer(
                SuggestValue(var, tuple(remaining), context, items)
            )
            assert isinstance(ans, Suggested)
            remaining.remove(ans.value)
            yield ans.value

    # -- branch / node modes: one search pass with elicitation inside ---------

    def _search_with_elicitation(self) -> None:
        ws = self.ws
        n = ws.n
        when = self.cfg.when
        vals = [-1] * n
        # ubs[j] = min over the cells bound by positions 0..j-1, on the
        # current unknown-as-1 view.  Reveals inside the search can lower
        # cells anywhere along the path, so the chain is recomputed from
        # the live tables after every reveal rather than carried by value.
        ubs = [1.0] * (n + 1)
        self.passes += 1
        pass_nodes = 0

        def refresh(k: int) -> None:
            acc = 1.0
            for j in range(k):
                acc = min(acc, ws.node_min_u1(j, vals[j], vals))
                ubs[j + 1] = acc

        def descend(k: int) -> None:
            nonlocal pass_nodes
            for v in self._values_at(k, vals):
                pass_nodes += 1
                if pass_nodes > self.budget:
                    raise IfcspError("node budget exceeded: search is not terminating")
                vals[k] = v
                if when is When.NODE:
                    known_new, hidden = ws.node_cells(k, v, vals)
                    before = len(self.revealed)
                    self._elicit(hidden, min(ubs[k], known_new))
                    if len(self.revealed) != before:
                        refresh(k)
                ub = min(ubs[k], ws.node_min_u1(k, v, vals))
                self._tr(f"node pos={k} val={v} ub={ub!r}")
                if ub > self.lb:
                    if k == n - 1:
                        if when is When.BRANCH:
                            before = len(self.revealed)
                            pref = self._elicit(ws.projected_hidden(vals), ub)
                            if len(self.revealed) != before:
                                refresh(k)
                        else:
                            pref = ub
                        if pref > self.lb:
                            self.lb = pref
                            self.sol_pos = vals.copy()
                            self._mark(max(self.base_pref, self.lb))
                    else:
                        ubs[k + 1] = ub
                        descend(k + 1)
                else:
                    self._tr(f"prune pos={k} val={v}")
            vals[k] = -1

        descend(0)
        self.nodes += pass_nodes
        self.max_pass_nodes = max(self.max_pass_nodes, pass_nodes)

    # -- tree mode: repeated full passes, eliciting between them --------------

    def _run_tree(self) -> None:
        ws = self.ws
        max_passes = len(ws.hidden) + 2
        tree_passes = 0
        tr = self.trace.append if self.trace is not None else None
        while True:
            tree_passes += 1
            if tree_passes > max_passes:
                raise IfcspError("tree-level elicitation is not converging")
            self.passes += 1
            self._tr(f"pass {tree_passes} lb={self.lb!r}")
            found, p1_pref, nodes = ws.bb_pass(
                "one", self.cfg.who is Who.DPI, self.lb, tr
            )
            self.nodes += nodes
            self.max_pass_nodes = max(self.max_pass_nodes, nodes)
            if found is None:
                return
            # p1_pref is the known minimum over the found solution's
            # projections (hidden cells read as 1)
            exact = self._elicit(ws.projected_hidden(found), p1_pref)
            if exact > self.lb:
                self.lb = exact
                self.sol_pos = found
            self._mark(max(self.base_pref, self.lb))


def ifcsp_scheme(
    p: Ifcsp,
    cfg: StrategyConfig,
    oracle: OracleBase,
    *,
    hard: bool = False,
    trace: Optional[list[str]] = None,
    progress: Optional[Callable[[float, Assignment], None]] = None,
    force_zero_lb: bool = False,
) -> SolveResult:
    """Solve p with one of the 16 strategy instances.

    Returns the input problem with every revealed cell filled in, an
    assignment optimal in all completions of that problem, its
    preference, and the run's accounting.
    """
    cfg.validate()
    t0 = time.perf_counter()
    eng = _Solve(p, cfg, oracle, hard, trace, progress)
    missing0 = len(eng.ws.hidden)

    # optimum of the everything-unknown-is-0 view: fallback solution and
    # initial strict bound
    tr = trace.append if trace is not None else None
    sol0, pref0, nodes = eng.ws.bb_pass("zero", True, None, tr)
    eng.passes += 1
    eng.nodes += nodes
    eng.max_pass_nodes = nodes
    eng.base_pref = pref0
    eng.sol_pos = sol0
    eng.lb = 0.0 if force_zero_lb else pref0
    eng._mark(pref0)

    if cfg.when is When.TREE:
        eng._run_tree()
    else:
        eng._search_with_elicitation()

    pref = max(eng.lb, pref0)
    if eng.qtrace[-1][1] != pref:
        raise IfcspError("quality trace out of sync with the final preference")
    # With what=worst the accepted solution may still project through
    # hidden cells; the answers guarantee each of them is >= pref, and the
    # search's 1-view already read them as 1, so the returned problem
    # completes them at 1.0.  That keeps it a partial completion of the
    # input in which the solution is optimal under every completion of
    # the cells that remain unknown.
    if pref > 0.0:
        for ref in sorted(eng.ws.projected_hidden(eng.sol_pos)):
            eng._apply(ref, 1.0)
    q = apply_reveals(p, eng.revealed)
    stats = RunStats(
        elicited=oracle.ledger.elicited,
        missing_initial=missing0,
        effort=oracle.ledger.effort,
        queries=oracle.ledger.queries,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        quality_trace=eng.qtrace,
        nodes=eng.nodes,
        max_pass_nodes=eng.max_pass_nodes,
        passes=eng.passes,
    )
    return SolveResult(cfg.name, q, eng.ws.assignment_of(eng.sol_pos), pref, stats)


def baseline_random_tree(
    p: Ifcsp,
    oracle: OracleBase,
    k: int = 1,
    seed: int = 0,
    *,
    trace: Optional[list[str]] = None,
    progress: Optional[Callable[[float, Assignment], None]] = None,
) -> SolveResult:
    """Reveal k random hidden cells after each unsuccessful pass pair.

    Alternates branch and bound on the unknowns-as-0 and unknowns-as-1
    views (dpi value ordering); stops when their optima coincide, which
    makes any optimum of the 0-view optimal in every completion.
    """
    if k < 1:
        raise ContractViolation("k must be >= 1")
    t0 = time.perf_counter()
    ws = Workspace(p)
    missing0 = len(ws.hidden)
    rng = SplitMix64(seed)
    revealed: list[tuple[TupleRef, float]] = []
    tr = trace.append if trace is not None else None

    sol0, pref0, nodes = ws.bb_pass("zero", True, None, tr)
    total_nodes, max_nodes, passes = nodes, nodes, 1
    qtrace = [(0, pref0)]
    while True:
        found, _, nodes = ws.bb_pass("one", True, pref0, tr)
        total_nodes += nodes
        max_nodes = max(max_nodes, nodes)
        passes += 1
        if found is None:
            break
        hidden = sorted(ws.hidden)
        assert hidden, "1-view beat the 0-view with nothing hidden"
        take = min(k, len(hidden))
        chosen = tuple(hidden[i] for i in rng.sample(len(hidden), take))
        ans = oracle.answer(RevealAll(chosen))
        for t, v in ans.cells:
            ws.apply_reveal(t, v)
            revealed.append((t, v))
        res0, p0_pref, nodes = ws.bb_pass("zero", True, pref0, tr)
        total_nodes += nodes
        max_nodes = max(max_nodes, nodes)
        passes += 1
        if res0 is not None:
            sol0, pref0 = res0, p0_pref
        qtrace.append((oracle.ledger.queries, pref0))
        if progress is not None:
            progress(pref0, ws.assignment_of(sol0))

    q = apply_reveals(p, revealed)
    stats = RunStats(
        elicited=oracle.ledger.elicited,
        missing_initial=missing0,
        effort=oracle.ledger.effort,
        queries=oracle.ledger.queries,
        wall_ms=(time.perf_counter() - t0) * 1e3,
        quality_trace=qtrace,
        nodes=total_nodes,
        max_pass_nodes=max_nodes,
        passes=passes,
    )
    return SolveResult(BASELINE, q, ws.assignment_of(sol0), pref0, stats)


def run_strategy(
    strategy: str | StrategyConfig,
    p: Ifcsp,
    oracle: OracleBase,
    *,
    hard: bool = False,
    baseline_k: int = 1,
    baseline_seed: int = 0,
    trace: Optional[list[str]] = None,
    progress: Optional[Callable[[float, Assignment], None]] = None,
    force_zero_lb: bool = False,
) -> SolveResult:
    """Dispatch a strategy name (one of the 16, or the baseline) to a solve."""
    if isinstance(strategy, StrategyConfig):
        return ifcsp_scheme(
            p, strategy, oracle, hard=hard, trace=trace, progress=progress,
            force_zero_lb=force_zero_lb,
        )
    if strategy.strip().upper() == BASELINE:
        return baseline_random_tree(
            p, oracle, k=baseline_k, seed=baseline_seed, trace=trace, progress=progress
        )
    return ifcsp_scheme(
        p, StrategyConfig.parse(strategy), oracle, hard=hard, trace=trace,
        progress=progress, force_zero_lb=force_zero_lb,
    )


# ---------------------------------------------------------------------------
# Exhaustive verification


def _brute_pref_vector(p: Ifcsp) -> np.ndarray:
    total = p.m**p.n
    idx = np.arange(total, dtype=np.int64)
    pref = np.ones(total)
    for c in p.constraints:
        tab = np.asarray(c.table, dtype=np.float64)
        x = c.scope[0]
        vx = (idx // (p.m ** (p.n - 1 - x))) % p.m
        if c.arity == 1:
            cells = tab[vx]
        else:
            y = c.scope[1]
            vy = (idx // (p.m ** (p.n - 1 - y))) % p.m
            cells = tab[vx * p.m + vy]
        np.minimum(pref, cells, out=pref)
    return pref


def _check_guard(p: Ifcsp, guard: int) -> None:
    if p.m**p.n > guard:
        raise SizeGuardExceeded(f"m**n = {p.m ** p.n} exceeds the guard {guard}")


def brute_force_optimal(
    p: Ifcsp, guard: int = 10**6
) -> tuple[list[Assignment], float]:
    """All optimal assignments of a complete problem, by full enumeration."""
    if not is_complete(p):
        raise ContractViolation("brute force requires a complete problem")
    _check_guard(p, guard)
    pref = _brute_pref_vector(p)
    best = float(pref.max())
    sols = []
    for flat in np.flatnonzero(pref == best):
        digits = {}
        rest = int(flat)
        for v in range(p.n - 1, -1, -1):
            digits[v] = rest % p.m
            rest //= p.m
        sols.append(digits)
    return sols, best


def brute_force_pref(p: Ifcsp, guard: int = 10**6) -> float:
    """Optimal preference of a complete problem, by full enumeration."""
    if not is_complete(p):
        raise ContractViolation("brute force requires a complete problem")
    _check_guard(p, guard)
    return float(_brute_pref_vector(p).max())


def verify_nos(q: Ifcsp, sol: Assignment, pref: float, guard: int = 10**6) -> bool:
    """Check a solve result by enumeration: sol must be optimal in the 0-view
    of q with the claimed preference, and the 0- and 1-view optima must
    coincide.  A claimed preference of 0 passes outright (every assignment
    is then optimal in every completion)."""
    if pref == 0.0:
        return True
    q0 = completion(q, CompletionKind.ZERO)
    opt0 = brute_force_pref(q0, guard)
    opt1 = brute_force_pref(completion(q, CompletionKind.ONE), guard)
    return pref_of(q0, sol) == opt0 == opt1 == pref
