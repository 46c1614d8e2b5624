import itertools
import json

import pytest

from ifcsp.core import (
    CompletionKind,
    TupleRef,
    cell_at,
    completion,
    incomplete_tuples,
    pref_of,
)
from ifcsp.errors import ContractViolation, InconsistentStrategy, SizeGuardExceeded
from ifcsp.generate import GenParams, Kind, generate
from ifcsp.jsonio import dumps_canonical
from ifcsp.oracle import ScriptedOracle, SimulatedOracle, Suggested
from ifcsp.rng import mix
from ifcsp.search import node_budget
from ifcsp.solve import (
    ALL_STRATEGIES,
    BASELINE,
    StrategyConfig,
    What,
    When,
    Who,
    baseline_random_tree,
    bb,
    brute_force_optimal,
    brute_force_pref,
    ifcsp_scheme,
    next_variable,
    order_values,
    run_strategy,
    upper_bound,
    verify_nos,
)

from conftest import enumerate_optimal, make_problem


def _solve(p, truth, name, **kw):
    oracle = SimulatedOracle(p, truth, record=kw.pop("record", False))
    res = run_strategy(name, p, oracle, **kw)
    return res, oracle


# -- strategy configuration ---------------------------------------------------


def test_sixteen_consistent_strategies():
    assert len(ALL_STRATEGIES) == 16
    assert len(set(ALL_STRATEGIES)) == 16
    for name in ("SU.WORST.BRANCH", "LU.WORST.BRANCH", "DPI.WORST.BRANCH",
                 "DP.ALL.TREE", "DPI.ALL.NODE"):
        assert name in ALL_STRATEGIES
    assert BASELINE not in ALL_STRATEGIES


@pytest.mark.parametrize("bad", ["su.worst.tree", "lu.all.node", "su.all.tree"])
def test_user_driven_choice_needs_branch(bad):
    with pytest.raises(InconsistentStrategy):
        StrategyConfig.parse(bad)
    with pytest.raises(InconsistentStrategy):
        StrategyConfig(Who(bad.split(".")[0]), What.ALL, When.TREE).validate()


def test_parse_dotted_names():
    cfg = StrategyConfig.parse("dpi.worst.branch")
    assert cfg == StrategyConfig(Who.DPI, What.WORST, When.BRANCH)
    assert cfg.name == "DPI.WORST.BRANCH"
    with pytest.raises(InconsistentStrategy):
        StrategyConfig.parse("dpi.worst")
    with pytest.raises(InconsistentStrategy):
        StrategyConfig.parse("dpi.meh.branch")


# -- bb / upper_bound / next_variable / order_values ---------------------------


def test_bb_single_variable():
    p = make_problem(1, 2, [((0,), [0.4, 0.9])])
    assert bb(p) == ({0: 1}, 0.9)


def test_bb_two_var_instance(two_var_example):
    sol, pref = bb(two_var_example)
    assert (sol, pref) == ({0: 1, 1: 0}, 0.9)


def test_bb_requires_strict_improvement(two_var_example):
    sol, pref = bb(two_var_example, lb=0.9)
    assert sol is None
    sol, pref = bb(two_var_example, lb=0.8999)
    assert pref == 0.9


def test_bb_rejects_incomplete_input():
    p = make_problem(1, 2, [((0,), [None, 0.9])])
    with pytest.raises(ContractViolation):
        bb(p)


def test_bb_returns_zero_preference_solution():
    p = make_problem(1, 2, [((0,), [0.0, 0.0])])
    sol, pref = bb(p)
    assert sol is not None and pref == 0.0


def test_upper_bound_examples():
    p = make_problem(2, 2, [
        ((0,), [0.7, 0.7]),
        ((1,), [1.0, 1.0]),
        ((0, 1), [0.5, 0.9, 0.9, 0.9]),
    ])
    assert upper_bound(p, {}) == 1.0
    assert upper_bound(p, {0: 0}) == 0.7
    assert upper_bound(p, {0: 0, 1: 0}) == 0.5


def test_next_variable_rules():
    p = make_problem(4, 2, [((0, 2), [1.0] * 4), ((1, 2), [1.0] * 4),
                            ((2, 3), [1.0] * 4)])
    assert next_variable(p, {}) == 0  # smallest id on full tie
    assert next_variable(p, {0: 0}) == 2  # the only var adjacent to a bound one
    chain = make_problem(3, 2, [((0, 1), [1.0] * 4), ((1, 2), [1.0] * 4)])
    assert next_variable(chain, {1: 0}) == 0  # both ends tie, smallest id
    with pytest.raises(ContractViolation):
        next_variable(chain, {0: 0, 1: 0, 2: 0})


def test_order_values_dp_dpi():
    p = make_problem(1, 2, [((0,), [None, 0.6])])
    assert list(order_values(0, Who.DP, p)) == [0, 1]  # unknown keyed 1.0
    assert list(order_values(0, Who.DPI, p)) == [1, 0]  # unknown keyed 0.0


def test_order_values_user_suggestions():
    visible = make_problem(1, 2, [((0,), [None, None])])
    truth = make_problem(1, 2, [((0,), [0.2, 0.9])])
    oracle = SimulatedOracle(visible, truth)
    got = list(order_values(0, Who.LU, visible, {}, oracle))
    assert got == [1, 0]  # true argmax first, then the remainder
    assert oracle.ledger.queries == 2


# -- the scheme ---------------------------------------------------------------


def test_complete_problem_needs_no_elicitation(two_var_example):
    _, want = enumerate_optimal(two_var_example)
    for name in ALL_STRATEGIES:
        res, oracle = _solve(two_var_example, two_var_example, name)
        assert res.stats.elicited == 0
        assert oracle.ledger.elicited == 0
        assert res.pref == want == 0.9


def test_hand_traced_single_hidden_cell():
    # hidden cell sits on the optimal tuple; truth there is 0.9
    visible = make_problem(2, 2, [((0, 1), [0.2, 0.5, None, 0.1])])
    truth = make_problem(2, 2, [((0, 1), [0.2, 0.5, 0.9, 0.1])])
    res, _ = _solve(visible, truth, "DPI.ALL.BRANCH")
    assert res.pref == 0.9
    assert res.sol == {0: 1, 1: 0}
    assert res.stats.elicited == 1
    assert cell_at(res.problem, TupleRef(0, 2)) == 0.9


def test_branch_worst_reveals_only_the_minimum():
    # total assignment projects known 0.5 and hidden {0.3, 0.6}
    visible = make_problem(2, 1, [
        ((0,), [None]), ((1,), [None]), ((0, 1), [0.5]),
    ])
    truth = make_problem(2, 1, [
        ((0,), [0.3]), ((1,), [0.6]), ((0, 1), [0.5]),
    ])
    res, oracle = _solve(visible, truth, "DPI.WORST.BRANCH")
    assert res.pref == 0.3
    assert (res.stats.elicited, res.stats.effort) == (1, 2)
    assert cell_at(res.problem, TupleRef(0, 0)) == 0.3


def test_branch_worst_none_worse_keeps_known_minimum():
    visible = make_problem(2, 1, [
        ((0,), [None]), ((1,), [None]), ((0, 1), [0.5]),
    ])
    truth = make_problem(2, 1, [
        ((0,), [0.7]), ((1,), [0.9]), ((0, 1), [0.5]),
    ])
    res, oracle = _solve(visible, truth, "DPI.WORST.BRANCH")
    assert res.pref == 0.5
    assert (res.stats.elicited, res.stats.effort) == (0, 2)
    # the hidden cells are completed optimistically in the returned problem
    assert verify_nos(res.problem, res.sol, res.pref)


def test_tree_mode_matches_branch_mode_answers():
    visible = make_problem(2, 1, [
        ((0,), [None]), ((1,), [None]), ((0, 1), [0.5]),
    ])
    truth = make_problem(2, 1, [
        ((0,), [0.3]), ((1,), [0.6]), ((0, 1), [0.5]),
    ])
    res, _ = _solve(visible, truth, "DPI.WORST.TREE")
    assert res.pref == 0.3
    assert res.stats.elicited == 1


def test_node_mode_elicits_before_bound_check():
    # the hidden unary cell of the tried value is revealed even though the
    # branch dies immediately afterwards
    visible = make_problem(1, 2, [((0,), [None, 0.8])])
    truth = make_problem(1, 2, [((0,), [0.1, 0.8])])
    res, oracle = _solve(visible, truth, "DP.ALL.NODE")
    # dp tries the unknown-keyed value 0 first, reveals 0.1, then moves on
    assert oracle.ledger.elicited == 1
    assert res.pref == 0.8
    assert cell_at(res.problem, TupleRef(0, 0)) == 0.1


def test_node_mode_all_reveals_linking_cells():
    visible = make_problem(2, 1, [((0, 1), [None]), ((0,), [None]), ((1,), [0.9])])
    truth = make_problem(2, 1, [((0, 1), [0.6]), ((0,), [0.7]), ((1,), [0.9])])
    res, oracle = _solve(visible, truth, "DPI.ALL.NODE")
    assert res.pref == 0.6
    assert oracle.ledger.elicited == 2  # unary of var 0 at bind, binary at var 1's bind
    assert oracle.ledger.queries == 2


def test_all_unknown_problem_terminates_and_verifies():
    visible = make_problem(2, 2, [((0, 1), [None] * 4), ((0,), [None, None]),
                                  ((1,), [None, None])])
    truth = make_problem(2, 2, [((0, 1), [0.3, 0.8, 0.2, 0.6]),
                                ((0,), [0.9, 0.5]), ((1,), [0.4, 1.0])])
    missing = len(incomplete_tuples(visible))
    for name in ALL_STRATEGIES:
        res, _ = _solve(visible, truth, name)
        assert res.stats.elicited <= missing
        assert verify_nos(res.problem, res.sol, res.pref)
        assert res.pref == enumerate_optimal(truth)[1]


# -- baseline -----------------------------------------------------------------


def test_baseline_complete_problem(two_var_example):
    res, _ = _solve(two_var_example, two_var_example, BASELINE)
    assert res.stats.elicited == 0
    assert res.pref == 0.9


def test_baseline_single_hidden_cell():
    visible = make_problem(2, 2, [((0, 1), [0.2, 0.5, None, 0.1])])
    truth = make_problem(2, 2, [((0, 1), [0.2, 0.5, 0.9, 0.1])])
    res, _ = _solve(visible, truth, BASELINE)
    assert res.stats.elicited <= 1
    assert verify_nos(res.problem, res.sol, res.pref)


def test_baseline_k_batches_reveals():
    inst = generate(GenParams(n=4, m=3, d=60, t=10, i=60, seed=12))
    r1, _ = _solve(inst.visible, inst.truth, BASELINE, baseline_seed=5)
    r3, _ = _solve(inst.visible, inst.truth, BASELINE, baseline_seed=5, baseline_k=3)
    assert r1.pref == r3.pref
    assert r3.stats.queries <= r1.stats.queries
    with pytest.raises(ContractViolation):
        baseline_random_tree(inst.visible, SimulatedOracle(inst.visible, inst.truth), k=0)


def test_baseline_elicits_more_than_worst_branch():
    worse = better = 0
    for seed in range(10):
        inst = generate(GenParams(n=6, m=3, d=60, t=10, i=50, seed=seed))
        rb, _ = _solve(inst.visible, inst.truth, BASELINE, baseline_seed=seed)
        rw, _ = _solve(inst.visible, inst.truth, "DPI.WORST.BRANCH")
        if rb.stats.elicited > rw.stats.elicited:
            worse += 1
        else:
            better += 1
    assert worse > better


# -- brute force and verification ----------------------------------------------


def test_brute_force_single_variable():
    p = make_problem(1, 3, [((0,), [0.4, 0.9, 0.1])])
    sols, pref = brute_force_optimal(p)
    assert (sols, pref) == ([{0: 1}], 0.9)


def test_brute_force_two_var(two_var_example):
    sols, pref = brute_force_optimal(two_var_example)
    assert pref == 0.9
    assert sols == [{0: 1, 1: 0}]


def test_brute_force_agrees_with_bb_on_random_instances():
    for seed in range(60):
        params = GenParams(n=4 + seed % 3, m=3, d=50 + (seed % 3) * 15,
                           t=(seed % 2) * 25, i=0, seed=mix(77, seed))
        p = generate(params).truth
        _, want = brute_force_optimal(p)
        sol, got = bb(p)
        assert got == want
        assert pref_of(p, sol) == want


def test_brute_force_size_guard():
    p = generate(GenParams(n=10, m=5, d=50, t=10, i=0, seed=0)).truth
    with pytest.raises(SizeGuardExceeded):
        brute_force_optimal(p, guard=10**6)
    with pytest.raises(SizeGuardExceeded):
        brute_force_pref(p, guard=10**6)


def test_verify_nos_accepts_correct_results(two_var_example):
    assert verify_nos(two_var_example, {0: 1, 1: 0}, 0.9)


def test_verify_nos_rejects_suboptimal_solution(two_var_example):
    assert not verify_nos(two_var_example, {0: 0, 1: 1}, 0.5)
    assert not verify_nos(two_var_example, {0: 1, 1: 0}, 0.8)


def test_verify_nos_with_hidden_cell_off_the_optimum():
    # the hidden cell's assignment is capped at 0.3 by a unary, so the
    # 0/1-view optima coincide at 0.9 and the result self-certifies
    visible = make_problem(2, 2, [
        ((0, 1), [0.2, None, 0.9, 0.1]),
        ((0,), [0.3, 1.0]),
    ])
    assert verify_nos(visible, {0: 1, 1: 0}, 0.9)
    assert not verify_nos(visible, {0: 0, 1: 0}, 0.9)


def test_verify_nos_zero_preference_accepts_everything(two_var_example):
    p = make_problem(1, 2, [((0,), [0.0, 0.0])])
    assert verify_nos(p, {0: 0}, 0.0)


# -- cross-cutting run invariants ----------------------------------------------


def _random_cases():
    cases = []
    for seed in range(12):
        kind = Kind.HARD if seed % 4 == 3 else Kind.FUZZY
        cases.append(GenParams(
            n=4 + seed % 3, m=3 + seed % 2, d=(30, 50, 80)[seed % 3],
            t=(10, 35)[seed % 2], i=(10, 30, 100)[seed % 3],
            seed=mix(5, seed), kind=kind,
        ))
    return cases


@pytest.mark.parametrize("params", _random_cases())
def test_run_invariants_across_strategies(params):
    inst = generate(params)
    hard = params.kind is Kind.HARD
    missing = len(incomplete_tuples(inst.visible))
    budget = node_budget(params.n, params.m)
    prefs = set()
    for name in list(ALL_STRATEGIES) + [BASELINE]:
        res, oracle = _solve(inst.visible, inst.truth, name, hard=hard,
                             baseline_seed=params.seed)
        stats = res.stats
        prefs.add(res.pref)
        assert verify_nos(res.problem, res.sol, res.pref)
        # ledger and elicitation-subset invariants
        assert stats.elicited <= missing
        assert stats.elicited <= stats.effort or stats.effort == stats.elicited
        assert stats.missing_initial == missing
        for vis_c, out_c in zip(inst.visible.constraints, res.problem.constraints):
            for a, b in zip(vis_c.table, out_c.table):
                if a is not None:
                    assert b == a  # originally known cells unchanged
        # instrumented termination bounds
        assert stats.max_pass_nodes <= budget
        if name.endswith(".TREE") and name != BASELINE:
            assert stats.passes <= missing + 3  # initial pass + tree bound
        # anytime trace: non-decreasing, ends at the returned preference
        lbs = [lb for _, lb in stats.quality_trace]
        assert all(a <= b for a, b in zip(lbs, lbs[1:]))
        assert lbs[-1] == res.pref
        events = [q for q, _ in stats.quality_trace]
        assert all(a <= b for a, b in zip(events, events[1:]))
    assert len(prefs) == 1  # every strategy certifies the same optimum
    assert prefs.pop() == brute_force_pref(inst.truth)


def test_worst_mode_effort_at_least_elicited():
    inst = generate(GenParams(n=5, m=3, d=60, t=10, i=60, seed=31))
    for name in [s for s in ALL_STRATEGIES if ".WORST." in s]:
        res, _ = _solve(inst.visible, inst.truth, name)
        assert res.stats.effort >= res.stats.elicited


def test_tree_mode_only_elicits_on_currently_optimal_assignments():
    # replay the transcript against an evolving copy of the problem: each
    # reveal query must sit inside the projections of some assignment that
    # is optimal in the current unknown-as-1 view
    from ifcsp.core import projected_tuples, reveal

    inst = generate(GenParams(n=4, m=3, d=70, t=10, i=60, seed=41))
    for name in ("DPI.WORST.TREE", "DP.ALL.TREE"):
        res, oracle = _solve(inst.visible, inst.truth, name, record=True)
        cur = inst.visible
        for query_json, answer_json in oracle.transcript:
            if query_json["kind"] not in ("reveal_all", "reveal_worst"):
                continue
            queried = {TupleRef(*t) for t in query_json["tuples"]}
            p1 = completion(cur, CompletionKind.ONE)
            opt_sols, _ = brute_force_optimal(p1)
            covered = any(
                queried <= {r for r, _ in projected_tuples(p1, s)}
                for s in opt_sols
            )
            assert covered, f"{name} elicited off-optimum cells"
            if answer_json["kind"] == "revealed":
                for t, v in answer_json["cells"]:
                    cur = reveal(cur, TupleRef(*t), v)
            elif answer_json["kind"] == "worst":
                cur = reveal(cur, TupleRef(*answer_json["ref"]), answer_json["value"])


def test_force_zero_lb_same_answer():
    for seed in (3, 9):
        inst = generate(GenParams(n=5, m=3, d=60, t=10, i=40, seed=seed))
        for name in ("DPI.WORST.BRANCH", "DPI.ALL.NODE", "DP.WORST.TREE"):
            a, _ = _solve(inst.visible, inst.truth, name)
            oracle = SimulatedOracle(inst.visible, inst.truth)
            b = run_strategy(name, inst.visible, oracle, force_zero_lb=True)
            assert a.pref == b.pref
            assert verify_nos(b.problem, b.sol, b.pref)


def test_hard_mode_infers_ones_for_free():
    visible = make_problem(2, 1, [((0,), [None]), ((1,), [None]), ((0, 1), [1.0])])
    truth = make_problem(2, 1, [((0,), [1.0]), ((1,), [1.0]), ((0, 1), [1.0])])
    res, oracle = _solve(visible, truth, "DPI.WORST.BRANCH", hard=True)
    assert res.pref == 1.0
    assert oracle.ledger.elicited == 0  # no_zero answers transfer nothing
    assert oracle.ledger.effort == 2
    assert cell_at(res.problem, TupleRef(0, 0)) == 1.0  # inferred, made known


def test_hard_mode_zero_location_counts_once():
    visible = make_problem(2, 1, [((0,), [None]), ((1,), [None]), ((0, 1), [1.0])])
    truth = make_problem(2, 1, [((0,), [0.0]), ((1,), [1.0]), ((0, 1), [1.0])])
    res, oracle = _solve(visible, truth, "DPI.WORST.BRANCH", hard=True)
    assert oracle.ledger.elicited == 1
    assert res.pref == 0.0


# -- determinism and replay -----------------------------------------------------


def test_identical_runs_and_traces():
    inst = generate(GenParams(n=5, m=3, d=60, t=10, i=40, seed=51))
    for name in ("DPI.WORST.BRANCH", "SU.WORST.BRANCH", "DPI.ALL.TREE", BASELINE):
        t1, t2 = [], []
        o1 = SimulatedOracle(inst.visible, inst.truth)
        r1 = run_strategy(name, inst.visible, o1, trace=t1, baseline_seed=7)
        o2 = SimulatedOracle(inst.visible, inst.truth)
        r2 = run_strategy(name, inst.visible, o2, trace=t2, baseline_seed=7)
        assert t1 == t2
        assert dumps_canonical(r1.to_json()) == dumps_canonical(r2.to_json())


def test_traced_run_matches_untraced_run():
    inst = generate(GenParams(n=5, m=3, d=70, t=10, i=50, seed=61))
    for name in ("DPI.WORST.TREE", "DPI.ALL.BRANCH", BASELINE):
        rt, _ = _solve(inst.visible, inst.truth, name, trace=[], baseline_seed=3)
        ru, _ = _solve(inst.visible, inst.truth, name, baseline_seed=3)
        assert dumps_canonical(rt.to_json()) == dumps_canonical(ru.to_json())


def test_record_replay_reproduces_identical_result():
    inst = generate(GenParams(n=5, m=3, d=60, t=10, i=50, seed=71))
    for name in ("DPI.WORST.BRANCH", "SU.WORST.BRANCH", "DPI.ALL.TREE"):
        res, oracle = _solve(inst.visible, inst.truth, name, record=True)
        replayed = ScriptedOracle(inst.visible, list(oracle.transcript))
        res2 = run_strategy(name, inst.visible, replayed)
        assert dumps_canonical(res.to_json()) == dumps_canonical(res2.to_json())
        assert replayed.ledger.to_json() == oracle.ledger.to_json()


def test_suggestions_must_come_from_candidates():
    visible = make_problem(1, 2, [((0,), [None, None])])
    script = [Suggested(0), Suggested(0)]  # second suggestion repeats
    oracle = ScriptedOracle(visible, script)
    with pytest.raises(Exception):
        run_strategy("LU.ALL.BRANCH", visible, oracle)
