"""The elicitation counterpart of the solver: the "user".

An oracle answers four query kinds and keeps two counters: `elicited`,
the number of preference values actually transferred to the solver, and
`effort`, the number of distinct missing preferences the user had to
work out to answer.  A worst-of query makes the user scan every hidden
cell in the query but transfers at most one value, so effort can exceed
elicited; a cell already considered for an earlier query costs nothing
the second time, so effort never exceeds the initially-missing count.

Accounting rules per query (effort counts only first-time looks at
hidden cells):

- reveal_all:    examines and transfers every queried cell.
- reveal_worst:  examines every queried cell; if the hidden minimum
  beats known_min the single worst cell is revealed (elicited += 1),
  otherwise the answer is none_worse and nothing is transferred.
- has_zero:      examines every queried cell; a zero's location counts
  as one elicited value; a no_zero answer transfers nothing, and the
  solver may infer every queried cell is 1.
- suggest_value: the user computes each candidate's true score (unary
  preference for a lazy user; min of unary and the binary cells toward
  already-bound variables for a smart one) and names the argmax, ties to
  the smallest value.  Hidden cells scanned count as examined; nothing
  is elicited.

Ties among tuples always break to the smallest (constraint, cell)
address.  Every oracle tracks which cells the solver currently knows, so
suggestions only examine cells that are still hidden.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

from .core import Ifcsp, TupleRef
from .errors import ContractViolation, OracleProtocolError, OracleTimeout

Context = str  # "lazy" | "smart"


class RevealAll(NamedTuple):
    tuples: tuple[TupleRef, ...]


class RevealWorst(NamedTuple):
    tuples: tuple[TupleRef, ...]
    known_min: float


class HasZero(NamedTuple):
    tuples: tuple[TupleRef, ...]


class SuggestValue(NamedTuple):
    var: int
    candidates: tuple[int, ...]
    context: Context
    bound: tuple[tuple[int, int], ...]  # sorted (variable, value) pairs


Query = Union[RevealAll, RevealWorst, HasZero, SuggestValue]


class Revealed(NamedTuple):
    cells: tuple[tuple[TupleRef, float], ...]


class Worst(NamedTuple):
    ref: TupleRef
    value: float


class NoneWorse(NamedTuple):
    pass


class ZeroAt(NamedTuple):
    ref: TupleRef


class NoZero(NamedTuple):
    pass


class Suggested(NamedTuple):
    value: int


Answer = Union[Revealed, Worst, NoneWorse, ZeroAt, NoZero, Suggested]


@dataclass
class EffortLedger:
    elicited: int = 0
    effort: int = 0
    queries: int = 0

    def to_json(self) -> dict:
        return {"elicited": self.elicited, "effort": self.effort, "queries": self.queries}


# ---------------------------------------------------------------------------
# JSON codec (shared by the HTTP service and transcript files)

_QUERY_KINDS = {
    RevealAll: "reveal_all",
    RevealWorst: "reveal_worst",
    HasZero: "has_zero",
    SuggestValue: "suggest_value",
}


def query_to_json(q: Query, qid: int) -> dict:
    out: dict = {"id": qid, "kind": _QUERY_KINDS[type(q)]}
    if isinstance(q, (RevealAll, RevealWorst, HasZero)):
        out["tuples"] = [list(t) for t in q.tuples]
    if isinstance(q, RevealWorst):
        out["known_min"] = q.known_min
    if isinstance(q, SuggestValue):
        out.update(
            var=q.var,
            candidates=list(q.candidates),
            context=q.context,
            bound=[list(b) for b in q.bound],
        )
    return out


def query_from_json(d: dict) -> Query:
    kind = d.get("kind")
    if kind == "reveal_all":
        return RevealAll(tuple(TupleRef(*t) for t in d["tuples"]))
    if kind == "reveal_worst":
        return RevealWorst(tuple(TupleRef(*t) for t in d["tuples"]), float(d["known_min"]))
    if kind == "has_zero":
        return HasZero(tuple(TupleRef(*t) for t in d["tuples"]))
    if kind == "suggest_value":
        return SuggestValue(
            int(d["var"]),
            tuple(int(c) for c in d["candidates"]),
            str(d["context"]),
            tuple((int(a), int(b)) for a, b in d["bound"]),
        )
    raise OracleProtocolError(f"unknown query kind {kind!r}")


def answer_to_json(a: Answer) -> dict:
    if isinstance(a, Revealed):
        return {"kind": "revealed", "cells": [[list(t), v] for t, v in a.cells]}
    if isinstance(a, Worst):
        return {"kind": "worst", "ref": list(a.ref), "value": a.value}
    if isinstance(a, NoneWorse):
        return {"kind": "none_worse"}
    if isinstance(a, ZeroAt):
        return {"kind": "zero_at", "ref": list(a.ref)}
    if isinstance(a, NoZero):
        return {"kind": "no_zero"}
    if isinstance(a, Suggested):
        return {"kind": "suggested", "value": a.value}
    raise OracleProtocolError(f"unknown answer {a!r}")


def answer_from_json(d: dict) -> Answer:
    kind = d.get("kind")
    if kind == "revealed":
        return Revealed(tuple((TupleRef(*t), float(v)) for t, v in d["cells"]))
    if kind == "worst":
        return Worst(TupleRef(*d["ref"]), float(d["value"]))
    if kind == "none_worse":
        return NoneWorse()
    if kind == "zero_at":
        return ZeroAt(TupleRef(*d["ref"]))
    if kind == "no_zero":
        return NoZero()
    if kind == "suggested":
        return Suggested(int(d["value"]))
    raise OracleProtocolError(f"unknown answer kind {kind!r}")


def validate_answer(query: Query, answer: Answer) -> None:
    """Reject answers whose shape or values are impossible for the query."""
    if isinstance(query, RevealAll):
        if not isinstance(answer, Revealed):
            raise OracleProtocolError("reveal_all expects a revealed answer")
        if [t for t, _ in answer.cells] != sorted(query.tuples):
            raise OracleProtocolError("revealed cells must cover exactly the queried tuples")
        for _, v in answer.cells:
            if not 0.0 <= v <= 1.0:
                raise OracleProtocolError(f"preference {v} outside [0, 1]")
    elif isinstance(query, RevealWorst):
        if isinstance(answer, Worst):
            if answer.ref not in query.tuples:
                raise OracleProtocolError("worst cell must be one of the queried tuples")
            if not 0.0 <= answer.value <= 1.0:
                raise OracleProtocolError(f"preference {answer.value} outside [0, 1]")
            if answer.value >= query.known_min:
                raise OracleProtocolError(
                    "a worst answer must beat known_min; use none_worse otherwise"
                )
        elif not isinstance(answer, NoneWorse):
            raise OracleProtocolError("reveal_worst expects worst or none_worse")
    elif isinstance(query, HasZero):
        if isinstance(answer, ZeroAt):
            if answer.ref not in query.tuples:
                raise OracleProtocolError("zero cell must be one of the queried tuples")
        elif not isinstance(answer, NoZero):
            raise OracleProtocolError("has_zero expects zero_at or no_zero")
    elif isinstance(query, SuggestValue):
        if not isinstance(answer, Suggested):
            raise OracleProtocolError("suggest_value expects a suggested answer")
        if answer.value not in query.candidates:
            raise OracleProtocolError(f"suggested value {answer.value} not a candidate")
    else:
        raise OracleProtocolError(f"unknown query {query!r}")


# ---------------------------------------------------------------------------
# Oracle implementations


class OracleBase:
    """Ledger accounting and knownness tracking shared by all oracles.

    `visible` is the problem as the solver sees it at the start of the
    solve; the oracle mirrors which cells become known as it answers.
    """

    def __init__(self, visible: Ifcsp, record: bool = False):
        self.problem = visible
        self.ledger = EffortLedger()
        self._known = [[x is not None for x in c.table] for c in visible.constraints]
        self._examined = [[False] * len(c.table) for c in visible.constraints]
        self._unary_cidx: dict[int, int] = {}
        # var -> {other var: (constraint index, var is the second of the scope)}
        self._adj: dict[int, dict[int, tuple[int, bool]]] = {
            v: {} for v in range(visible.n)
        }
        for ci, c in enumerate(visible.constraints):
            if c.arity == 1:
                self._unary_cidx[c.scope[0]] = ci
            else:
                x, y = c.scope
                self._adj[x][y] = (ci, False)
                self._adj[y][x] = (ci, True)
        self.transcript: Optional[list[tuple[dict, dict]]] = [] if record else None
        self._next_qid = 0

    def is_known(self, ref: TupleRef) -> bool:
        return self._known[ref.cidx][ref.tidx]

    def answer(self, query: Query) -> Answer:
        self._check_query(query)
        ans = self._resolve(query)
        validate_answer(query, ans)
        self._account(query, ans)
        if self.transcript is not None:
            self.transcript.append(
                (query_to_json(query, self._next_qid), answer_to_json(ans))
            )
        self._next_qid += 1
        return ans

    def _check_query(self, query: Query) -> None:
        if isinstance(query, (RevealAll, RevealWorst, HasZero)):
            if not query.tuples:
                raise ContractViolation("reveal queries need at least one tuple")
            for t in query.tuples:
                if self.is_known(t):
                    raise ContractViolation(f"cell {t} is not hidden")
        elif isinstance(query, SuggestValue):
            if not query.candidates:
                raise ContractViolation("suggest_value needs candidates")
            if not 0 <= query.var < self.problem.n:
                raise ContractViolation(f"unknown variable {query.var}")

    def _examine(self, cidx: int, tidx: int) -> None:
        if not self._examined[cidx][tidx]:
            self._examined[cidx][tidx] = True
            self.ledger.effort += 1

    def _account(self, query: Query, ans: Answer) -> None:
        led = self.ledger
        led.queries += 1
        if isinstance(query, (RevealAll, RevealWorst, HasZero)):
            for t in query.tuples:
                self._examine(t.cidx, t.tidx)
        if isinstance(ans, Revealed):
            led.elicited += len(ans.cells)
            for t, _ in ans.cells:
                self._known[t.cidx][t.tidx] = True
        elif isinstance(ans, Worst):
            led.elicited += 1
            self._known[ans.ref.cidx][ans.ref.tidx] = True
        elif isinstance(ans, ZeroAt):
            led.elicited += 1
            self._known[ans.ref.cidx][ans.ref.tidx] = True
        elif isinstance(ans, NoZero):
            # the solver infers all queried cells are 1: known, but free
            for t in query.tuples:
                self._known[t.cidx][t.tidx] = True
        elif isinstance(ans, Suggested):
            assert isinstance(query, SuggestValue)
            m = self.problem.m
            known, exam = self._known, self._examined
            uci = self._unary_cidx[query.var]
            for cand in query.candidates:
                if not known[uci][cand] and not exam[uci][cand]:
                    exam[uci][cand] = True
                    led.effort += 1
            if query.context == "smart":
                adj = self._adj[query.var]
                for var, val in query.bound:
                    entry = adj.get(var)
                    if entry is None:
                        continue
                    ci, second = entry
                    krow, erow = known[ci], exam[ci]
                    for cand in query.candidates:
                        ti = val * m + cand if second else cand * m + val
                        if not krow[ti] and not erow[ti]:
                            erow[ti] = True
                            led.effort += 1

    def _resolve(self, query: Query) -> Answer:
        raise NotImplementedError


class SimulatedOracle(OracleBase):
    """Answers from a hidden ground truth (the complete instance)."""

    def __init__(self, visible: Ifcsp, truth: Ifcsp, record: bool = False):
        super().__init__(visible, record=record)
        self.truth = truth
        self._tabs = [c.table for c in truth.constraints]

    def truth_value(self, ref: TupleRef) -> float:
        v = self._tabs[ref.cidx][ref.tidx]
        assert v is not None
        return v

    def _resolve(self, query: Query) -> Answer:
        if isinstance(query, RevealAll):
            refs = sorted(query.tuples)
            return Revealed(tuple((t, self.truth_value(t)) for t in refs))
        if isinstance(query, RevealWorst):
            refs = sorted(query.tuples)
            vmin, tmin = min((self.truth_value(t), t) for t in refs)
            if vmin < query.known_min:
                return Worst(tmin, vmin)
            return NoneWorse()
        if isinstance(query, HasZero):
            for t in sorted(query.tuples):
                if self.truth_value(t) == 0.0:
                    return ZeroAt(t)
            return NoZero()
        if isinstance(query, SuggestValue):
            m = self.problem.m
            utab = self._tabs[self._unary_cidx[query.var]]
            scores = [utab[cand] for cand in query.candidates]
            if query.context == "smart":
                adj = self._adj[query.var]
                for var, val in query.bound:
                    entry = adj.get(var)
                    if entry is None:
                        continue
                    ci, second = entry
                    tab = self._tabs[ci]
                    for idx, cand in enumerate(query.candidates):
                        w = tab[val * m + cand] if second else tab[cand * m + val]
                        if w < scores[idx]:
                            scores[idx] = w
            best_score, best_val = -1.0, None
            for idx, cand in enumerate(query.candidates):
                if scores[idx] > best_score or (
                    scores[idx] == best_score and cand < best_val
                ):
                    best_score, best_val = scores[idx], cand
            return Suggested(best_val)
        raise OracleProtocolError(f"unknown query {query!r}")


class ScriptedOracle(OracleBase):
    """Replays canned answers, validating them against each incoming query.

    `entries` is a list of answers, or of (query_json, answer_json) pairs
    as produced by a recorded transcript; with pairs, the incoming query
    must match the recorded one exactly.
    """

    def __init__(self, visible: Ifcsp, entries: list):
        super().__init__(visible)
        self._entries = list(entries)
        self._pos = 0

    def _resolve(self, query: Query) -> Answer:
        if self._pos >= len(self._entries):
            raise OracleProtocolError("script exhausted")
        entry = self._entries[self._pos]
        self._pos += 1
        if isinstance(entry, (Revealed, Worst, NoneWorse, ZeroAt, NoZero, Suggested)):
            return entry
        if isinstance(entry, dict):
            return answer_from_json(entry)
        recorded_query, answer_json = entry  # (query, answer) transcript pair
        if query_to_json(query, 0) != {**recorded_query, "id": 0}:
            raise OracleProtocolError(
                f"replayed query #{self._pos - 1} diverges from the recording"
            )
        return answer_from_json(answer_json)


class RemoteOracle(OracleBase):
    """Blocks the solve until a human answer arrives through the session.

    The solver thread calls `answer`; the service thread delivers via
    `post_answer`.  A deadline (monotonic clock) aborts the solve with
    OracleTimeout when it passes with no answer.
    """

    def __init__(self, visible: Ifcsp, deadline: float, record: bool = True):
        super().__init__(visible, record=record)
        self.deadline = deadline
        self._cond = threading.Condition()
        self._pending: Optional[dict] = None  # query JSON with its id
        self._pending_query: Optional[Query] = None
        self._delivered: Optional[Answer] = None
        self._closed = False

    @property
    def pending(self) -> Optional[dict]:
        with self._cond:
            return self._pending

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def post_answer(self, answer_json: dict) -> None:
        """Validate and deliver a human answer for the pending query."""
        ans = answer_from_json(answer_json)
        with self._cond:
            if self._pending is None:
                raise OracleProtocolError("no pending query")
            if answer_json.get("id") != self._pending["id"]:
                raise OracleProtocolError(
                    f"stale answer: pending query is {self._pending['id']}"
                )
            validate_answer(self._pending_query, ans)
            self._delivered = ans
            self._cond.notify_all()

    def _resolve(self, query: Query) -> Answer:
        with self._cond:
            self._pending = query_to_json(query, self._next_qid)
            self._pending_query = query
            self._delivered = None
            while self._delivered is None and not self._closed:
                remaining = self.deadline - time.monotonic()
                if remaining <= 0:
                    self._pending = None
                    self._pending_query = None
                    raise OracleTimeout("session expired awaiting an answer")
                self._cond.wait(timeout=min(remaining, 0.5))
            if self._delivered is None:
                self._pending = None
                self._pending_query = None
                raise OracleTimeout("session closed")
            ans = self._delivered
            self._pending = None
            self._pending_query = None
            self._delivered = None
            return ans
