"""HTTP facade for interactive solve sessions: a human acts as the oracle.

Endpoints (JSON bodies; schemas shared with the oracle module):

- POST /sessions            {problem | gen, strategy, ...} -> {id}
- GET  /sessions/{id}/query    pending query, or the session state
- POST /sessions/{id}/answer   one answer for the pending query
- GET  /sessions/{id}/progress ledger, best-so-far, quality trace
- GET  /healthz

Each session runs its solver in a thread that blocks on a RemoteOracle;
the client long-polls the query endpoint and posts answers.  Ground
truth of generated sessions stays server-side (used only to check the
finished result, never transmitted).  Sessions expire after a TTL and
abort with their transcript preserved, so a run can be resumed by
replaying the transcript against a fresh session.
"""

from __future__ import annotations

import threading
import time
import uuid
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .core import Ifcsp
from .errors import (
    ContractViolation,
    IfcspError,
    InconsistentStrategy,
    OracleProtocolError,
    OracleTimeout,
    SizeGuardExceeded,
)
from .generate import GenParams, Kind, generate
from .jsonio import problem_from_json
from .oracle import RemoteOracle
from .solve import BASELINE, run_strategy, verify_nos


class Session:
    def __init__(self, sid: str, problem: Ifcsp, strategy: str, hard: bool,
                 ttl: float, truth: Optional[Ifcsp], baseline_k: int, seed: int):
        self.id = sid
        self.problem = problem
        self.strategy = strategy
        self.hard = hard
        self.truth = truth
        self.created = time.monotonic()
        self.expires = self.created + ttl
        self.state = "solving"  # solving | awaiting_answer | done | aborted
        self.result: Optional[dict] = None
        self.error: Optional[str] = None
        self.lock = threading.Lock()
        self.oracle = RemoteOracle(problem, deadline=self.expires)
        self.best: Optional[dict] = None
        self.trace: list[tuple[int, float]] = []
        self.baseline_k = baseline_k
        self.seed = seed
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _progress(self, lb: float, sol) -> None:
        with self.lock:
            self.trace.append((self.oracle.ledger.queries, lb))
            self.best = {"pref": lb, "sol": [sol.get(v) for v in range(self.problem.n)]}

    def _run(self) -> None:
        try:
            result = run_strategy(
                self.strategy, self.problem, self.oracle, hard=self.hard,
                baseline_k=self.baseline_k, baseline_seed=self.seed,
                progress=self._progress,
            )
            payload = result.to_json()
            if self.truth is not None:
                try:
                    payload["verified"] = verify_nos(
                        result.problem, result.sol, result.pref
                    )
                except SizeGuardExceeded:
                    payload["verified"] = None
            with self.lock:
                self.result = payload
                self.state = "done"
        except OracleTimeout:
            with self.lock:
                self.state = "aborted"
                self.error = "session expired before the user answered"
        except (IfcspError, Exception) as e:  # noqa: BLE001 - surface to the client
            with self.lock:
                self.state = "aborted"
                self.error = str(e)

    def expired(self) -> bool:
        return time.monotonic() > self.expires

    def abort_expired(self) -> None:
        with self.lock:
            if self.state in ("solving", "awaiting_answer"):
                self.state = "aborted"
                self.error = "session ttl expired"
        self.oracle.close()

    def snapshot_state(self) -> str:
        # self.state reads are atomic; the oracle guards its own pending slot
        state = self.state
        if state == "solving" and self.oracle.pending is not None:
            return "awaiting_answer"
        return state

    def transcript_json(self) -> list:
        return [list(pair) for pair in (self.oracle.transcript or [])]


def create_app(session_ttl: float = 1800.0) -> FastAPI:
    app = FastAPI(title="ifcsp elicitation service")
    sessions: dict[str, Session] = {}
    guard = threading.Lock()

    def get_session(sid: str) -> Optional[Session]:
        with guard:
            s = sessions.get(sid)
        if s is not None and s.expired():
            s.abort_expired()
        return s

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        strategy = body.get("strategy", "DPI.WORST.BRANCH")
        hard = bool(body.get("hard", False))
        truth = None
        meta: dict = {}
        try:
            if "problem" in body:
                problem = problem_from_json(body["problem"])
            elif "gen" in body:
                g = body["gen"]
                params = GenParams(
                    n=int(g.get("n", 10)), m=int(g.get("m", 5)),
                    d=int(g.get("d", 50)), t=int(g.get("t", 10)),
                    i=int(g.get("i", 30)), seed=int(g.get("seed", 0)),
                    kind=Kind(g.get("kind", "fuzzy")),
                )
                inst = generate(params)
                problem, truth = inst.visible, inst.truth
                hard = hard or params.kind is Kind.HARD
                meta["gen"] = params.to_json()
            else:
                return JSONResponse({"error": "need problem or gen"}, status_code=422)
            if strategy.strip().upper() != BASELINE:
                from .solve import StrategyConfig

                StrategyConfig.parse(strategy)
        except InconsistentStrategy as e:
            return JSONResponse({"error": str(e)}, status_code=422)
        except (ContractViolation, ValueError, KeyError, TypeError) as e:
            return JSONResponse({"error": f"bad problem: {e}"}, status_code=422)
        sid = uuid.uuid4().hex
        session = Session(
            sid, problem, strategy, hard, session_ttl, truth,
            baseline_k=int(body.get("baseline_k", 1)), seed=int(body.get("seed", 0)),
        )
        with guard:
            sessions[sid] = session
        session.thread.start()
        return {"id": sid, "strategy": strategy, **meta}

    @app.get("/sessions/{sid}/query")
    def get_query(sid: str):
        s = get_session(sid)
        if s is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        state = s.snapshot_state()
        if state == "awaiting_answer":
            return {"state": state, "query": s.oracle.pending}
        if state == "done":
            return {"state": state, "result": s.result}
        if state == "aborted":
            return {"state": state, "error": s.error,
                    "transcript": s.transcript_json()}
        return {"state": state}

    @app.post("/sessions/{sid}/answer")
    def post_answer(sid: str, body: dict):
        s = get_session(sid)
        if s is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        if s.snapshot_state() in ("done", "aborted"):
            return JSONResponse({"error": "session is finished"}, status_code=409)
        try:
            s.oracle.post_answer(body)
        except OracleProtocolError as e:
            return JSONResponse({"error": str(e)}, status_code=422)
        # give the solver thread a moment to advance to the next query
        for _ in range(200):
            state = s.snapshot_state()
            if state != "solving":
                break
            time.sleep(0.005)
        return {"ok": True, "state": s.snapshot_state()}

    @app.get("/sessions/{sid}/progress")
    def get_progress(sid: str):
        s = get_session(sid)
        if s is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        state = s.snapshot_state()
        with s.lock:
            out = {
                "state": state,
                "ledger": s.oracle.ledger.to_json(),
                "best": s.best,
                "trace": [[q, lb] for q, lb in s.trace],
            }
            if state in ("done", "aborted"):
                out["transcript"] = s.transcript_json()
            if state == "done":
                out["result"] = s.result
            if s.error:
                out["error"] = s.error
        return out

    return app
