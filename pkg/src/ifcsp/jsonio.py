"""JSON wire format for problems and solve reports.

Problem format::

    { "n": int, "m": int,
      "constraints": [ { "scope": [i] | [i, j],
                         "table": [ number | "?", ... ] } ] }

Tables are row-major over domain values; "?" marks an unrevealed cell.
The same format with no "?" entries serializes completions and ground
truths.  Variables missing a unary constraint get an implicit all-1.0
unary table on load, materialized so cell addresses are stable.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .core import Ifcsp, Preference
from .errors import ContractViolation

UNKNOWN = "?"


def problem_to_json(p: Ifcsp) -> dict[str, Any]:
    return {
        "n": p.n,
        "m": p.m,
        "constraints": [
            {
                "scope": list(c.scope),
                "table": [UNKNOWN if x is None else x for x in c.table],
            }
            for c in p.constraints
        ],
    }


def _cell_from_json(x) -> Preference:
    if x == UNKNOWN:
        return None
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ContractViolation(f"table cell must be a number or {UNKNOWN!r}, got {x!r}")
    return float(x)


def problem_from_json(d: dict[str, Any]) -> Ifcsp:
    try:
        n, m = int(d["n"]), int(d["m"])
        raw = d["constraints"]
    except (KeyError, TypeError, ValueError) as e:
        raise ContractViolation(f"malformed problem document: {e}")
    constraints = []
    for entry in raw:
        scope = tuple(int(v) for v in entry["scope"])
        table = tuple(_cell_from_json(x) for x in entry["table"])
        constraints.append((scope, table))
    return Ifcsp.create(n, m, constraints)


def dumps_canonical(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def load_problem(path: str | Path) -> Ifcsp:
    with open(path, encoding="utf-8") as f:
        return problem_from_json(json.load(f))


def save_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps_canonical(obj) + "\n", encoding="utf-8")
