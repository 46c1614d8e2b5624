"""Problem model and preference semantics for incomplete fuzzy constraint problems.

A problem is a set of unary and binary constraints over n variables with
a uniform integer domain 0..m-1.  Every constraint carries a dense
preference table; a cell is either a known preference in [0, 1] or None,
meaning the preference exists but has not been revealed.  The preference
of a total assignment is the minimum over the known preferences of its
projections onto the constraints; unknown cells are skipped, and the
minimum over an empty set of known cells is 1 (the top of the fuzzy
scale), so problems stay comparable as cells get revealed.

Problems are immutable; `reveal` returns a new problem with one more
known cell.  Sharing a problem across threads read-only is safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import ContractViolation

# A table cell: a preference in [0, 1], or None while unrevealed.
Preference = Optional[float]

# A (possibly partial) assignment of domain values to variables.
Assignment = dict[int, int]


class TupleRef(NamedTuple):
    """Stable address of one table cell: constraint index, row-major cell index."""

    cidx: int
    tidx: int


class CompletionKind(Enum):
    ZERO = 0.0
    ONE = 1.0


def _check_value(v) -> float:
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise ContractViolation(f"preference must be a number in [0, 1], got {v!r}")
    if not 0.0 <= f <= 1.0:
        raise ContractViolation(f"preference {f} outside [0, 1]")
    return f


@dataclass(frozen=True)
class Constraint:
    """One unary or binary constraint with a dense preference table.

    The table is row-major over the scope's domains: cell v for a unary
    scope (x,), cell a*m+b for a binary scope (x, y) at x=a, y=b.
    """

    scope: tuple[int, ...]
    table: tuple[Preference, ...]

    @property
    def arity(self) -> int:
        return len(self.scope)


@dataclass(frozen=True)
class Ifcsp:
    """An incomplete fuzzy constraint problem over dense integer variables."""

    n: int
    m: int
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ContractViolation("need n >= 1 and m >= 1")
        seen_scopes = set()
        unary_vars = set()
        for c in self.constraints:
            if c.arity not in (1, 2):
                raise ContractViolation(f"scope arity must be 1 or 2, got {c.scope}")
            if len(set(c.scope)) != c.arity:
                raise ContractViolation(f"scope variables must be distinct: {c.scope}")
            for v in c.scope:
                if not 0 <= v < self.n:
                    raise ContractViolation(f"variable {v} outside 0..{self.n - 1}")
            key = frozenset(c.scope)
            if key in seen_scopes:
                raise ContractViolation(f"duplicate constraint on scope {c.scope}")
            seen_scopes.add(key)
            if len(c.table) != self.m**c.arity:
                raise ContractViolation(
                    f"table for scope {c.scope} has {len(c.table)} cells, "
                    f"expected {self.m ** c.arity}"
                )
            for cell in c.table:
                if cell is not None:
                    _check_value(cell)
            if c.arity == 1:
                unary_vars.add(c.scope[0])
        if unary_vars != set(range(self.n)):
            missing = sorted(set(range(self.n)) - unary_vars)
            raise ContractViolation(f"variables without a unary constraint: {missing}")

    @classmethod
    def create(
        cls, n: int, m: int, constraints: Iterable[tuple[Sequence[int], Sequence[Preference]]]
    ) -> "Ifcsp":
        """Build a problem, adding an all-1.0 unary table for any variable without one."""
        built = [
            Constraint(tuple(scope), tuple(None if x is None else float(x) for x in table))
            for scope, table in constraints
        ]
        have_unary = {c.scope[0] for c in built if c.arity == 1}
        for v in range(n):
            if v not in have_unary:
                built.append(Constraint((v,), (1.0,) * m))
        return cls(n, m, tuple(built))

    def binary_scopes(self) -> list[tuple[int, ...]]:
        return [c.scope for c in self.constraints if c.arity == 2]


def cell_index(c: Constraint, m: int, s: Assignment) -> int:
    """Row-major cell index of constraint c under an assignment binding its scope."""
    for v in c.scope:
        if not 0 <= s[v] < m:
            raise ContractViolation(f"value {s[v]} for variable {v} outside 0..{m - 1}")
    if c.arity == 1:
        return s[c.scope[0]]
    return s[c.scope[0]] * m + s[c.scope[1]]


def ref_values(p: Ifcsp, ref: TupleRef) -> tuple[int, ...]:
    """Decode a cell address back to the domain values it refers to."""
    c = p.constraints[ref.cidx]
    if c.arity == 1:
        return (ref.tidx,)
    return (ref.tidx // p.m, ref.tidx % p.m)


def cell_at(p: Ifcsp, ref: TupleRef) -> Preference:
    if not 0 <= ref.cidx < len(p.constraints):
        raise ContractViolation(f"no constraint {ref.cidx}")
    c = p.constraints[ref.cidx]
    if not 0 <= ref.tidx < len(c.table):
        raise ContractViolation(f"no cell {ref.tidx} in constraint {ref.cidx}")
    return c.table[ref.tidx]


def pref_of(p: Ifcsp, s: Assignment) -> float:
    """Preference of a total assignment: min over the known projected cells.

    Unknown cells are skipped; if every projection is unknown the result
    is 1.0 (empty minimum = top of the scale).
    """
    if len(s) != p.n or set(s) != set(range(p.n)):
        raise ContractViolation("pref_of requires a total assignment")
    best = 1.0
    for c in p.constraints:
        v = c.table[cell_index(c, p.m, s)]
        if v is not None and v < best:
            best = v
    return best


def completion(p: Ifcsp, kind: CompletionKind) -> Ifcsp:
    """Replace every unknown cell with 0.0 or 1.0."""
    fill = kind.value
    out = tuple(
        Constraint(c.scope, tuple(fill if x is None else x for x in c.table))
        for c in p.constraints
    )
    return Ifcsp(p.n, p.m, out)


def incomplete_tuples(p: Ifcsp) -> list[TupleRef]:
    """Addresses of all unknown cells, in (constraint, cell) order."""
    return [
        TupleRef(ci, ti)
        for ci, c in enumerate(p.constraints)
        for ti, x in enumerate(c.table)
        if x is None
    ]


def is_complete(p: Ifcsp) -> bool:
    return all(x is not None for c in p.constraints for x in c.table)


def reveal(p: Ifcsp, ref: TupleRef, value: float) -> Ifcsp:
    """A new problem identical to p except cell `ref` now holds `value`."""
    if cell_at(p, ref) is not None:
        raise ContractViolation(f"cell {ref} is already known")
    return apply_reveals(p, [(ref, value)])


def apply_reveals(p: Ifcsp, items: Iterable[tuple[TupleRef, float]]) -> Ifcsp:
    """Reveal many cells at once (single rebuild)."""
    tables = [list(c.table) for c in p.constraints]
    for ref, value in items:
        cell_at(p, ref)  # bounds check
        if tables[ref.cidx][ref.tidx] is not None:
            raise ContractViolation(f"cell {ref} is already known")
        tables[ref.cidx][ref.tidx] = _check_value(value)
    out = tuple(
        Constraint(c.scope, tuple(t)) for c, t in zip(p.constraints, tables)
    )
    return Ifcsp(p.n, p.m, out)


def projected_tuples(p: Ifcsp, s: Assignment) -> list[tuple[TupleRef, Preference]]:
    """Cells of all constraints whose scope is fully bound by s, at the bound values."""
    out = []
    for ci, c in enumerate(p.constraints):
        if all(v in s for v in c.scope):
            ti = cell_index(c, p.m, s)
            out.append((TupleRef(ci, ti), c.table[ti]))
    return out


def known_projection_min(p: Ifcsp, s: Assignment) -> float:
    """Min over the known projected cells of s; 1.0 if none are known."""
    best = 1.0
    for _, v in projected_tuples(p, s):
        if v is not None and v < best:
            best = v
    return best
