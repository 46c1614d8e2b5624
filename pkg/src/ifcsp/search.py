"""Search workspace and branch-and-bound kernels.

A Workspace compiles a problem into position-indexed storage: variables
are arranged in a static search order (most constrained toward already
placed variables first, ties to the smallest id — the choice depends
only on the constraint graph, so the whole order is fixed up front), and
each position holds its unary row plus the binary tables toward earlier
positions.  Two parallel views are kept: unknown cells read as 1.0 in
the "1" view and as 0.0 in the "0" view.  Revealing a cell updates both
views in place.

Tables live twice: as numpy arrays feeding a numba kernel for complete
passes (no elicitation inside the tree), and as plain nested lists for
the python walk that interleaves elicitation.  The python reference pass
`_bb_python` mirrors the kernel's exact visit order for tracing and
cross-checks.  All passes prune a subtree exactly when its upper bound
fails to exceed the incumbent strictly, and return the first optimum met
in visit order.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from numba import njit

from .core import Assignment, Ifcsp, TupleRef, incomplete_tuples
from .errors import ContractViolation, IfcspError


def static_order(n: int, binary_scopes: list[tuple[int, ...]]) -> list[int]:
    """Variable order: repeatedly pick the unplaced variable with the most
    constraints toward placed ones, ties to the smallest id."""
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for x, y in binary_scopes:
        neighbors[x].add(y)
        neighbors[y].add(x)
    placed: set[int] = set()
    order = []
    while len(order) < n:
        best = min(
            (v for v in range(n) if v not in placed),
            key=lambda v: (-len(neighbors[v] & placed), v),
        )
        order.append(best)
        placed.add(best)
    return order


def node_budget(n: int, m: int) -> int:
    """Max value-binding events in one pass of depth-first search."""
    return sum(m**k for k in range(1, n + 1))


class Workspace:
    """Mutable search-side view of one problem instance."""

    def __init__(self, p: Ifcsp):
        self.p = p
        self.n, self.m = p.n, p.m
        self.order = static_order(p.n, p.binary_scopes())
        self.pos_of = {v: k for k, v in enumerate(self.order)}
        n, m = self.n, self.m

        self.u1 = np.ones((n, m))
        self.u0 = np.zeros((n, m))
        self.u_ref: dict[int, int] = {}  # position -> unary constraint index

        edge_pos: list[int] = []
        edge_meta: list[tuple[int, bool]] = []  # (cidx, flipped)
        ptr = [0]
        by_pair = {}
        for ci, c in enumerate(p.constraints):
            if c.arity == 1:
                self.u_ref[self.pos_of[c.scope[0]]] = ci
            else:
                by_pair[frozenset(c.scope)] = ci
        for k, var in enumerate(self.order):
            for j in range(k):
                ci = by_pair.get(frozenset((var, self.order[j])))
                if ci is not None:
                    edge_pos.append(j)
                    # tables are row-major over the constraint's own scope
                    # (x, y); flipped means this edge's owner is y
                    edge_meta.append((ci, p.constraints[ci].scope[0] != var))
            ptr.append(len(edge_pos))
        self.eptr = ptr
        self.epos = edge_pos
        self.edge_ptr = np.array(ptr, dtype=np.int64)
        self.edge_pos = np.array(edge_pos, dtype=np.int64)
        self.edge_meta = edge_meta
        E = len(edge_pos)
        self.edge_t1 = np.ones((E, m, m)) if E else np.zeros((0, m, m))
        self.edge_t0 = np.zeros((E, m, m))
        self._edge_of_cidx: dict[int, int] = {}

        # plain-list mirrors for the python search (flat [own*m + other])
        self.u1l = [[1.0] * m for _ in range(n)]
        self.u0l = [[0.0] * m for _ in range(n)]
        self.ukl = [[False] * m for _ in range(n)]
        self.e1l = [[1.0] * (m * m) for _ in range(E)]
        self.e0l = [[0.0] * (m * m) for _ in range(E)]
        self.ekl = [[False] * (m * m) for _ in range(E)]

        for k in range(n):
            ci = self.u_ref[k]
            for val, cell in enumerate(p.constraints[ci].table):
                if cell is not None:
                    self.u1[k, val] = self.u0[k, val] = cell
                    self.u1l[k][val] = self.u0l[k][val] = cell
                    self.ukl[k][val] = True
        for e, (ci, flipped) in enumerate(edge_meta):
            self._edge_of_cidx[ci] = e
            tab = p.constraints[ci].table
            for a in range(m):
                for b in range(m):
                    cell = tab[a * m + b]
                    own, other = (b, a) if flipped else (a, b)
                    if cell is not None:
                        self.edge_t1[e, own, other] = cell
                        self.edge_t0[e, own, other] = cell
                        self.e1l[e][own * m + other] = cell
                        self.e0l[e][own * m + other] = cell
                        self.ekl[e][own * m + other] = True
        self.hidden: set[TupleRef] = set(incomplete_tuples(p))
        self._uver = [0] * n  # unary row versions, for the value-order cache
        self._vo_cache: dict[tuple[int, bool], tuple[int, list[int]]] = {}

    # -- reveals ------------------------------------------------------------

    def apply_reveal(self, ref: TupleRef, value: float) -> None:
        c = self.p.constraints[ref.cidx]
        if c.arity == 1:
            k = self.pos_of[c.scope[0]]
            if self.ukl[k][ref.tidx]:
                raise ContractViolation(f"cell {ref} already known")
            self.u1[k, ref.tidx] = self.u0[k, ref.tidx] = value
            self.u1l[k][ref.tidx] = self.u0l[k][ref.tidx] = value
            self.ukl[k][ref.tidx] = True
            self._uver[k] += 1
        else:
            e = self._edge_of_cidx[ref.cidx]
            a, b = divmod(ref.tidx, self.m)
            own, other = (b, a) if self.edge_meta[e][1] else (a, b)
            flat = own * self.m + other
            if self.ekl[e][flat]:
                raise ContractViolation(f"cell {ref} already known")
            self.edge_t1[e, own, other] = self.edge_t0[e, own, other] = value
            self.e1l[e][flat] = self.e0l[e][flat] = value
            self.ekl[e][flat] = True
        self.hidden.remove(ref)

    # -- cell lookups along the search path ----------------------------------

    def _edge_cell_ref(self, e: int, own_val: int, other_val: int) -> TupleRef:
        ci, flipped = self.edge_meta[e]
        a, b = (other_val, own_val) if flipped else (own_val, other_val)
        return TupleRef(ci, a * self.m + b)

    def node_cells(
        self, k: int, val: int, vals: list[int]
    ) -> tuple[float, list[TupleRef]]:
        """Known minimum and hidden refs among the cells a binding adds:
        position k's unary cell at `val` plus its edges toward earlier
        positions (bound to vals)."""
        known_min = 1.0
        hidden: list[TupleRef] = []
        if self.ukl[k][val]:
            known_min = self.u1l[k][val]
        else:
            hidden.append(TupleRef(self.u_ref[k], val))
        row = val * self.m
        for e in range(self.eptr[k], self.eptr[k + 1]):
            flat = row + vals[self.epos[e]]
            if self.ekl[e][flat]:
                w = self.e1l[e][flat]
                if w < known_min:
                    known_min = w
            else:
                hidden.append(self._edge_cell_ref(e, val, vals[self.epos[e]]))
        return known_min, hidden

    def node_min_u1(self, k: int, val: int, vals: list[int]) -> float:
        """Min over the cells a binding adds, on the unknown-as-1 view."""
        ub = self.u1l[k][val]
        row = val * self.m
        e1l, epos = self.e1l, self.epos
        for e in range(self.eptr[k], self.eptr[k + 1]):
            w = e1l[e][row + vals[epos[e]]]
            if w < ub:
                ub = w
        return ub

    def projected_hidden(self, vals: list[int]) -> list[TupleRef]:
        """Hidden cells projected by a total assignment (position-indexed values)."""
        hidden = []
        for k in range(self.n):
            val = vals[k]
            if not self.ukl[k][val]:
                hidden.append(TupleRef(self.u_ref[k], val))
            row = val * self.m
            for e in range(self.eptr[k], self.eptr[k + 1]):
                other = vals[self.epos[e]]
                if not self.ekl[e][row + other]:
                    hidden.append(self._edge_cell_ref(e, val, other))
        return hidden

    def projected_min_u1(self, vals: list[int]) -> float:
        best = 1.0
        for k in range(self.n):
            best = min(best, self.node_min_u1(k, vals[k], vals))
        return best

    def assignment_of(self, vals) -> Assignment:
        return {self.order[k]: int(vals[k]) for k in range(self.n)}

    def value_order(self, k: int, zero_view: bool) -> list[int]:
        """Values at position k, by decreasing unary preference on the chosen
        view (unknown as 0 or 1), ties to the smallest value."""
        hit = self._vo_cache.get((k, zero_view))
        if hit is not None and hit[0] == self._uver[k]:
            return hit[1]
        row = self.u0l[k] if zero_view else self.u1l[k]
        order = sorted(range(self.m), key=lambda v: (-row[v], v))
        self._vo_cache[(k, zero_view)] = (self._uver[k], order)
        return order

    # -- complete-view passes -------------------------------------------------

    def bb_pass(
        self,
        view: str,
        zero_order: bool,
        lb: Optional[float],
        trace: Optional[Callable[[str], None]] = None,
    ) -> tuple[Optional[list[int]], float, int]:
        """One full branch-and-bound pass on a completion view.

        view: "one" or "zero" — which completion the bounds read.
        zero_order: order values by the unknown-as-0 unary row instead of
        the unknown-as-1 row.
        lb: strict lower bound; None accepts any first leaf.
        Returns (position-indexed values or None, preference, node count).
        """
        unary = self.u0 if view == "zero" else self.u1
        tabs = self.edge_t0 if view == "zero" else self.edge_t1
        orow = self.u0 if zero_order else self.u1
        val_order = np.argsort(-orow, axis=1, kind="stable").astype(np.int64)
        bound = float(-1.0 if lb is None else lb)
        if trace is None:
            found, sol, pref, nodes = _bb_kernel(
                self.m, unary, val_order, self.edge_ptr, self.edge_pos, tabs, bound
            )
            sol_list = [int(x) for x in sol] if found else None
        else:
            sol_list, pref, nodes = _bb_python(
                self.m, unary, val_order, self.edge_ptr, self.edge_pos, tabs, bound, trace
            )
        budget = node_budget(self.n, self.m)
        if nodes > budget:
            raise IfcspError(f"search visited {nodes} nodes, budget {budget}")
        if sol_list is None:
            return None, bound, int(nodes)
        return sol_list, float(pref), int(nodes)


@njit(cache=True)
def _bb_kernel(m, unary, val_order, edge_ptr, edge_pos, edge_tab, lb):
    n = unary.shape[0]
    vals = np.full(n, -1, np.int64)
    best = np.full(n, -1, np.int64)
    best_pref = lb
    found = False
    ubs = np.ones(n + 1)
    idx = np.zeros(n, np.int64)
    nodes = 0
    k = 0
    while k >= 0:
        if idx[k] < m:
            v = val_order[k, idx[k]]
            idx[k] += 1
            nodes += 1
            ub = ubs[k]
            u = unary[k, v]
            if u < ub:
                ub = u
            for e in range(edge_ptr[k], edge_ptr[k + 1]):
                w = edge_tab[e, v, vals[edge_pos[e]]]
                if w < ub:
                    ub = w
            if ub > best_pref:
                vals[k] = v
                if k == n - 1:
                    best_pref = ub
                    found = True
                    for q in range(n):
                        best[q] = vals[q]
                else:
                    ubs[k + 1] = ub
                    k += 1
                    idx[k] = 0
        else:
            k -= 1
    return found, best, best_pref, nodes


def _bb_python(m, unary, val_order, edge_ptr, edge_pos, edge_tab, lb, trace):
    """Reference walk with the kernel's exact visit order, plus tracing."""
    n = unary.shape[0]
    vals = [-1] * n
    best = None
    best_pref = lb
    ubs = [1.0] * (n + 1)
    idx = [0] * n
    nodes = 0
    k = 0
    while k >= 0:
        if idx[k] < m:
            v = int(val_order[k, idx[k]])
            idx[k] += 1
            nodes += 1
            ub = ubs[k]
            u = float(unary[k, v])
            if u < ub:
                ub = u
            for e in range(edge_ptr[k], edge_ptr[k + 1]):
                w = float(edge_tab[e, v, vals[edge_pos[e]]])
                if w < ub:
                    ub = w
            trace(f"node pos={k} val={v} ub={ub!r}")
            if ub > best_pref:
                vals[k] = v
                if k == n - 1:
                    best_pref = ub
                    best = vals.copy()
                    trace(f"leaf pref={ub!r} improve")
                else:
                    ubs[k + 1] = ub
                    k += 1
                    idx[k] = 0
            else:
                trace(f"prune pos={k} val={v}")
        else:
            k -= 1
    return best, best_pref, nodes
