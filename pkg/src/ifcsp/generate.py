"""Random instance generation with hidden ground truth.

Pipeline for a fuzzy instance (all draws from one SplitMix64 stream, in
this exact order, so instances reproduce from the seed):

1. Enumerate the n(n-1)/2 variable pairs in lexicographic order and pick
   d% of them (round half up) by partial Fisher-Yates; the chosen scopes
   are sorted.  Constraints are ordered: unary for variables 0..n-1,
   then the chosen binary scopes.
2. Per constraint, in order: draw a uniform value in (0, 1] for each of
   the m (unary) or m*m (binary) cells; set t% of the cells (round half
   up, sampled without replacement) to 0.0; mark i% of the cells (same
   rounding and sampling) as hidden.

Hard instances skip the value draws (every cell starts at exactly 1.0)
but zero and hide cells the same way, so preferences are all 0 or 1.

Temporal instances model difference constraints between time points:
each chosen binary scope (x, y) gets an allowed window a <= x - y <= b
with a single-peaked triangular preference profile inside the window and
0.0 outside; unary tables are all 1.0.  There is no zeroing step (the
window already forces zeros); hiding applies as above.  Per-constraint
draws: two ints in [-(m-1), m-1] (a = min, b = max), the integer peak
position in [a, b], the peak preference in (0, 1].

The ground truth keeps every pre-hiding value; the visible problem has
the hidden cells as unknowns.  A hidden cell may well hold a 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import Constraint, Ifcsp
from .errors import ContractViolation
from .rng import SplitMix64


class Kind(str, Enum):
    FUZZY = "fuzzy"
    HARD = "hard"
    TEMPORAL = "temporal"


@dataclass(frozen=True)
class GenParams:
    """Generator knobs: size, density/tightness/incompleteness percents, seed."""

    n: int
    m: int
    d: int
    t: int
    i: int
    seed: int
    kind: Kind = Kind.FUZZY

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ContractViolation("need n >= 1 and m >= 1")
        for name in ("d", "t", "i"):
            v = getattr(self, name)
            if not 0 <= v <= 100:
                raise ContractViolation(f"{name} must be in 0..100, got {v}")

    def to_json(self) -> dict:
        return {
            "n": self.n, "m": self.m, "d": self.d, "t": self.t, "i": self.i,
            "seed": self.seed, "kind": self.kind.value,
        }


@dataclass(frozen=True)
class GeneratedInstance:
    visible: Ifcsp
    truth: Ifcsp
    params: GenParams


def pct_count(pct: int, size: int) -> int:
    """Percentage of a count, rounded half up (exact integer arithmetic)."""
    return (pct * size + 50) // 100


def _choose_scopes(rng: SplitMix64, n: int, d: int) -> list[tuple[int, int]]:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    want = pct_count(d, len(pairs))
    chosen = rng.sample(len(pairs), want) if pairs else []
    return sorted(pairs[k] for k in chosen)


def _mask(rng: SplitMix64, truth: list[float], i: int) -> list[float | None]:
    hidden = rng.sample(len(truth), pct_count(i, len(truth)))
    visible: list[float | None] = list(truth)
    for k in hidden:
        visible[k] = None
    return visible


def generate(params: GenParams) -> GeneratedInstance:
    """Generate an instance of the requested kind (deterministic in the seed)."""
    if params.kind is Kind.TEMPORAL:
        return generate_temporal(params)
    rng = SplitMix64(params.seed)
    scopes: list[tuple[int, ...]] = [(v,) for v in range(params.n)]
    scopes += _choose_scopes(rng, params.n, params.d)
    truth_tables, visible_tables = [], []
    for scope in scopes:
        size = params.m ** len(scope)
        if params.kind is Kind.HARD:
            values = [1.0] * size
        else:
            values = [rng.next_float() for _ in range(size)]
        for k in rng.sample(size, pct_count(params.t, size)):
            values[k] = 0.0
        truth_tables.append(values)
        visible_tables.append(_mask(rng, values, params.i))
    return _build(params, scopes, truth_tables, visible_tables)


def difference_table(m: int, a: int, b: int, peak: int, peak_val: float) -> list[float]:
    """Row-major table over (x, y) scoring x - y: triangular on [a, b], 0 outside.

    The profile rises linearly to peak_val at x - y = peak and falls
    after it; both flanks stay strictly positive inside the window.
    """
    if not a <= peak <= b:
        raise ContractViolation("peak must lie within [a, b]")
    left = peak - a
    right = b - peak
    table = []
    for x in range(m):
        for y in range(m):
            delta = x - y
            if delta < a or delta > b:
                table.append(0.0)
            elif delta <= peak:
                table.append(peak_val * (1.0 - (peak - delta) / (left + 1.0)))
            else:
                table.append(peak_val * (1.0 - (delta - peak) / (right + 1.0)))
    return table


def generate_temporal(params: GenParams) -> GeneratedInstance:
    if params.kind is not Kind.TEMPORAL:
        raise ContractViolation("generate_temporal requires kind=temporal")
    rng = SplitMix64(params.seed)
    scopes: list[tuple[int, ...]] = [(v,) for v in range(params.n)]
    scopes += _choose_scopes(rng, params.n, params.d)
    lim = params.m - 1
    truth_tables, visible_tables = [], []
    for scope in scopes:
        if len(scope) == 1:
            values = [1.0] * params.m
        else:
            r1 = rng.next_in(-lim, lim)
            r2 = rng.next_in(-lim, lim)
            a, b = min(r1, r2), max(r1, r2)
            peak = rng.next_in(a, b)
            values = difference_table(params.m, a, b, peak, rng.next_float())
        truth_tables.append(values)
        visible_tables.append(_mask(rng, values, params.i))
    return _build(params, scopes, truth_tables, visible_tables)


def _build(params, scopes, truth_tables, visible_tables) -> GeneratedInstance:
    truth = Ifcsp(
        params.n, params.m,
        tuple(Constraint(s, tuple(t)) for s, t in zip(scopes, truth_tables)),
    )
    visible = Ifcsp(
        params.n, params.m,
        tuple(Constraint(s, tuple(t)) for s, t in zip(scopes, visible_tables)),
    )
    return GeneratedInstance(visible=visible, truth=truth, params=params)
