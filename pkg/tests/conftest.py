import itertools

import pytest

from ifcsp.core import Ifcsp, pref_of


def make_problem(n, m, constraints):
    """Shorthand: constraints as (scope, table) pairs; missing unaries filled."""
    return Ifcsp.create(n, m, constraints)


def enumerate_optimal(p):
    """Independent oracle: optimal assignments and preference by full enumeration."""
    best, sols = -1.0, []
    for combo in itertools.product(range(p.m), repeat=p.n):
        s = dict(enumerate(combo))
        v = pref_of(p, s)
        if v > best:
            best, sols = v, [s]
        elif v == best:
            sols.append(s)
    return sols, best


@pytest.fixture
def two_var_example():
    """Two variables, m=2, all-1.0 unaries, one binary table.

    Enumeration: (0,0)->0.2  (0,1)->0.5  (1,0)->0.9  (1,1)->0.1, so the
    optimum is (1,0) at 0.9.
    """
    return make_problem(2, 2, [((0, 1), [0.2, 0.5, 0.9, 0.1])])
