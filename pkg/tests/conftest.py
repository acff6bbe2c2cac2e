import pytest

from unamatch.core import Market, Problem, StrictRanking


def build_problem(n_homes, table, edges=None):
    """Compact problem builder: table maps child id -> (pref tuple, eval tuple).

    Homes are 1..n_homes, matching the fixture convention.
    """
    market = Market(table.keys(), range(1, n_homes + 1), edges)
    prefs = {c: StrictRanking(p) for c, (p, _) in table.items()}
    evals = {c: StrictRanking(e) for c, (_, e) in table.items()}
    return Problem(market, prefs, evals)


@pytest.fixture
def single_child():
    return build_problem(3, {0: ((1, 2, 3), (3, 1, 2))})
