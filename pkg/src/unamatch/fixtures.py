"""Canonical small markets exercising the corners of the agreement calculus.

Each fixture is a market where something sharp happens: efficiency and
agreement-maximality clash, every matching is agreement-maximal but only one
is efficient, or truncation reports pay off. The ``examples`` CLI verb
replays all of them against their expected outcomes as a golden suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .core import Market, Matching, Problem, StrictRanking


def _problem(n_homes: int, table: dict[str, tuple[tuple[int, ...], tuple[int, ...]]]) -> tuple[Problem, dict[str, int]]:
    names = sorted(table)
    ids = {name: i for i, name in enumerate(names)}
    market = Market(ids.values(), range(1, n_homes + 1))
    prefs = {ids[n]: StrictRanking(table[n][0]) for n in names}
    evals = {ids[n]: StrictRanking(table[n][1]) for n in names}
    return Problem(market, prefs, evals), ids


def efficiency_clash() -> tuple[Problem, dict[str, int]]:
    """4 children x 4 homes with exactly one agreement-maximal matching,
    (3, 2, 1, 4), which is not efficient (it is Pareto dominated by
    (2, 3, 1, 4)) but is constrained-efficient."""
    return _problem(
        4,
        {
            "a": ((1, 2, 3, 4), (4, 3, 1, 2)),
            "b": ((1, 3, 2, 4), (2, 3, 1, 4)),
            "c": ((1, 2, 3, 4), (1, 2, 3, 4)),
            "d": ((4, 3, 2, 1), (4, 3, 2, 1)),
        },
    )


def all_unanimous_market() -> tuple[Problem, dict[str, int]]:
    """3 x 3 market where the two orders are so opposed that every home is
    agreed-best for every child: all six full matchings are agreement-
    maximal, yet only (1, 2, 3) is efficient."""
    return _problem(
        3,
        {
            "a": ((1, 2, 3), (3, 2, 1)),
            "b": ((2, 1, 3), (3, 1, 2)),
            "c": ((3, 2, 1), (1, 2, 3)),
        },
    )


def truncation_pays_market() -> tuple[Problem, dict[str, int]]:
    """2 children x 3 homes, identical rankings: the agreement-maximal
    matchings are exactly (1, 3) and (3, 1), and whichever is selected, the
    child relegated to 3 profits by reporting only 2 as acceptable."""
    return _problem(
        3,
        {
            "a": ((1, 2, 3), (3, 1, 2)),
            "b": ((1, 2, 3), (3, 1, 2)),
        },
    )


def worst_case_truncation_market() -> tuple[Problem, dict[str, int]]:
    """2 children x 4 homes. For child b the misreport (4, 2, 1) makes every
    home but 3 agreed-best, lifting her worst consistent match from 3 to 4:
    a worst-case manipulation against any agreement-maximal mechanism."""
    return _problem(
        4,
        {
            "a": ((1, 2, 3, 4), (1, 2, 3, 4)),
            "b": ((1, 2, 4, 3), (3, 1, 2, 4)),
        },
    )


@dataclass(frozen=True)
class FixtureResult:
    name: str
    passed: bool
    detail: str


def _check(name: str, fn: Callable[[], tuple[bool, str]]) -> FixtureResult:
    ok, detail = fn()
    return FixtureResult(name, ok, detail)


def matching_of(ids: dict[str, int], assignment: dict[str, int]) -> Matching:
    return Matching({ids[name]: h for name, h in assignment.items()})


def run_all(only: str | None = None) -> list[FixtureResult]:
    """Replay every fixture against its expected outcome."""
    from . import oracle
    from .mechanisms import TieBreakPolicy, asdi_commitments

    checks: dict[str, Callable[[], tuple[bool, str]]] = {}

    def clash() -> tuple[bool, str]:
        problem, ids = efficiency_clash()
        expected = matching_of(ids, {"a": 3, "b": 2, "c": 1, "d": 4})
        found = oracle.unanimous_matchings(problem)
        ok = found == [expected]
        ok = ok and not oracle.is_efficient(problem, expected)
        ok = ok and oracle.is_constrained_efficient(problem, expected)
        return ok, f"agreement-maximal set {[m.pairs for m in found]}"

    checks["efficiency-clash"] = clash

    def all_unanimous() -> tuple[bool, str]:
        problem, ids = all_unanimous_market()
        full = [m for m in oracle.unanimous_matchings(problem) if len(m) == 3]
        efficient = oracle.efficient_matchings(problem)
        expected = matching_of(ids, {"a": 1, "b": 2, "c": 3})
        ok = len(full) == 6 and efficient == [expected]
        return ok, f"{len(full)} full agreement-maximal matchings, {len(efficient)} efficient"

    checks["all-unanimous-one-efficient"] = all_unanimous

    def truncation() -> tuple[bool, str]:
        problem, ids = truncation_pays_market()
        found = {m.pairs for m in oracle.unanimous_matchings(problem)}
        want = {
            matching_of(ids, {"a": 1, "b": 3}).pairs,
            matching_of(ids, {"a": 3, "b": 1}).pairs,
        }
        if found != want:
            return False, f"agreement-maximal set was {sorted(found)}"
        # whichever member a mechanism picks, the child stuck at 3 profits
        # by a truncation report
        from .mechanisms import sdi

        hits = []
        for order, tie in (
            ((ids["a"], ids["b"]), TieBreakPolicy.BY_PREFERENCE),
            ((ids["a"], ids["b"]), TieBreakPolicy.BY_EVALUATION),
        ):
            report = oracle.find_sp_violation(
                lambda p, o=order, t=tie: sdi(p, o, t), problem
            )
            hits.append(report is not None)
        return all(hits), "profitable truncation found against both selections"

    checks["truncation-pays"] = truncation

    def worst_case() -> tuple[bool, str]:
        problem, ids = worst_case_truncation_market()
        b = ids["b"]
        family = oracle.sdi_family()
        report = oracle.find_obvious_manipulation(
            family,
            problem.market,
            b,
            problem.prefs[b],
            problem.evals[b],
            misreports=[StrictRanking((4, 2, 1))],
        )
        ok = report is not None and report.kind == "worst-case"
        return ok, f"misreport (4, 2, 1) kind={report.kind if report else None}"

    checks["worst-case-truncation"] = worst_case

    def adaptive() -> tuple[bool, str]:
        problem, ids = efficiency_clash()
        order = tuple(ids[n] for n in ("d", "c", "a", "b"))
        committed = asdi_commitments(problem, order)
        ok = (
            committed[ids["d"]] == frozenset({4})
            and committed[ids["c"]] == frozenset({1})
            and committed[ids["a"]] == frozenset({2, 3})
            and committed[ids["b"]] == frozenset({2, 3})
        )
        return ok, f"commitments {dict(sorted(committed.items()))}"

    checks["adaptive-order-dcab"] = adaptive

    results = []
    for name, fn in checks.items():
        if only is not None and name != only:
            continue
        results.append(_check(name, fn))
    if only is not None and not results:
        raise ValueError(f"unknown fixture {only!r}; choices: {sorted(checks)}")
    return results
