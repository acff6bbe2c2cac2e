"""Domain types and the two-ranking agreement calculus.

A market matches children to homes. Every child carries two strict rankings
over homes: her own preference order and the matchmaker's evaluation order.
A home is an *agreed improvement* over another when it beats it on both
orders at once; the calculus built here (improver sets, the H*/H- split,
agreement-based domination between matchings) is the foundation the
mechanisms, oracles and simulations all share.

All values are immutable after construction and safe to share across
threads; every operation in this module is a pure function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from itertools import combinations, permutations
from typing import Iterable, Mapping

ChildId = int
HomeId = int


class Order(Enum):
    """Selector for which of the two rankings a comparison runs on."""

    PREFERENCE = "preference"
    EVALUATION = "evaluation"


@dataclass(frozen=True)
class StrictRanking:
    """A strict order over homes with an acceptability cutoff.

    ``ordered`` lists homes best-first. Homes absent from the sequence are
    unacceptable: they sit strictly below the unmatched option. Comparisons
    among unlisted homes are completed deterministically by ascending home
    id so that every ranking is a strict total order over homes plus the
    unmatched option.
    """

    ordered: tuple[HomeId, ...]

    def __post_init__(self):
        object.__setattr__(self, "ordered", tuple(self.ordered))
        if len(set(self.ordered)) != len(self.ordered):
            raise ValueError(f"duplicate homes in ranking {self.ordered}")

    @cached_property
    def _position(self) -> dict[HomeId, int]:
        return {h: i for i, h in enumerate(self.ordered)}

    def accepts(self, home: HomeId) -> bool:
        return home in self._position

    def rank(self, home: HomeId | None) -> tuple[int, int]:
        """Sort key, lower is better; ``None`` is the unmatched option."""
        if home is None:
            return (len(self.ordered), -1)
        pos = self._position.get(home)
        if pos is not None:
            return (pos, -1)
        return (len(self.ordered) + 1, home)

    def prefers(self, a: HomeId | None, b: HomeId | None) -> bool:
        return self.rank(a) < self.rank(b)


@dataclass(frozen=True)
class WeakRanking:
    """Ordered indifference tiers; homes in no tier are unacceptable."""

    tiers: tuple[frozenset[HomeId], ...]

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(frozenset(t) for t in self.tiers))
        seen: set[HomeId] = set()
        for tier in self.tiers:
            if tier & seen:
                raise ValueError("tiers must be pairwise disjoint")
            seen |= tier

    @cached_property
    def _tier_of(self) -> dict[HomeId, int]:
        return {h: i for i, tier in enumerate(self.tiers) for h in tier}

    def accepts(self, home: HomeId) -> bool:
        return home in self._tier_of

    def rank(self, home: HomeId | None) -> int:
        """Tier index, lower is better; unmatched sits between the tiers
        and the unacceptable homes."""
        if home is None:
            return len(self.tiers)
        return self._tier_of.get(home, len(self.tiers) + 1)

    def prefers(self, a: HomeId | None, b: HomeId | None) -> bool:
        return self.rank(a) < self.rank(b)


@dataclass(frozen=True)
class Market:
    """Bipartite market: children, homes, and the feasible pairs."""

    children: frozenset[ChildId]
    homes: frozenset[HomeId]
    edges: frozenset[tuple[ChildId, HomeId]]

    def __init__(
        self,
        children: Iterable[ChildId],
        homes: Iterable[HomeId],
        edges: Iterable[tuple[ChildId, HomeId]] | None = None,
    ):
        children = frozenset(children)
        homes = frozenset(homes)
        if edges is None:
            edges = frozenset((c, h) for c in children for h in homes)
        else:
            edges = frozenset((c, h) for c, h in edges)
            for c, h in edges:
                if c not in children or h not in homes:
                    raise ValueError(f"edge ({c}, {h}) references unknown child or home")
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "homes", homes)
        object.__setattr__(self, "edges", edges)

    @cached_property
    def _feasible(self) -> dict[ChildId, frozenset[HomeId]]:
        out: dict[ChildId, set[HomeId]] = {c: set() for c in self.children}
        for c, h in self.edges:
            out[c].add(h)
        return {c: frozenset(hs) for c, hs in out.items()}

    def homes_for(self, child: ChildId) -> frozenset[HomeId]:
        if child not in self.children:
            raise ValueError(f"unknown child {child}")
        return self._feasible[child]


@dataclass(frozen=True)
class Matching:
    """Partial injective assignment of children to homes.

    Stored child-keyed; unmatched children are simply absent. Injectivity
    on homes is checked at construction, feasibility against a market is
    checked by the operations that need it.
    """

    pairs: tuple[tuple[ChildId, HomeId], ...]

    def __init__(self, assignment: Mapping[ChildId, HomeId] | Iterable[tuple[ChildId, HomeId]]):
        items = assignment.items() if isinstance(assignment, Mapping) else assignment
        pairs = tuple(sorted((c, h) for c, h in items))
        homes = [h for _, h in pairs]
        if len(set(homes)) != len(homes):
            raise ValueError(f"matching assigns a home twice: {pairs}")
        children = [c for c, _ in pairs]
        if len(set(children)) != len(children):
            raise ValueError(f"matching assigns a child twice: {pairs}")
        object.__setattr__(self, "pairs", pairs)

    @cached_property
    def assignment(self) -> dict[ChildId, HomeId]:
        return dict(self.pairs)

    def get(self, child: ChildId) -> HomeId | None:
        return self.assignment.get(child)

    @cached_property
    def matched_children(self) -> frozenset[ChildId]:
        return frozenset(c for c, _ in self.pairs)

    @cached_property
    def used_homes(self) -> frozenset[HomeId]:
        return frozenset(h for _, h in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class Problem:
    """A market together with one preference and one evaluation ranking
    per child."""

    market: Market
    prefs: Mapping[ChildId, StrictRanking]
    evals: Mapping[ChildId, StrictRanking]

    def __post_init__(self):
        prefs = dict(self.prefs)
        evals = dict(self.evals)
        for label, rankings in (("prefs", prefs), ("evals", evals)):
            if set(rankings) != self.market.children:
                raise ValueError(f"{label} must cover exactly the market's children")
            for c, r in rankings.items():
                extra = set(r.ordered) - self.market.homes_for(c)
                if extra:
                    raise ValueError(f"{label}[{c}] ranks infeasible homes {sorted(extra)}")
        object.__setattr__(self, "prefs", prefs)
        object.__setattr__(self, "evals", evals)

    def ranking(self, child: ChildId, order: Order) -> StrictRanking:
        table = self.prefs if order is Order.PREFERENCE else self.evals
        return table[child]

    def _check_child(self, child: ChildId) -> None:
        if child not in self.market.children:
            raise ValueError(f"unknown child {child}")

    def check_matching(self, matching: Matching) -> None:
        """Raise if the matching references unknown agents or infeasible pairs."""
        for c, h in matching.pairs:
            if (c, h) not in self.market.edges:
                raise ValueError(f"pair ({c}, {h}) is not a feasible edge")

    @cached_property
    def _classified(self) -> dict[ChildId, tuple[frozenset[HomeId], frozenset[HomeId]]]:
        return {c: _classify(self, c, self.market.homes_for(c)) for c in self.market.children}


def improvers(problem: Problem, child: ChildId, home: HomeId | None) -> frozenset[HomeId]:
    """Homes beating ``home`` on both of the child's orders at once.

    ``None`` stands for the unmatched option, so ``improvers(p, c, None)``
    is the set of homes acceptable on both orders.
    """
    problem._check_child(child)
    if home is not None and home not in problem.market.homes_for(child):
        raise ValueError(f"home {home} is not feasible for child {child}")
    pref = problem.prefs[child]
    ev = problem.evals[child]
    return frozenset(
        h
        for h in problem.market.homes_for(child)
        if pref.prefers(h, home) and ev.prefers(h, home)
    )


def _classify(problem: Problem, child: ChildId, domain: frozenset[HomeId]):
    pref = problem.prefs[child]
    ev = problem.evals[child]
    agreed = [h for h in domain if pref.accepts(h) and ev.accepts(h)]
    star = frozenset(
        h
        for h in agreed
        if not any(pref.prefers(o, h) and ev.prefers(o, h) for o in agreed)
    )
    return star, frozenset(agreed) - star


def classify_homes(problem: Problem, child: ChildId) -> tuple[frozenset[HomeId], frozenset[HomeId]]:
    """Split the child's homes into the agreed-best set H* (acceptable on
    both orders, no improver) and the remainder H- (acceptable on both
    orders, but improvable). Homes unacceptable on either order land in
    neither set."""
    problem._check_child(child)
    return problem._classified[child]


def unanimous_ranking(
    problem: Problem, child: ChildId, domain: Iterable[HomeId] | None = None
) -> WeakRanking:
    """The two-tier weak ranking induced by the H*/H- split, computed
    within ``domain`` (defaults to all of the child's feasible homes).

    Restricting the domain re-runs the improver scan inside it, which is
    how the adaptive dictatorship re-tiers over remaining homes.
    """
    problem._check_child(child)
    if domain is None:
        star, minus = problem._classified[child]
    else:
        domain = frozenset(domain)
        extra = domain - problem.market.homes_for(child)
        if extra:
            raise ValueError(f"domain contains homes infeasible for {child}: {sorted(extra)}")
        star, minus = _classify(problem, child, domain)
    tiers = [t for t in (star, minus) if t]
    return WeakRanking(tuple(tiers))


def unanimous_children(problem: Problem, matching: Matching) -> frozenset[ChildId]:
    """Children whose assigned home sits in their H* set."""
    problem.check_matching(matching)
    return frozenset(
        c for c, h in matching.pairs if h in problem._classified[c][0]
    )


def matched_acceptably(problem: Problem, matching: Matching) -> frozenset[ChildId]:
    """Children matched to a home acceptable on both orders."""
    problem.check_matching(matching)
    out = []
    for c, h in matching.pairs:
        star, minus = problem._classified[c]
        if h in star or h in minus:
            out.append(c)
    return frozenset(out)


def is_acceptable(problem: Problem, matching: Matching) -> bool:
    """True when every matched child sits at a home acceptable on both orders."""
    problem.check_matching(matching)
    return len(matched_acceptably(problem, matching)) == len(matching)


def pareto_dominates(
    problem: Problem, mu2: Matching, mu1: Matching, order: Order = Order.PREFERENCE
) -> bool:
    """True when ``mu2`` weakly improves every child and strictly improves
    some child under the selected order (unmatched ranked at the cutoff)."""
    problem.check_matching(mu1)
    problem.check_matching(mu2)
    strict = False
    for c in problem.market.children:
        r = problem.ranking(c, order)
        k2, k1 = r.rank(mu2.get(c)), r.rank(mu1.get(c))
        if k2 > k1:
            return False
        if k2 < k1:
            strict = True
    return strict


def unanimously_dominates(problem: Problem, mu2: Matching, mu1: Matching) -> bool:
    """True when ``mu2`` weakly expands both the agreed-best coalition and
    the acceptably-matched coalition of ``mu1``, strictly expanding one.

    Only acceptable matchings are comparable under this relation.
    """
    for mu in (mu1, mu2):
        if not is_acceptable(problem, mu):
            raise ValueError("agreement domination is defined on acceptable matchings only")
    i1, i2 = unanimous_children(problem, mu1), unanimous_children(problem, mu2)
    k1, k2 = matched_acceptably(problem, mu1), matched_acceptably(problem, mu2)
    if not (i1 <= i2 and k1 <= k2):
        return False
    return i1 < i2 or k1 < k2


def all_strict_rankings(homes: Iterable[HomeId]) -> list[StrictRanking]:
    """Every strict ranking over every subset of ``homes`` (unranked homes
    are unacceptable), in a fixed canonical order: shorter lists first,
    then lexicographic."""
    homes = sorted(homes)
    out: list[StrictRanking] = []
    for k in range(len(homes) + 1):
        for subset in combinations(homes, k):
            for perm in permutations(subset):
                out.append(StrictRanking(perm))
    return out


# ---------------------------------------------------------------------------
# JSON wire format shared by the CLI, the oracle and the service.
# ---------------------------------------------------------------------------


def problem_to_dict(problem: Problem) -> dict:
    doc = {
        "children": sorted(problem.market.children),
        "homes": sorted(problem.market.homes),
        "prefs": {str(c): list(r.ordered) for c, r in sorted(problem.prefs.items())},
        "evals": {str(c): list(r.ordered) for c, r in sorted(problem.evals.items())},
    }
    complete = frozenset(
        (c, h) for c in problem.market.children for h in problem.market.homes
    )
    if problem.market.edges != complete:
        doc["edges"] = sorted([c, h] for c, h in problem.market.edges)
    return doc


def problem_from_dict(doc: Mapping) -> Problem:
    try:
        children = [int(c) for c in doc["children"]]
        homes = [int(h) for h in doc["homes"]]
        edges = None
        if "edges" in doc:
            edges = [(int(c), int(h)) for c, h in doc["edges"]]
        market = Market(children, homes, edges)
        prefs = {int(c): StrictRanking(tuple(int(h) for h in r)) for c, r in doc["prefs"].items()}
        evals = {int(c): StrictRanking(tuple(int(h) for h in r)) for c, r in doc["evals"].items()}
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed problem document: {exc}") from exc
    return Problem(market, prefs, evals)


def matching_to_dict(matching: Matching) -> dict:
    return {str(c): h for c, h in matching.pairs}


def matching_from_dict(doc: Mapping) -> Matching:
    return Matching({int(c): int(h) for c, h in doc.items()})


def problem_to_json(problem: Problem) -> str:
    return json.dumps(problem_to_dict(problem), indent=2)


def problem_from_json(text: str) -> Problem:
    return problem_from_dict(json.loads(text))
