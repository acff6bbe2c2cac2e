"""Executable matching mechanisms.

``sd`` is plain serial dictatorship on either ranking. ``sdi`` runs serial
dictatorship over each child's two-tier agreement ranking: instead of
materializing the full allocation set, each dictator commits to the best
tier for which a commitment-respecting assignment still exists, feasibility
being decided by bipartite matching. ``asdi`` re-tiers every dictator over
the homes that can still end up unassigned. ``uttc`` refines any agreement-
maximal matching with trading cycles restricted so nobody leaves their
agreement class. ``rsa`` matches every child independently to her best
available home, ignoring capacity.

Mechanisms are deterministic pure functions of their arguments; all
randomness (orders, availability draws) is injected by the caller.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Mapping, Sequence

from .core import (
    ChildId,
    HomeId,
    Matching,
    Order,
    Problem,
    StrictRanking,
    classify_homes,
    unanimous_ranking,
)

DictatorOrder = tuple[ChildId, ...]


class TieBreakPolicy(Enum):
    """Resolves the residual choice after tier commitments pin the sets."""

    BY_EVALUATION = "evaluation"
    BY_PREFERENCE = "preference"
    BY_HOME_ID = "home-id"


class PointingOrder(Enum):
    """Which ranking trading-cycle pointing follows."""

    PREFERENCE = "preference"
    EVALUATION = "evaluation"


def _check_order(problem: Problem, order: Sequence[ChildId]) -> DictatorOrder:
    order = tuple(order)
    if sorted(order) != sorted(problem.market.children):
        raise ValueError(f"order {order} is not a permutation of the market's children")
    return order


# ---------------------------------------------------------------------------
# Bipartite feasibility: can every constrained child get a distinct home
# from her candidate set?  Classic augmenting-path matching; markets here
# are small enough that Kuhn's algorithm is the right tool.
# ---------------------------------------------------------------------------


def max_assignment(candidate_sets: Sequence[frozenset[HomeId]]) -> dict[int, HomeId]:
    """Maximum assignment of set-indices to distinct homes, Kuhn style."""
    home_of: dict[int, HomeId] = {}
    owner: dict[HomeId, int] = {}

    def augment(i: int, seen: set[HomeId]) -> bool:
        for h in candidate_sets[i]:
            if h in seen:
                continue
            seen.add(h)
            if h not in owner or augment(owner[h], seen):
                owner[h] = i
                home_of[i] = h
                return True
        return False

    for i in range(len(candidate_sets)):
        augment(i, set())
    return home_of


def feasible(candidate_sets: Sequence[frozenset[HomeId]]) -> bool:
    """True when every candidate set can receive a distinct home."""
    return len(max_assignment(candidate_sets)) == len(candidate_sets)


def _feasible_avoiding(candidate_sets: Sequence[frozenset[HomeId]], home: HomeId) -> bool:
    return feasible([s - {home} for s in candidate_sets])


# ---------------------------------------------------------------------------
# Serial dictatorships
# ---------------------------------------------------------------------------


def sd(problem: Problem, order: Sequence[ChildId], ranking: Order = Order.PREFERENCE) -> Matching:
    """Serial dictatorship: each dictator takes her best remaining
    acceptable home under the chosen ranking, or stays unmatched."""
    order = _check_order(problem, order)
    used: set[HomeId] = set()
    assigned: dict[ChildId, HomeId] = {}
    for c in order:
        for h in problem.ranking(c, ranking).ordered:
            if h not in used:
                assigned[c] = h
                used.add(h)
                break
    return Matching(assigned)


def _tie_key(problem: Problem, child: ChildId, tie: TieBreakPolicy):
    if tie is TieBreakPolicy.BY_EVALUATION:
        r = problem.evals[child]
    elif tie is TieBreakPolicy.BY_PREFERENCE:
        r = problem.prefs[child]
    else:
        return lambda h: h
    return r.rank


def _realize(
    problem: Problem,
    order: DictatorOrder,
    commitments: Mapping[ChildId, frozenset[HomeId]],
    tie: TieBreakPolicy,
) -> Matching:
    """Pick one matching from the commitment set, greedily in dictator
    order under the tie-break, never breaking later commitments."""
    committed = [c for c in order if c in commitments]
    used: set[HomeId] = set()
    assigned: dict[ChildId, HomeId] = {}
    for i, c in enumerate(committed):
        later = [commitments[d] for d in committed[i + 1 :]]
        options = sorted(commitments[c] - used, key=_tie_key(problem, c, tie))
        for h in options:
            if feasible([s - used - {h} for s in later]):
                assigned[c] = h
                used.add(h)
                break
        else:  # commitments were checked feasible as they were made
            raise AssertionError("committed tier lost feasibility during realization")
    return Matching(assigned)


def sdi_commitments(
    problem: Problem, order: Sequence[ChildId]
) -> dict[ChildId, frozenset[HomeId]]:
    """Tier committed to by each dictator; children for whom neither tier
    is achievable are absent (they end up unmatched in every allocation)."""
    order = _check_order(problem, order)
    committed: dict[ChildId, frozenset[HomeId]] = {}
    for c in order:
        sets = list(committed.values())
        for tier in classify_homes(problem, c):
            if tier and feasible(sets + [tier]):
                committed[c] = tier
                break
    return committed


def sdi(
    problem: Problem,
    order: Sequence[ChildId],
    tie: TieBreakPolicy = TieBreakPolicy.BY_EVALUATION,
) -> Matching:
    """Serial dictatorship with indifference over the agreement tiers.

    Output is one member of the set-based dictatorship's terminal set (the
    equivalence is a tested invariant), hence agreement-maximal.
    """
    order = _check_order(problem, order)
    return _realize(problem, order, sdi_commitments(problem, order), tie)


def asdi_commitments(
    problem: Problem, order: Sequence[ChildId]
) -> dict[ChildId, frozenset[HomeId]]:
    """Adaptive variant: dictator n's tiers are recomputed over the homes
    that some commitment-respecting assignment still leaves unassigned."""
    order = _check_order(problem, order)
    committed: dict[ChildId, frozenset[HomeId]] = {}
    for c in order:
        sets = list(committed.values())
        remaining = frozenset(
            h for h in problem.market.homes if _feasible_avoiding(sets, h)
        )
        if not remaining:
            break
        tiers = unanimous_ranking(
            problem, c, remaining & problem.market.homes_for(c)
        ).tiers
        for tier in tiers:
            if feasible(sets + [tier]):
                committed[c] = tier
                break
    return committed


def asdi(
    problem: Problem,
    order: Sequence[ChildId],
    tie: TieBreakPolicy = TieBreakPolicy.BY_EVALUATION,
) -> Matching:
    """Adaptive serial dictatorship with indifference; output is
    unimprovable (no reallocation can shrink everyone's improver set while
    strictly improving someone's)."""
    order = _check_order(problem, order)
    return _realize(problem, order, asdi_commitments(problem, order), tie)


# ---------------------------------------------------------------------------
# Trading cycles on top of an agreement-maximal matching
# ---------------------------------------------------------------------------


def uttc(
    problem: Problem,
    initial: Matching,
    pointing: PointingOrder = PointingOrder.PREFERENCE,
    check_initial: bool | str = "auto",
) -> Matching:
    """Trading-cycles refinement of an agreement-maximal matching.

    Children whose initial home is in their H* set trade only within the
    remaining H*; everyone else points at their best remaining home that is
    acceptable on both orders. Children matched under ``initial`` always
    hold their own home as a fallback self-cycle, so nobody is unmatched by
    trading and nobody moves below their start under the pointing order.

    ``check_initial`` verifies the precondition that ``initial`` is
    agreement-maximal: ``True`` forces the (enumeration-backed) check,
    ``False`` trusts the caller, ``"auto"`` checks on small markets only.
    """
    problem.check_matching(initial)
    star_of = {c: classify_homes(problem, c)[0] for c in problem.market.children}
    agreed_of = {
        c: star_of[c] | classify_homes(problem, c)[1] for c in problem.market.children
    }
    for c, h in initial.pairs:
        if h not in agreed_of[c]:
            raise ValueError(
                f"initial matching places {c} at {h}, unacceptable on both orders"
            )
    if check_initial == "auto":
        check_initial = (
            len(problem.market.children) <= 5 and len(problem.market.homes) <= 5
        )
    if check_initial:
        from . import oracle  # deferred: oracle builds on this module

        if not oracle.is_unanimous(problem, initial):
            raise ValueError("uttc requires an agreement-maximal initial matching")

    rank = {
        c: (problem.prefs if pointing is PointingOrder.PREFERENCE else problem.evals)[
            c
        ].rank
        for c in problem.market.children
    }
    holder: dict[HomeId, ChildId] = {h: c for c, h in initial.pairs}
    active = set(problem.market.children)
    removed: set[HomeId] = set()
    assigned: dict[ChildId, HomeId] = {}

    def permitted(c: ChildId) -> list[HomeId]:
        base = star_of[c] if initial.get(c) in star_of[c] else agreed_of[c]
        return [h for h in base if h not in removed]

    def retire(c: ChildId, home: HomeId) -> None:
        assigned[c] = home
        active.discard(c)
        removed.add(home)
        held = initial.get(c)
        if held is not None:
            holder.pop(held, None)

    while active:
        favorite: dict[ChildId, HomeId] = {}
        for c in sorted(active):
            options = permitted(c)
            if options:
                favorite[c] = min(options, key=rank[c])
        for c in set(active) - set(favorite):
            # only an initially-unmatched child can run out of options
            active.discard(c)
        if not favorite:
            break
        points_to = {c: holder.get(h) for c, h in favorite.items()}

        # cycles first: follow pointers until a repeat or a vacant home
        cycle_members: set[ChildId] = set()
        state: dict[ChildId, int] = {}
        for start in sorted(favorite):
            if state.get(start):
                continue
            path: list[ChildId] = []
            node: ChildId | None = start
            while node is not None and state.get(node) is None:
                state[node] = 1
                path.append(node)
                node = points_to.get(node)
            if node is not None and state[node] == 1:
                cycle_members.update(path[path.index(node) :])
            for visited in path:
                state[visited] = 2
        if cycle_members:
            for c in sorted(cycle_members):
                retire(c, favorite[c])
            continue

        # no cycle: some child points at a vacant home; the smallest takes it
        takers = [c for c in sorted(favorite) if points_to[c] is None]
        retire(takers[0], favorite[takers[0]])

    return Matching(assigned)


# ---------------------------------------------------------------------------
# Independent assignment against an availability draw
# ---------------------------------------------------------------------------


def rsa_match(ranking: StrictRanking, availability: Mapping[HomeId, object]) -> HomeId | None:
    """A single child's match: her best-ranked available home, if any."""
    for h in ranking.ordered:
        if availability[h]:
            return h
    return None


def rsa(problem: Problem, availability: Mapping[HomeId, object]) -> dict[ChildId, HomeId]:
    """Random serial assignment: every child independently receives her
    most-preferred available acceptable home. Capacity is deliberately
    ignored, so several children may share a home; the result is therefore
    a plain child-to-home map rather than a ``Matching``."""
    missing = problem.market.homes - set(availability)
    if missing:
        raise ValueError(f"availability must be total on market homes; missing {sorted(missing)}")
    out: dict[ChildId, HomeId] = {}
    for c in sorted(problem.market.children):
        h = rsa_match(problem.prefs[c], availability)
        if h is not None:
            out[c] = h
    return out
