"""Brute-force ground truth for the matching properties.

Everything here is enumeration-backed: matchings are generated exhaustively
(with an explicit cap that fails loudly instead of truncating silently),
the literal set-based dictatorships are run on the materialized allocation
sets, and the strategic searches sweep entire report spaces. These oracles
are deliberately independent of the production mechanisms so the two can
check each other.

Searches are deterministic: report spaces are swept in canonical order
(shorter rankings first, then lexicographic) and the first hit is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .core import (
    ChildId,
    HomeId,
    Market,
    Matching,
    Order,
    Problem,
    StrictRanking,
    all_strict_rankings,
    classify_homes,
    improvers,
    is_acceptable,
    matched_acceptably,
    unanimous_children,
    unanimous_ranking,
)
from .mechanisms import (
    PointingOrder,
    TieBreakPolicy,
    asdi_commitments,
    feasible,
    sd,
    sdi,
    sdi_commitments,
    uttc,
)

DEFAULT_CAP = 10_000_000

Mechanism = Callable[[Problem], Matching]


class SearchLimitExceeded(RuntimeError):
    """An enumeration outgrew its configured cap."""


# ---------------------------------------------------------------------------
# Matching enumeration
# ---------------------------------------------------------------------------


def _enumerate(
    children: Sequence[ChildId],
    choices: Mapping[ChildId, Sequence[HomeId]],
    cap: int,
) -> Iterator[dict[ChildId, HomeId]]:
    count = 0
    assignment: dict[ChildId, HomeId] = {}
    used: set[HomeId] = set()

    def rec(i: int) -> Iterator[dict[ChildId, HomeId]]:
        nonlocal count
        if i == len(children):
            count += 1
            if count > cap:
                raise SearchLimitExceeded(f"matching enumeration exceeded cap {cap}")
            yield dict(assignment)
            return
        c = children[i]
        yield from rec(i + 1)  # c unmatched
        for h in choices[c]:
            if h not in used:
                assignment[c] = h
                used.add(h)
                yield from rec(i + 1)
                del assignment[c]
                used.discard(h)

    yield from rec(0)


def enumerate_matchings(market: Market, cap: int = DEFAULT_CAP) -> Iterator[Matching]:
    """Yield every feasible one-to-one partial assignment exactly once."""
    children = sorted(market.children)
    choices = {c: sorted(market.homes_for(c)) for c in children}
    for assignment in _enumerate(children, choices, cap):
        yield Matching(assignment)


def acceptable_matchings(problem: Problem, cap: int = DEFAULT_CAP) -> list[Matching]:
    """Every feasible matching in which all matched children sit at homes
    acceptable on both orders."""
    children = sorted(problem.market.children)
    choices = {}
    for c in children:
        star, minus = classify_homes(problem, c)
        choices[c] = sorted(star | minus)
    return [Matching(a) for a in _enumerate(children, choices, cap)]


# ---------------------------------------------------------------------------
# Property checks by enumeration
# ---------------------------------------------------------------------------


def _coalitions(problem: Problem, mu: Matching) -> tuple[frozenset, frozenset]:
    return unanimous_children(problem, mu), matched_acceptably(problem, mu)


def _dominates(i2, k2, i1, k1) -> bool:
    return (i1 <= i2 and k1 <= k2) and (i1 < i2 or k1 < k2)


def is_unanimous(problem: Problem, mu: Matching, cap: int = DEFAULT_CAP) -> bool:
    """No acceptable matching expands both coalitions, one strictly."""
    if not is_acceptable(problem, mu):
        raise ValueError("agreement-maximality is defined for acceptable matchings")
    i1, k1 = _coalitions(problem, mu)
    for other in acceptable_matchings(problem, cap):
        i2, k2 = _coalitions(problem, other)
        if _dominates(i2, k2, i1, k1):
            return False
    return True


def unanimous_matchings(problem: Problem, cap: int = DEFAULT_CAP) -> list[Matching]:
    """All acceptable matchings not dominated in the agreement order."""
    pool = acceptable_matchings(problem, cap)
    stats = [_coalitions(problem, mu) for mu in pool]
    distinct = set(stats)
    out = []
    for mu, (i1, k1) in zip(pool, stats):
        if not any(_dominates(i2, k2, i1, k1) for i2, k2 in distinct):
            out.append(mu)
    return out


def _rank_vector(problem: Problem, mu: Matching, order: Order) -> tuple:
    return tuple(
        problem.ranking(c, order).rank(mu.get(c)) for c in sorted(problem.market.children)
    )


def is_efficient(
    problem: Problem, mu: Matching, order: Order = Order.PREFERENCE, cap: int = DEFAULT_CAP
) -> bool:
    """No feasible matching Pareto dominates ``mu`` under the given order."""
    problem.check_matching(mu)
    base = _rank_vector(problem, mu, order)
    for other in enumerate_matchings(problem.market, cap):
        v = _rank_vector(problem, other, order)
        if all(a <= b for a, b in zip(v, base)) and v != base:
            return False
    return True


def efficient_matchings(
    problem: Problem, order: Order = Order.PREFERENCE, cap: int = DEFAULT_CAP
) -> list[Matching]:
    pool = list(enumerate_matchings(problem.market, cap))
    vectors = [_rank_vector(problem, mu, order) for mu in pool]
    distinct = set(vectors)
    out = []
    for mu, v in zip(pool, vectors):
        dominated = any(
            all(a <= b for a, b in zip(w, v)) and w != v for w in distinct
        )
        if not dominated:
            out.append(mu)
    return out


def is_constrained_efficient(problem: Problem, mu: Matching, cap: int = DEFAULT_CAP) -> bool:
    """No acceptable Pareto improvement exists that weakly preserves both
    coalitions. As everywhere in the agreement calculus, the comparison
    space is the acceptable matchings."""
    problem.check_matching(mu)
    base = _rank_vector(problem, mu, Order.PREFERENCE)
    i1, k1 = _coalitions(problem, mu)
    for other in acceptable_matchings(problem, cap):
        v = _rank_vector(problem, other, Order.PREFERENCE)
        if not (all(a <= b for a, b in zip(v, base)) and v != base):
            continue
        i2, k2 = _coalitions(problem, other)
        if i1 <= i2 and k1 <= k2:
            return False
    return True


def is_unimprovable(problem: Problem, mu: Matching, cap: int = DEFAULT_CAP) -> bool:
    """No acceptable reallocation weakly shrinks every child's improver set
    while moving at least one child into her current improver set."""
    problem.check_matching(mu)
    children = sorted(problem.market.children)
    current = {c: improvers(problem, c, mu.get(c)) for c in children}
    for other in acceptable_matchings(problem, cap):
        shrinks = all(
            improvers(problem, c, other.get(c)) <= current[c] for c in children
        )
        if not shrinks:
            continue
        if any(other.get(c) in current[c] for c in children):
            return False
    return True


# ---------------------------------------------------------------------------
# Literal set-based dictatorships (Algorithms as written, on materialized
# allocation sets). The production implementations must agree with these.
# ---------------------------------------------------------------------------


def _tier_value(tiers: Sequence[frozenset[HomeId]], home: HomeId | None) -> int:
    for depth, tier in enumerate(tiers):
        if home in tier:
            return len(tiers) - depth
    return 0


def sdi_terminal_set(
    problem: Problem, order: Sequence[ChildId], cap: int = DEFAULT_CAP
) -> list[Matching]:
    """Run the indifference dictatorship literally on the materialized set
    of acceptable matchings and return the terminal set."""
    pool = acceptable_matchings(problem, cap)
    tiers = {c: classify_homes(problem, c) for c in problem.market.children}
    for c in order:
        best = max(_tier_value(tiers[c], mu.get(c)) for mu in pool)
        if best > 0:
            pool = [mu for mu in pool if _tier_value(tiers[c], mu.get(c)) == best]
        if all(mu.used_homes == problem.market.homes for mu in pool):
            break
    return pool


def asdi_terminal_set(
    problem: Problem, order: Sequence[ChildId], cap: int = DEFAULT_CAP
) -> list[Matching]:
    """Literal adaptive variant: tiers recomputed over the homes left
    unassigned by some remaining allocation."""
    pool = acceptable_matchings(problem, cap)
    remaining = set(problem.market.homes)
    for c in order:
        domain = frozenset(remaining) & problem.market.homes_for(c)
        tiers = unanimous_ranking(problem, c, domain).tiers
        best = max(_tier_value(tiers, mu.get(c)) for mu in pool)
        if best > 0:
            pool = [mu for mu in pool if _tier_value(tiers, mu.get(c)) == best]
        remaining = set()
        for mu in pool:
            remaining |= problem.market.homes - mu.used_homes
        if not remaining:
            break
    return pool


# ---------------------------------------------------------------------------
# Mechanism families: one object per mechanism-with-free-parameters, able
# to produce every output realization on a problem. Used by the
# consistent-set machinery, which quantifies over those realizations.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MechanismFamily:
    """All realizations of a mechanism on a problem.

    ``opponent_key`` maps a child's (preference, evaluation) pair to the
    statistic the mechanism's output actually depends on; the consistent-set
    sweep deduplicates opponent profiles by this key, which keeps exhaustive
    searches tractable without losing exactness.
    """

    name: str
    outputs: Callable[[Problem], frozenset[Matching]]
    opponent_key: Callable[[StrictRanking, StrictRanking], object]


def _orders_of(problem: Problem, orders) -> list[tuple[ChildId, ...]]:
    if orders == "all":
        from itertools import permutations

        return [tuple(p) for p in permutations(sorted(problem.market.children))]
    return [tuple(o) for o in orders]


def _commitment_members(
    problem: Problem, commitments: Mapping[ChildId, frozenset[HomeId]], cap: int
) -> list[Matching]:
    out = []
    for mu in acceptable_matchings(problem, cap):
        if all(mu.get(c) in s for c, s in commitments.items()):
            out.append(mu)
    return out


def _tier_key(pref: StrictRanking, ev: StrictRanking) -> object:
    agreed = [h for h in pref.ordered if ev.accepts(h)]
    star = frozenset(
        h
        for h in agreed
        if not any(pref.prefers(o, h) and ev.prefers(o, h) for o in agreed)
    )
    return (star, frozenset(agreed) - star)


def _agreement_digraph_key(pref: StrictRanking, ev: StrictRanking) -> object:
    agreed = frozenset(h for h in pref.ordered if ev.accepts(h))
    edges = frozenset(
        (a, b)
        for a in agreed
        for b in agreed
        if pref.prefers(a, b) and ev.prefers(a, b)
    )
    return (agreed, edges)


def sd_family(ranking: Order = Order.PREFERENCE, orders="all") -> MechanismFamily:
    def outputs(problem: Problem) -> frozenset[Matching]:
        return frozenset(sd(problem, o, ranking) for o in _orders_of(problem, orders))

    key = (
        (lambda pref, ev: pref.ordered)
        if ranking is Order.PREFERENCE
        else (lambda pref, ev: ev.ordered)
    )
    return MechanismFamily(f"sd[{ranking.value}]", outputs, key)


def sdi_family(orders="all", cap: int = DEFAULT_CAP) -> MechanismFamily:
    def outputs(problem: Problem) -> frozenset[Matching]:
        out: set[Matching] = set()
        for o in _orders_of(problem, orders):
            out.update(_commitment_members(problem, sdi_commitments(problem, o), cap))
        return frozenset(out)

    return MechanismFamily("sdi", outputs, _tier_key)


def asdi_family(orders="all", cap: int = DEFAULT_CAP) -> MechanismFamily:
    def outputs(problem: Problem) -> frozenset[Matching]:
        out: set[Matching] = set()
        for o in _orders_of(problem, orders):
            out.update(_commitment_members(problem, asdi_commitments(problem, o), cap))
        return frozenset(out)

    return MechanismFamily("asdi", outputs, _agreement_digraph_key)


def uttc_family(
    pointing: PointingOrder = PointingOrder.PREFERENCE,
    tie: TieBreakPolicy = TieBreakPolicy.BY_EVALUATION,
    orders="all",
) -> MechanismFamily:
    """Trading cycles seeded with the indifference dictatorship's realized
    output. Realization parameters other than the order are fixed, so each
    instance is one concrete mechanism."""

    def outputs(problem: Problem) -> frozenset[Matching]:
        out: set[Matching] = set()
        for o in _orders_of(problem, orders):
            seed = sdi(problem, o, tie)
            out.add(uttc(problem, seed, pointing, check_initial=False))
        return frozenset(out)

    return MechanismFamily(
        f"uttc[{pointing.value}]", outputs, lambda pref, ev: (pref.ordered, ev.ordered)
    )


# ---------------------------------------------------------------------------
# Consistent sets and obvious manipulations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistentSets:
    """Matchings a mechanism can produce for a child across every opponent
    profile, with the child's worst and best slices under her true order."""

    cu: frozenset[Matching]
    cu_minus: frozenset[Matching]
    cu_plus: frozenset[Matching]

    def worst_match(self, child: ChildId) -> HomeId | None:
        return next(iter(self.cu_minus)).get(child)

    def best_match(self, child: ChildId) -> HomeId | None:
        return next(iter(self.cu_plus)).get(child)


@dataclass(frozen=True)
class ManipulationReport:
    agent: ChildId | str
    kind: str  # profitable | worst-case | best-case | group-improving
    true_ranking: StrictRanking
    misreport: StrictRanking
    outcome_under_truth: Matching | None
    outcome_under_misreport: Matching | None


def consistent_sets(
    family: MechanismFamily,
    market: Market,
    child: ChildId,
    pref: StrictRanking,
    ev: StrictRanking,
    true_pref: StrictRanking | None = None,
    opponent_prefs: Sequence[StrictRanking] | None = None,
    opponent_evals: Sequence[StrictRanking] | None = None,
    cap: int = DEFAULT_CAP,
) -> ConsistentSets:
    """Every matching the family can produce when ``child`` reports
    ``pref`` and is evaluated by ``ev``, over all opponent profiles.

    Extremes are sliced by the child's true preference (``true_pref``
    defaults to the report itself).
    """
    if child not in market.children:
        raise ValueError(f"unknown child {child}")
    true_pref = true_pref or pref
    opponents = sorted(market.children - {child})
    spaces = {}
    for c in opponents:
        homes = sorted(market.homes_for(c))
        prefs_c = opponent_prefs if opponent_prefs is not None else all_strict_rankings(homes)
        evals_c = opponent_evals if opponent_evals is not None else all_strict_rankings(homes)
        seen: dict[object, tuple[StrictRanking, StrictRanking]] = {}
        for rp in prefs_c:
            for re_ in evals_c:
                seen.setdefault(family.opponent_key(rp, re_), (rp, re_))
        spaces[c] = list(seen.values())

    cu: set[Matching] = set()
    count = 0

    def rec(i: int, prefs: dict, evals: dict) -> None:
        nonlocal count
        if i == len(opponents):
            count += 1
            if count > cap:
                raise SearchLimitExceeded(f"consistent-set sweep exceeded cap {cap}")
            problem = Problem(market, prefs, evals)
            cu.update(family.outputs(problem))
            return
        c = opponents[i]
        for rp, re_ in spaces[c]:
            prefs[c], evals[c] = rp, re_
            rec(i + 1, prefs, evals)

    rec(0, {child: pref}, {child: ev})
    if not cu:
        raise AssertionError("mechanism family produced no outputs")
    worst = max(cu, key=lambda mu: true_pref.rank(mu.get(child)))
    best = min(cu, key=lambda mu: true_pref.rank(mu.get(child)))
    w, b = true_pref.rank(worst.get(child)), true_pref.rank(best.get(child))
    return ConsistentSets(
        frozenset(cu),
        frozenset(m for m in cu if true_pref.rank(m.get(child)) == w),
        frozenset(m for m in cu if true_pref.rank(m.get(child)) == b),
    )


def _canonical_reports(rankings: Iterable[StrictRanking]) -> list[StrictRanking]:
    return sorted(rankings, key=lambda r: (len(r.ordered), r.ordered))


def find_obvious_manipulation(
    family: MechanismFamily,
    market: Market,
    child: ChildId,
    pref: StrictRanking,
    ev: StrictRanking,
    misreports: Sequence[StrictRanking] | None = None,
    **sweep_kwargs,
) -> ManipulationReport | None:
    """First misreport (canonical order) improving the child's worst-case
    or best-case consistent match over truth-telling, if any."""
    truth = consistent_sets(family, market, child, pref, ev, **sweep_kwargs)
    wt = pref.rank(truth.worst_match(child))
    bt = pref.rank(truth.best_match(child))
    if misreports is None:
        misreports = all_strict_rankings(market.homes_for(child))
    for report in _canonical_reports(misreports):
        if report.ordered == pref.ordered:
            continue
        lie = consistent_sets(
            family, market, child, report, ev, true_pref=pref, **sweep_kwargs
        )
        if pref.rank(lie.worst_match(child)) < wt:
            return ManipulationReport(
                child, "worst-case", pref, report,
                next(iter(truth.cu_minus)), next(iter(lie.cu_minus)),
            )
        if pref.rank(lie.best_match(child)) < bt:
            return ManipulationReport(
                child, "best-case", pref, report,
                next(iter(truth.cu_plus)), next(iter(lie.cu_plus)),
            )
    return None


# ---------------------------------------------------------------------------
# Strategy-proofness, group robustness, IIA
# ---------------------------------------------------------------------------


def _with_pref(problem: Problem, child: ChildId, ranking: StrictRanking) -> Problem:
    prefs = dict(problem.prefs)
    prefs[child] = ranking
    return Problem(problem.market, prefs, problem.evals)


def _with_eval(problem: Problem, child: ChildId, ranking: StrictRanking) -> Problem:
    evals = dict(problem.evals)
    evals[child] = ranking
    return Problem(problem.market, problem.prefs, evals)


def find_sp_violation(
    mechanism: Mechanism,
    problem: Problem,
    children: Sequence[ChildId] | None = None,
    misreports: Mapping[ChildId, Sequence[StrictRanking]] | None = None,
) -> ManipulationReport | None:
    """First profitable preference misreport against the (deterministic)
    mechanism, sweeping all strict rankings including truncations."""
    truthful = mechanism(problem)
    for c in sorted(children if children is not None else problem.market.children):
        space = (
            misreports[c]
            if misreports is not None
            else all_strict_rankings(problem.market.homes_for(c))
        )
        true_rank = problem.prefs[c].rank(truthful.get(c))
        for report in _canonical_reports(space):
            if report.ordered == problem.prefs[c].ordered:
                continue
            outcome = mechanism(_with_pref(problem, c, report))
            if problem.prefs[c].rank(outcome.get(c)) < true_rank:
                return ManipulationReport(
                    c, "profitable", problem.prefs[c], report, truthful, outcome
                )
    return None


def find_group_robustness_violation(
    mechanism: Mechanism,
    rule: Callable[[StrictRanking, StrictRanking, frozenset[HomeId]], StrictRanking],
    problem: Problem,
    child_misreports: Mapping[ChildId, Sequence[StrictRanking]] | None = None,
    matchmaker_misreports: Mapping[ChildId, Sequence[StrictRanking]] | None = None,
) -> ManipulationReport | None:
    """Search for a manipulation of the aggregated problem that profits the
    manipulating side without harming any other child on that side's order.

    Children misreport preferences (truncations included); the matchmaker
    misreports one child's evaluation (full rankings only).
    """
    market = problem.market

    def aggregated(prefs, evals) -> Problem:
        agg = {
            c: rule(prefs[c], evals[c], market.homes_for(c)) for c in market.children
        }
        return Problem(market, agg, evals)

    base = mechanism(aggregated(problem.prefs, problem.evals))

    for c in sorted(market.children):
        homes = market.homes_for(c)
        space = (
            child_misreports[c]
            if child_misreports is not None
            else all_strict_rankings(homes)
        )
        for report in _canonical_reports(space):
            if report.ordered == problem.prefs[c].ordered:
                continue
            prefs = dict(problem.prefs)
            prefs[c] = report
            outcome = mechanism(aggregated(prefs, problem.evals))
            if not problem.prefs[c].prefers(outcome.get(c), base.get(c)):
                continue
            harmed = any(
                problem.prefs[d].prefers(base.get(d), outcome.get(d))
                for d in market.children
                if d != c
            )
            if not harmed:
                return ManipulationReport(
                    c, "group-improving", problem.prefs[c], report, base, outcome
                )

    for c in sorted(market.children):
        homes = sorted(market.homes_for(c))
        if matchmaker_misreports is not None:
            space = matchmaker_misreports[c]
        else:
            from itertools import permutations

            space = [StrictRanking(p) for p in permutations(homes)]
        for report in _canonical_reports(space):
            if report.ordered == problem.evals[c].ordered:
                continue
            evals = dict(problem.evals)
            evals[c] = report
            outcome = mechanism(aggregated(problem.prefs, evals))
            if not problem.evals[c].prefers(outcome.get(c), base.get(c)):
                continue
            harmed = any(
                problem.evals[d].prefers(base.get(d), outcome.get(d))
                for d in market.children
                if d != c
            )
            if not harmed:
                return ManipulationReport(
                    "matchmaker", "group-improving", problem.evals[c], report, base, outcome
                )
    return None


@dataclass(frozen=True)
class IiaViolation:
    criterion: str  # IWA | IUA
    child: ChildId
    misreport: StrictRanking
    before: Matching
    after: Matching


def check_iia(
    mechanism: Mechanism,
    problems: Iterable[Problem],
    misreports: Callable[[Problem, ChildId], Sequence[StrictRanking]] | None = None,
) -> IiaViolation | None:
    """Verify independence of worse alternatives (reshuffles below the
    matched home leave the whole matching fixed) and independence of
    unmatched alternatives (a child moving between mutually-unmatched homes
    leaves everyone else fixed) over a family of problems."""
    for problem in problems:
        mu = mechanism(problem)
        for c in sorted(problem.market.children):
            pref = problem.prefs[c]
            space = (
                misreports(problem, c)
                if misreports is not None
                else all_strict_rankings(problem.market.homes_for(c))
            )
            below = {
                h for h in problem.market.homes_for(c) if pref.prefers(mu.get(c), h)
            }
            below_includes_unmatched = pref.prefers(mu.get(c), None)
            for report in _canonical_reports(space):
                if report.ordered == pref.ordered:
                    continue
                keeps_below = all(report.prefers(mu.get(c), h) for h in below) and (
                    not below_includes_unmatched or report.prefers(mu.get(c), None)
                )
                mu2 = mechanism(_with_pref(problem, c, report))
                if keeps_below and mu2 != mu:
                    return IiaViolation("IWA", c, report, mu, mu2)
                old_home, new_home = mu.get(c), mu2.get(c)
                old_unmatched_after = old_home is None or old_home not in mu2.used_homes
                new_unmatched_before = new_home is None or new_home not in mu.used_homes
                if old_unmatched_after and new_unmatched_before:
                    if any(
                        mu.get(d) != mu2.get(d)
                        for d in problem.market.children
                        if d != c
                    ):
                        return IiaViolation("IUA", c, report, mu, mu2)
    return None


# ---------------------------------------------------------------------------
# Random instances for the sampled property suites
# ---------------------------------------------------------------------------


def random_problem(
    rng,
    n_children: int,
    n_homes: int,
    truncation_prob: float = 0.5,
    edge_prob: float = 0.0,
) -> Problem:
    """A random market with uniform rankings; with probability
    ``truncation_prob`` per child per order the ranking is cut short, and
    with probability ``edge_prob`` the market drops some edges."""
    children = list(range(n_children))
    homes = list(range(n_homes))
    edges = None
    if edge_prob > 0:
        edges = [
            (c, h) for c in children for h in homes if rng.random() >= edge_prob
        ]
        # keep at least one edge per child so rankings are never forced empty
        present = {c for c, _ in edges}
        for c in children:
            if c not in present:
                edges.append((c, int(rng.integers(n_homes))))
    market = Market(children, homes, edges)

    def draw(c: ChildId) -> StrictRanking:
        feas = sorted(market.homes_for(c))
        perm = [feas[i] for i in rng.permutation(len(feas))]
        if feas and rng.random() < truncation_prob:
            keep = int(rng.integers(0, len(perm) + 1))
            perm = perm[:keep]
        return StrictRanking(tuple(perm))

    prefs = {c: draw(c) for c in children}
    evals = {c: draw(c) for c in children}
    return Problem(market, prefs, evals)
