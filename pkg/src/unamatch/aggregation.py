"""Rules collapsing a child's two rankings into one, plus their checkers.

Every rule takes (preference, evaluation, homes) and returns one strict
ranking; homes it leaves unranked are unacceptable. ``satisfies_wpp``
verifies the weak Pareto principle over the full ranking-pair space (or a
sample of it): pairwise agreement must be preserved, homes acceptable on
both orders must stay acceptable, homes unacceptable on both must stay out.

Tie handling is a fixed, predetermined rule throughout: by position in the
preference order, then by ascending home id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from .core import HomeId, StrictRanking, all_strict_rankings

Aggregator = Callable[[StrictRanking, StrictRanking, frozenset[HomeId]], StrictRanking]


@dataclass(frozen=True)
class AggregationRule:
    name: str
    aggregate: Aggregator

    def __call__(self, prefs: StrictRanking, evals: StrictRanking, homes) -> StrictRanking:
        return self.aggregate(prefs, evals, frozenset(homes))


def _one_based(ranking: StrictRanking, home: HomeId, fallback: float) -> float:
    return ranking.ordered.index(home) + 1 if ranking.accepts(home) else fallback


def _tie_key(prefs: StrictRanking, home: HomeId) -> tuple:
    return (_one_based(prefs, home, math.inf), home)


def borda(prefs: StrictRanking, evals: StrictRanking, homes: frozenset[HomeId]) -> StrictRanking:
    """Positional count: score a home by the sum of its 1-based ranks on
    both orders; fewer points is better. Homes unacceptable on either order
    are unacceptable. The rank charged to an unacceptable entry is
    |homes| + 1, which never surfaces since unranked homes are dropped."""
    k = len(homes) + 1
    scored = [
        (
            _one_based(prefs, h, k) + _one_based(evals, h, k),
            *_tie_key(prefs, h),
        )
        for h in homes
        if prefs.accepts(h) and evals.accepts(h)
    ]
    return StrictRanking(tuple(h for _, _, h in sorted(scored)))


def min_rank(prefs: StrictRanking, evals: StrictRanking, homes: frozenset[HomeId]) -> StrictRanking:
    """Sort homes by their best-case 1-based rank across the two orders; an
    order on which the home is unacceptable contributes infinity, so a home
    unacceptable on both stays unacceptable."""
    scored = []
    for h in homes:
        best = min(_one_based(prefs, h, math.inf), _one_based(evals, h, math.inf))
        if best < math.inf:
            scored.append((best, *_tie_key(prefs, h)))
    return StrictRanking(tuple(h for _, _, h in sorted(scored)))


def max_rank(prefs: StrictRanking, evals: StrictRanking, homes: frozenset[HomeId]) -> StrictRanking:
    """Mirror of the best-case rule: sort by worst-case rank, so only homes
    acceptable on both orders are ranked."""
    scored = []
    for h in homes:
        worst = max(_one_based(prefs, h, math.inf), _one_based(evals, h, math.inf))
        if worst < math.inf:
            scored.append((worst, *_tie_key(prefs, h)))
    return StrictRanking(tuple(h for _, _, h in sorted(scored)))


def extended_unanimity(
    prefs: StrictRanking, evals: StrictRanking, homes: frozenset[HomeId]
) -> StrictRanking:
    """Complete the two-tier agreement ranking into a strict order: homes
    with no agreed improver first, then the improvable ones, each block
    ordered by preference. Homes unacceptable on either order drop out."""
    agreed = [h for h in homes if prefs.accepts(h) and evals.accepts(h)]
    star = [
        h
        for h in agreed
        if not any(prefs.prefers(o, h) and evals.prefers(o, h) for o in agreed)
    ]
    minus = [h for h in agreed if h not in star]
    ordered = sorted(star, key=lambda h: _tie_key(prefs, h)) + sorted(
        minus, key=lambda h: _tie_key(prefs, h)
    )
    return StrictRanking(tuple(ordered))


class Chooser(Enum):
    CHILD = "child"
    MATCHMAKER = "matchmaker"


def serial_choice_rule(sequence: Sequence[Chooser | str]) -> AggregationRule:
    """Aggregation by a predetermined series of dictators: at her turn each
    side appends her best acceptable not-yet-chosen home. A dictator with
    nothing acceptable left is skipped. The rule is dictatorial when every
    entry names the same side (and reproduces that side's ranking exactly
    once the sequence is at least as long as the home set)."""
    seq = tuple(Chooser(s) for s in sequence)
    if not seq:
        raise ValueError("dictator sequence must be nonempty")

    def aggregate(prefs: StrictRanking, evals: StrictRanking, homes) -> StrictRanking:
        picked: list[HomeId] = []
        for who in seq:
            ranking = prefs if who is Chooser.CHILD else evals
            for h in ranking.ordered:
                if h not in picked:
                    picked.append(h)
                    break
        return StrictRanking(tuple(picked))

    label = ",".join("c" if s is Chooser.CHILD else "m" for s in seq)
    return AggregationRule(f"scr[{label}]", aggregate)


BORDA = AggregationRule("borda", borda)
MIN_RANK = AggregationRule("min", min_rank)
MAX_RANK = AggregationRule("max", max_rank)
EXTENDED_UNANIMITY = AggregationRule("tau-u", extended_unanimity)

RULES = {rule.name: rule for rule in (BORDA, MIN_RANK, MAX_RANK, EXTENDED_UNANIMITY)}


@dataclass(frozen=True)
class WppViolation:
    clause: str  # "pairwise" | "stays-unacceptable" | "stays-acceptable"
    prefs: StrictRanking
    evals: StrictRanking
    home: HomeId
    other: HomeId | None


def _check_wpp_pair(
    rule: Aggregator, homes: frozenset[HomeId], prefs: StrictRanking, evals: StrictRanking
) -> WppViolation | None:
    out = rule(prefs, evals, homes)
    for h in homes:
        pref_ok, eval_ok = prefs.accepts(h), evals.accepts(h)
        if not pref_ok and not eval_ok and out.accepts(h):
            return WppViolation("stays-unacceptable", prefs, evals, h, None)
        if pref_ok and eval_ok and not out.accepts(h):
            return WppViolation("stays-acceptable", prefs, evals, h, None)
        for o in homes:
            if o == h:
                continue
            if prefs.prefers(h, o) and evals.prefers(h, o) and not out.prefers(h, o):
                return WppViolation("pairwise", prefs, evals, h, o)
    return None


def satisfies_wpp(
    rule: Aggregator,
    homes: Iterable[HomeId],
    mode: str = "exhaustive",
    rng=None,
    samples: int = 2000,
) -> WppViolation | None:
    """Check the weak Pareto principle; returns the first violation found,
    or None. Exhaustive mode sweeps every ranking pair and requires at most
    four homes; sampled mode draws ``samples`` random pairs from ``rng``."""
    homes = frozenset(homes)
    if mode == "exhaustive":
        if len(homes) > 4:
            raise ValueError("exhaustive WPP checking is limited to |H| <= 4")
        space = all_strict_rankings(homes)
        for prefs in space:
            for evals in space:
                hit = _check_wpp_pair(rule, homes, prefs, evals)
                if hit:
                    return hit
        return None
    if mode == "sampled":
        if rng is None:
            raise ValueError("sampled mode needs an rng")
        space = all_strict_rankings(homes)
        for _ in range(samples):
            prefs = space[int(rng.integers(len(space)))]
            evals = space[int(rng.integers(len(space)))]
            hit = _check_wpp_pair(rule, homes, prefs, evals)
            if hit:
                return hit
        return None
    raise ValueError(f"unknown mode {mode!r}")
