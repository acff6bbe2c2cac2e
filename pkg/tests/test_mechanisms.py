import numpy as np
import pytest

from unamatch import oracle
from unamatch.core import Matching, Order, StrictRanking
from unamatch.fixtures import (
    all_unanimous_market,
    efficiency_clash,
    truncation_pays_market,
)
from unamatch.mechanisms import (
    PointingOrder,
    TieBreakPolicy,
    asdi,
    asdi_commitments,
    feasible,
    max_assignment,
    rsa,
    rsa_match,
    sd,
    sdi,
    uttc,
)

from conftest import build_problem


class TestFeasibility:
    def test_assignment_is_injective_and_maximal(self):
        sets = [frozenset({1, 2}), frozenset({1}), frozenset({2, 3})]
        got = max_assignment(sets)
        assert len(got) == 3
        assert len(set(got.values())) == 3

    def test_infeasible_detected(self):
        assert not feasible([frozenset({1}), frozenset({1})])
        assert feasible([frozenset({1}), frozenset({1, 2})])

    def test_empty_set_blocks(self):
        assert not feasible([frozenset()])
        assert feasible([])


class TestSd:
    def test_everyone_gets_top_choice(self):
        problem, ids = all_unanimous_market()
        order = (ids["a"], ids["b"], ids["c"])
        assert sd(problem, order) == Matching({ids["a"]: 1, ids["b"]: 2, ids["c"]: 3})

    def test_single_child(self):
        p = build_problem(2, {0: ((2, 1), (1, 2))})
        assert sd(p, (0,)) == Matching({0: 2})

    def test_all_unacceptable_leaves_unmatched(self):
        p = build_problem(2, {0: ((), (1, 2))})
        assert sd(p, (0,)) == Matching({})

    def test_evaluation_ranking(self):
        p = build_problem(2, {0: ((1, 2), (2, 1))})
        assert sd(p, (0,), Order.EVALUATION) == Matching({0: 2})

    def test_rejects_non_permutation(self):
        p = build_problem(2, {0: ((1,), (1,)), 1: ((2,), (2,))})
        with pytest.raises(ValueError):
            sd(p, (0, 0))


class TestSdi:
    def test_tie_by_evaluation(self):
        problem, ids = truncation_pays_market()
        got = sdi(problem, (ids["a"], ids["b"]), TieBreakPolicy.BY_EVALUATION)
        assert got == Matching({ids["a"]: 3, ids["b"]: 1})

    def test_tie_by_preference(self):
        problem, ids = truncation_pays_market()
        got = sdi(problem, (ids["a"], ids["b"]), TieBreakPolicy.BY_PREFERENCE)
        assert got == Matching({ids["a"]: 1, ids["b"]: 3})

    def test_unique_agreement_maximal_output_for_any_order(self):
        problem, ids = efficiency_clash()
        want = Matching({ids["a"]: 3, ids["b"]: 2, ids["c"]: 1, ids["d"]: 4})
        from itertools import permutations

        for order in permutations(sorted(ids.values())):
            for tie in TieBreakPolicy:
                assert sdi(problem, order, tie) == want

    def test_output_in_literal_terminal_set(self):
        rng = np.random.default_rng(7)
        for _ in range(150):
            p = oracle.random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            order = tuple(sorted(p.market.children))
            terminal = {m for m in oracle.sdi_terminal_set(p, order)}
            for tie in TieBreakPolicy:
                assert sdi(p, order, tie) in terminal

    def test_commitment_set_equals_literal_terminal_set(self):
        from unamatch.mechanisms import sdi_commitments
        from unamatch.oracle import _commitment_members

        rng = np.random.default_rng(11)
        for _ in range(120):
            p = oracle.random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            order = tuple(int(c) for c in rng.permutation(sorted(p.market.children)))
            literal = {m for m in oracle.sdi_terminal_set(p, order)}
            members = set(_commitment_members(p, sdi_commitments(p, order), oracle.DEFAULT_CAP))
            assert members == literal

    def test_output_is_unanimous_on_random_small_markets(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            p = oracle.random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            order = tuple(int(c) for c in rng.permutation(sorted(p.market.children)))
            assert oracle.is_unanimous(p, sdi(p, order))


class TestAsdi:
    def test_adaptive_order_from_worked_example(self):
        problem, ids = efficiency_clash()
        order = tuple(ids[n] for n in ("d", "c", "a", "b"))
        for tie in TieBreakPolicy:
            mu = asdi(problem, order, tie)
            assert mu.get(ids["c"]) == 1 and mu.get(ids["d"]) == 4
            assert mu.get(ids["a"]) in {2, 3} and mu.get(ids["b"]) in {2, 3}

    def test_equals_sdi_when_no_retiering_triggers(self):
        problem, ids = all_unanimous_market()
        order = tuple(sorted(ids.values()))
        for tie in TieBreakPolicy:
            assert asdi(problem, order, tie) == sdi(problem, order, tie)

    def test_single_child_takes_best_agreed_home(self):
        p = build_problem(3, {0: ((1, 2, 3), (3, 1, 2))})
        # tier 1 is {1, 3}; by-preference pick is 1, by-evaluation pick is 3
        assert asdi(p, (0,), TieBreakPolicy.BY_PREFERENCE) == Matching({0: 1})
        assert asdi(p, (0,), TieBreakPolicy.BY_EVALUATION) == Matching({0: 3})

    def test_commitment_set_equals_literal_terminal_set(self):
        from unamatch.oracle import _commitment_members

        rng = np.random.default_rng(17)
        for _ in range(120):
            p = oracle.random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            order = tuple(int(c) for c in rng.permutation(sorted(p.market.children)))
            literal = {m for m in oracle.asdi_terminal_set(p, order)}
            members = set(_commitment_members(p, asdi_commitments(p, order), oracle.DEFAULT_CAP))
            assert members == literal

    def test_output_is_unimprovable_on_random_small_markets(self):
        rng = np.random.default_rng(19)
        for _ in range(150):
            p = oracle.random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            order = tuple(int(c) for c in rng.permutation(sorted(p.market.children)))
            assert oracle.is_unimprovable(p, asdi(p, order))


class TestUttc:
    def test_swap_cycle_restores_top_choices(self):
        problem, ids = all_unanimous_market()
        initial = Matching({ids["a"]: 2, ids["b"]: 1, ids["c"]: 3})
        got = uttc(problem, initial, PointingOrder.PREFERENCE)
        assert got == Matching({ids["a"]: 1, ids["b"]: 2, ids["c"]: 3})

    def test_unique_agreement_maximal_matching_is_fixed_point(self):
        problem, ids = efficiency_clash()
        mu = Matching({ids["a"]: 3, ids["b"]: 2, ids["c"]: 1, ids["d"]: 4})
        assert uttc(problem, mu, PointingOrder.PREFERENCE) == mu

    def test_all_top_ranked_is_fixed_point(self):
        p = build_problem(2, {0: ((1, 2), (1, 2)), 1: ((2, 1), (2, 1))})
        mu = Matching({0: 1, 1: 2})
        assert uttc(p, mu, PointingOrder.PREFERENCE) == mu

    def test_rejects_non_unanimous_initial(self):
        problem, ids = efficiency_clash()
        identity = Matching({ids["a"]: 1, ids["b"]: 2, ids["c"]: 3, ids["d"]: 4})
        with pytest.raises(ValueError):
            uttc(problem, identity, check_initial=True)

    def test_never_unmatches_and_never_worsens(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            p = oracle.random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            order = tuple(int(c) for c in rng.permutation(sorted(p.market.children)))
            for pointing, rankings in (
                (PointingOrder.PREFERENCE, p.prefs),
                (PointingOrder.EVALUATION, p.evals),
            ):
                seed = sdi(p, order)
                out = uttc(p, seed, pointing, check_initial=False)
                for c in p.market.children:
                    if seed.get(c) is not None:
                        assert out.get(c) is not None
                        assert not rankings[c].prefers(seed.get(c), out.get(c))

    def test_output_unanimous_and_constrained_efficient(self):
        rng = np.random.default_rng(29)
        for _ in range(150):
            p = oracle.random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            order = tuple(int(c) for c in rng.permutation(sorted(p.market.children)))
            out = uttc(p, sdi(p, order), PointingOrder.PREFERENCE, check_initial=False)
            assert oracle.is_unanimous(p, out)
            assert oracle.is_constrained_efficient(p, out)


class TestRsa:
    def test_first_available_home(self):
        p = build_problem(3, {0: ((1, 2, 3), (1, 2, 3))})
        assert rsa(p, {1: 0, 2: 1, 3: 1}) == {0: 2}

    def test_over_capacitates(self):
        p = build_problem(2, {0: ((1, 2), (1, 2)), 1: ((1, 2), (2, 1))})
        assert rsa(p, {1: 1, 2: 1}) == {0: 1, 1: 1}

    def test_nothing_available(self):
        p = build_problem(2, {0: ((1, 2), (1, 2))})
        assert rsa(p, {1: 0, 2: 0}) == {}

    def test_availability_must_be_total(self):
        p = build_problem(2, {0: ((1, 2), (1, 2))})
        with pytest.raises(ValueError):
            rsa(p, {1: 1})

    def test_match_independent_of_other_reports(self):
        from unamatch.core import all_strict_rankings

        ranking = StrictRanking((2, 3, 1))
        for avail_bits in range(8):
            avail = {h + 1: (avail_bits >> h) & 1 for h in range(3)}
            mine = rsa_match(ranking, avail)
            for other in all_strict_rankings([1, 2, 3]):
                p = build_problem(3, {0: (ranking.ordered, (1, 2, 3)), 1: (other.ordered, (1, 2, 3))})
                assert rsa(p, avail).get(0) == mine
