import itertools

import numpy as np
import pytest

from unamatch import oracle
from unamatch.aggregation import BORDA, serial_choice_rule
from unamatch.core import (
    Market,
    Matching,
    Order,
    Problem,
    StrictRanking,
    all_strict_rankings,
    matched_acceptably,
    unanimous_children,
)
from unamatch.fixtures import (
    all_unanimous_market,
    efficiency_clash,
    truncation_pays_market,
    worst_case_truncation_market,
)
from unamatch.mechanisms import TieBreakPolicy, asdi, sd, sdi

from conftest import build_problem


class TestEnumeration:
    def test_two_by_two_complete(self):
        market = Market([0, 1], [1, 2])
        assert len(list(oracle.enumerate_matchings(market))) == 7

    def test_one_by_one(self):
        assert len(list(oracle.enumerate_matchings(Market([0], [1])))) == 2

    def test_edgeless(self):
        market = Market([0, 1], [1, 2], edges=[])
        assert [m.pairs for m in oracle.enumerate_matchings(market)] == [()]

    def test_cap_enforced(self):
        market = Market(range(5), range(5))
        with pytest.raises(oracle.SearchLimitExceeded):
            list(oracle.enumerate_matchings(market, cap=10))

    def test_no_duplicates(self):
        market = Market([0, 1, 2], [1, 2], edges=[(0, 1), (0, 2), (1, 1), (2, 2)])
        pool = [m.pairs for m in oracle.enumerate_matchings(market)]
        assert len(pool) == len(set(pool))


class TestUnanimityChecks:
    def test_unique_matching_is_unanimous(self):
        problem, ids = efficiency_clash()
        mu = Matching({ids["a"]: 3, ids["b"]: 2, ids["c"]: 1, ids["d"]: 4})
        assert oracle.is_unanimous(problem, mu)

    def test_swap_is_not(self):
        problem, ids = efficiency_clash()
        mu = Matching({ids["a"]: 2, ids["b"]: 3, ids["c"]: 1, ids["d"]: 4})
        assert not oracle.is_unanimous(problem, mu)

    def test_every_full_matching_unanimous_in_opposed_market(self):
        problem, ids = all_unanimous_market()
        for perm in itertools.permutations([1, 2, 3]):
            mu = Matching(dict(zip(sorted(ids.values()), perm)))
            assert oracle.is_unanimous(problem, mu)

    def test_unacceptable_matching_rejected(self):
        p = build_problem(2, {0: ((1,), (2,))})
        with pytest.raises(ValueError):
            oracle.is_unanimous(p, Matching({0: 1}))


class TestEfficiencyChecks:
    def test_paper_market_triple(self):
        problem, ids = efficiency_clash()
        mu = Matching({ids["a"]: 3, ids["b"]: 2, ids["c"]: 1, ids["d"]: 4})
        assert not oracle.is_efficient(problem, mu)
        assert oracle.is_constrained_efficient(problem, mu)

    def test_adaptive_output_unimprovable_but_not_unanimous(self):
        problem, ids = efficiency_clash()
        order = tuple(ids[n] for n in ("d", "c", "a", "b"))
        mu = asdi(problem, order, TieBreakPolicy.BY_PREFERENCE)
        assert mu.get(ids["a"]) == 2 and mu.get(ids["b"]) == 3
        assert oracle.is_unimprovable(problem, mu)
        assert not oracle.is_unanimous(problem, mu)

    def test_empty_market_trivially_fine(self):
        p = Problem(Market([], []), {}, {})
        empty = Matching({})
        assert oracle.is_efficient(p, empty)
        assert oracle.is_constrained_efficient(p, empty)
        assert oracle.is_unimprovable(p, empty)


class TestStrategyProofness:
    def test_truncation_against_sdi(self):
        problem, ids = truncation_pays_market()
        mech = lambda p: sdi(p, (ids["a"], ids["b"]), TieBreakPolicy.BY_PREFERENCE)
        assert mech(problem) == Matching({ids["a"]: 1, ids["b"]: 3})
        report = oracle.find_sp_violation(mech, problem)
        assert report is not None and report.kind == "profitable"
        # the canonical worked manipulation: b reports only 2 as acceptable
        pinned = oracle.find_sp_violation(
            mech, problem, children=[ids["b"]], misreports={ids["b"]: [StrictRanking((2,))]}
        )
        assert pinned is not None
        assert pinned.agent == ids["b"]
        assert pinned.outcome_under_misreport.get(ids["b"]) == 2

    def test_sd_is_strategy_proof(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            p = oracle.random_problem(rng, 3, 3)
            order = tuple(int(c) for c in rng.permutation(sorted(p.market.children)))
            assert oracle.find_sp_violation(lambda q: sd(q, order), p) is None

    def test_rsa_strategy_proof_small(self):
        from unamatch.mechanisms import rsa_match

        # exhaustive at |H| <= 3: no misreport ever beats truth under any draw
        space = all_strict_rankings([1, 2, 3])
        for truth in space:
            for avail_bits in range(8):
                avail = {h + 1: (avail_bits >> h) & 1 for h in range(3)}
                honest = truth.rank(rsa_match(truth, avail))
                for report in space:
                    assert truth.rank(rsa_match(report, avail)) >= honest


class TestConsistentSets:
    def test_worst_consistent_match_is_home_three(self):
        problem, ids = worst_case_truncation_market()
        b = ids["b"]
        sets = oracle.consistent_sets(
            oracle.sdi_family(), problem.market, b, problem.prefs[b], problem.evals[b]
        )
        assert sets.worst_match(b) == 3
        assert any(mu.get(b) == 3 for mu in sets.cu_minus)

    def test_single_child_market(self):
        market = Market([0], [1, 2, 3])
        pref, ev = StrictRanking((1, 2, 3)), StrictRanking((3, 1, 2))
        sets = oracle.consistent_sets(oracle.sdi_family(), market, 0, pref, ev)
        # tier one is {1, 3}; with no opponents those are the only outcomes
        assert {mu.get(0) for mu in sets.cu} == {1, 3}

    def test_child_with_nothing_acceptable(self):
        market = Market([0], [1, 2])
        sets = oracle.consistent_sets(
            oracle.sdi_family(), market, 0, StrictRanking(()), StrictRanking((1, 2))
        )
        assert {mu.get(0) for mu in sets.cu} == {None}


class TestObviousManipulation:
    def test_worst_case_truncation_found(self):
        problem, ids = worst_case_truncation_market()
        b = ids["b"]
        report = oracle.find_obvious_manipulation(
            oracle.sdi_family(), problem.market, b, problem.prefs[b], problem.evals[b]
        )
        assert report is not None and report.kind == "worst-case"

    def test_sd_has_none(self):
        market = Market([0, 1], [1, 2])
        pref, ev = StrictRanking((1, 2)), StrictRanking((2, 1))
        report = oracle.find_obvious_manipulation(
            oracle.sd_family(), market, 0, pref, ev
        )
        assert report is None

    def test_sdi_none_on_balanced_market_spot(self):
        # |H| = |C| = 3 for one truth; the full sweep lives in acceptance
        market = Market([0, 1, 2], [1, 2, 3])
        pref, ev = StrictRanking((1, 2, 3)), StrictRanking((3, 1, 2))
        report = oracle.find_obvious_manipulation(
            oracle.sdi_family(), market, 0, pref, ev
        )
        assert report is None


class TestGroupRobustness:
    def test_dictatorial_rule_robust_on_samples(self):
        rng = np.random.default_rng(5)
        rule = serial_choice_rule(["child"] * 4)
        for _ in range(10):
            p = oracle.random_problem(rng, 2, 4, truncation_prob=0.3)
            order = (0, 1)
            hit = oracle.find_group_robustness_violation(
                lambda q: sd(q, order), rule, p
            )
            assert hit is None

    def test_borda_violated_somewhere_on_single_child_market(self):
        # a non-dictatorial WPP rule admits a profitable, harmless
        # manipulation on some 1x4 profile
        market = Market([0], [1, 2, 3, 4])
        space = all_strict_rankings([1, 2, 3, 4])
        mech = lambda q: sd(q, (0,))
        found = False
        for pref in space:
            if found:
                break
            for ev in space:
                p = Problem(market, {0: pref}, {0: ev})
                if oracle.find_group_robustness_violation(mech, BORDA, p):
                    found = True
                    break
        assert found

    def test_one_by_one_market_robust(self):
        p = build_problem(1, {0: ((1,), (1,))})
        assert (
            oracle.find_group_robustness_violation(lambda q: sd(q, (0,)), BORDA, p)
            is None
        )


class TestIia:
    def test_sd_passes_on_sampled_problems(self):
        rng = np.random.default_rng(9)
        problems = [oracle.random_problem(rng, 2, 3) for _ in range(12)]
        assert oracle.check_iia(lambda p: sd(p, (0, 1)), problems) is None

    def test_single_child_sd(self):
        problems = [build_problem(3, {0: ((1, 2, 3), (3, 2, 1))})]
        assert oracle.check_iia(lambda p: sd(p, (0,)), problems) is None

    def test_report_keyed_mechanism_caught(self):
        # artificial mechanism keyed to the full ranking string
        def quirky(problem):
            pref = problem.prefs[0]
            if len(pref.ordered) % 2 == 0:
                return sd(problem, (0, 1))
            return sd(problem, (1, 0))

        problems = [build_problem(2, {0: ((1, 2), (1, 2)), 1: ((1, 2), (1, 2))})]
        assert oracle.check_iia(quirky, problems) is not None


class TestLiteralDictatorships:
    def test_terminal_set_on_truncation_market(self):
        problem, ids = truncation_pays_market()
        got = {m.pairs for m in oracle.sdi_terminal_set(problem, (ids["a"], ids["b"]))}
        want = {
            Matching({ids["a"]: 1, ids["b"]: 3}).pairs,
            Matching({ids["a"]: 3, ids["b"]: 1}).pairs,
        }
        assert got == want

    def test_adaptive_terminal_set_on_clash_market(self):
        problem, ids = efficiency_clash()
        order = tuple(ids[n] for n in ("d", "c", "a", "b"))
        got = oracle.asdi_terminal_set(problem, order)
        for mu in got:
            assert mu.get(ids["c"]) == 1 and mu.get(ids["d"]) == 4
            assert {mu.get(ids["a"]), mu.get(ids["b"])} == {2, 3}


class TestStructuralProperties:
    def test_domination_partial_order_small_markets(self):
        rng = np.random.default_rng(21)
        from unamatch.core import unanimously_dominates

        for _ in range(25):
            p = oracle.random_problem(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            pool = oracle.acceptable_matchings(p)
            stats = [
                (unanimous_children(p, m), matched_acceptably(p, m)) for m in pool
            ]
            distinct = sorted(
                {(tuple(sorted(i)), tuple(sorted(k))) for i, k in stats}
            )

            def dom(x, y):
                (i2, k2), (i1, k1) = x, y
                i1, i2, k1, k2 = set(i1), set(i2), set(k1), set(k2)
                return (i1 <= i2 and k1 <= k2) and (i1 < i2 or k1 < k2)

            for x in distinct:
                assert not dom(x, x)
            for x, y in itertools.combinations(distinct, 2):
                assert not (dom(x, y) and dom(y, x))
            for x, y, z in itertools.permutations(distinct, 3):
                if dom(y, x) and dom(z, y):
                    assert dom(z, x)
            # spot-check the quotient agrees with the real relation
            for m1, m2 in itertools.islice(itertools.product(pool, repeat=2), 200):
                lhs = unanimously_dominates(p, m2, m1)
                s1 = (
                    tuple(sorted(unanimous_children(p, m1))),
                    tuple(sorted(matched_acceptably(p, m1))),
                )
                s2 = (
                    tuple(sorted(unanimous_children(p, m2))),
                    tuple(sorted(matched_acceptably(p, m2))),
                )
                assert lhs == dom(s2, s1)

    def test_unanimous_matching_always_exists(self):
        rng = np.random.default_rng(27)
        for _ in range(60):
            p = oracle.random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            assert oracle.unanimous_matchings(p)

    def test_no_efficient_unanimous_matching_in_clash_market(self):
        problem, _ = efficiency_clash()
        for mu in oracle.unanimous_matchings(problem):
            assert not oracle.is_efficient(problem, mu)

    def test_reduction_equivalence_on_random_markets(self):
        # agreement-maximal iff efficient under the two-tier rankings
        rng = np.random.default_rng(31)
        from unamatch.core import unanimous_ranking

        for _ in range(40):
            p = oracle.random_problem(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
            tiers = {c: unanimous_ranking(p, c) for c in p.market.children}
            pool = oracle.acceptable_matchings(p)
            children = sorted(p.market.children)
            vectors = [
                tuple(tiers[c].rank(m.get(c)) for c in children) for m in pool
            ]
            for m, v in zip(pool, vectors):
                tier_efficient = not any(
                    all(a <= b for a, b in zip(w, v)) and w != v for w in vectors
                )
                assert oracle.is_unanimous(p, m) == tier_efficient
