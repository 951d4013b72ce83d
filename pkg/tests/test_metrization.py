import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diversities.conformity import SetFamily, discrete_conformity, generate_from_diversities, indiscrete_conformity
from diversities.core import DomainError, GroundSet, SizeError
from diversities.metrization import (
    STATED,
    NestedBase,
    brute_force_cycles,
    compute_metrics,
    delta_bar,
    delta_cycle,
    delta_cycle_contracted,
    delta_prime,
    random_nested_base,
    refine_nested_base,
    verify_metrization,
)
from diversities.zoo import PointCloud, diameter_diversity


def down(X, *sets):
    return SetFamily.of(X, [list(s) for s in sets]).down_closure()


def two_level():
    X = GroundSet("abc")
    return NestedBase(X, (SetFamily.powerset(X), down(X, "ab", "c")))


def hand_counterexample():
    X = GroundSet("abcd")
    P = SetFamily.powerset(X)
    return NestedBase(X, (P, P, down(X, "bcd", "ab"), down(X, "cd", "bc", "a"), down(X, "cd", "a", "b")))


class TestNestedBase:
    def test_rejects_bad_top(self):
        X = GroundSet("ab")
        with pytest.raises(DomainError):
            NestedBase(X, (SetFamily.discrete(X),))

    def test_rejects_missing_singleton(self):
        X = GroundSet("ab")
        with pytest.raises(DomainError):
            NestedBase(X, (SetFamily.powerset(X), SetFamily.of(X, [[], ["a"]])))

    def test_rejects_triple_escape(self):
        X = GroundSet("abc")
        P = SetFamily.powerset(X)
        with pytest.raises(DomainError):
            NestedBase(X, (P, down(X, "ab", "bc"), down(X, "ab", "bc")))

    def test_size(self):
        X = GroundSet(range(7))
        with pytest.raises(SizeError):
            NestedBase(X, (SetFamily.powerset(X),))

    def test_json_roundtrip(self):
        b = hand_counterexample()
        again = NestedBase.from_json(b.to_json())
        assert [C.members for C in again.levels] == [C.members for C in b.levels]


class TestRefine:
    def test_discrete(self):
        b = refine_nested_base(discrete_conformity(GroundSet("abc")))
        assert b.m == 1 and b.levels[1].members == SetFamily.discrete(b.ground).members

    def test_indiscrete(self):
        assert refine_nested_base(indiscrete_conformity(GroundSet("abc"))).m == 0

    def test_diam_line(self):
        c = PointCloud([[0.0], [1.0], [2.0]])
        conf = generate_from_diversities([diameter_diversity(c.metric())], c.labels)
        b = refine_nested_base(conf)
        assert b.m == 2
        assert b.levels[-1].members == SetFamily.discrete(c.labels).members
        assert verify_metrization(b).passed

    def test_seed_becomes_first_level(self):
        cloud = PointCloud([[0.0], [1.0], [3.0]])
        c = generate_from_diversities([diameter_diversity(cloud.metric())], cloud.labels)
        for u in c.families:
            b = refine_nested_base(c, seed=u)
            if u.members != SetFamily.powerset(c.ground).members:
                assert b.levels[1].members == u.members


class TestValues:
    def test_two_level_example(self):
        b = two_level()
        assert delta_prime(b, "ab") == 0 and delta_prime(b, "ac") == 1
        assert delta_bar(b, "ac") == 1 and delta_cycle(b, "ac") == 1
        assert delta_cycle(b, "a") == delta_bar(b, "a") == 0

    def test_indiscrete_all_zero(self):
        X = GroundSet("abc")
        M = compute_metrics(NestedBase(X, (SetFamily.powerset(X),)))
        assert not M.prime.any() and not M.cyc.any()

    def test_discrete_positive_pairs(self):
        b = refine_nested_base(discrete_conformity(GroundSet("abc")))
        M = compute_metrics(b)
        for m in (3, 5, 6):
            assert M.cyc[m] > 0
        assert verify_metrization(b).passed

    def test_witness_cycle_costs_value(self):
        b = hand_counterexample()
        M = compute_metrics(b)
        X = b.ground
        for m in X.all_masks():
            for kind, table in (("cycle", M.cyc), ("chain", M.bar)):
                w = [X.mask(s) for s in M.witness(m, kind)]
                cover = 0
                for s in w:
                    cover |= s
                assert cover & m == m
                assert np.isclose(sum(M.prime[s] for s in w), table[m])
                assert all(a & b for a, b in zip(w, w[1:]))
                if kind == "cycle" and len(w) > 1:
                    assert w[0] & w[-1]

    @given(st.integers(0, 10_000))
    def test_value_bounds(self, seed):
        M = compute_metrics(random_nested_base(seed))
        assert (M.cyc <= M.prime + 1e-12).all()
        assert (M.prime <= 4 * M.cyc + 1e-12).all()
        assert (M.bar <= M.cyc + 1e-12).all() and (M.cyc <= 2 * M.bar + 1e-12).all()


class TestOracles:
    def test_contraction(self):
        for seed in range(100):
            b = random_nested_base(seed)
            assert np.allclose(delta_cycle_contracted(b), compute_metrics(b).cyc)

    def test_brute_force_small(self):
        checked = 0
        for seed in range(120):
            b = random_nested_base(seed)
            if len(b.ground) > 3:
                continue
            checked += 1
            assert np.allclose(brute_force_cycles(b), compute_metrics(b).cyc)
        assert checked >= 30


class TestVerify:
    def test_random_seeds_pass(self):
        for seed in range(100):
            rep = verify_metrization(random_nested_base(seed))
            assert rep.passed, (seed, rep.failed())

    def test_counterexample_is_detected(self):
        rep = verify_metrization(hand_counterexample())
        assert set(rep.failed()) == {"axioms", "delta<=bar"}
        v = rep.values
        assert v["a,d"]["delta"] == 0.5 and v["a,d"]["bar"] == 0.375
        # D2 with A = {a}, B = {b}, C = {d}
        assert v["a,d"]["delta"] > v["a,b"]["delta"] + v["b,d"]["delta"]
        w = rep.checks["delta<=bar"]["witnesses"][0]
        assert w["cycle"] and w["chain"]

    def test_correct_directions_hold_where_stated_ones_fail(self):
        for seed in (271,):
            rep = verify_metrization(random_nested_base(seed))
            assert not rep.passed
            assert set(rep.failed()) <= {"axioms", "delta<=bar"}
            for key in ("bar<=delta", "delta<=2bar", "delta<=prime", "prime<=4delta", "identity", "generation"):
                assert rep.checks[key]["passed"]

    def test_stated_keys_present(self):
        rep = verify_metrization(two_level())
        assert set(STATED) <= set(rep.checks)
