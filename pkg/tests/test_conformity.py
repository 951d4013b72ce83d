import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diversities.conformity import (
    FilterBase,
    SetFamily,
    ViolationReport,
    compare_uniformities,
    compose,
    conformity,
    discrete_conformity,
    dominates,
    filter_base_from_json,
    filter_cauchy_and_limits,
    functor_diagram_check,
    generate_from_diversities,
    indiscrete_conformity,
    induced_uniformity,
    level_family,
    metric_topology,
    metric_uniformity,
    pointwise_conformity,
    sequence_cauchy_conformity,
    uniform_topology,
    validate_conformity,
)
from diversities.core import (
    DomainError,
    GroundSet,
    UnsupportedError,
    evaluate,
    function_from_values,
    induced_metric,
    zero_function,
)
from diversities.zoo import PointCloud, WeightedGraph, cloud_steiner_diversity, diameter_diversity, graph_steiner_diversity

X3 = GroundSet([0, 1, 2])


def diam_line(*xs):
    c = PointCloud([[x] for x in xs])
    return diameter_diversity(c.metric()), c.labels


def family(draw_masks, n):
    return SetFamily(GroundSet(range(n)), frozenset(draw_masks))


@st.composite
def families(draw, n=4):
    masks = draw(st.sets(st.integers(0, (1 << n) - 1), max_size=10))
    return family(masks, n)


@st.composite
def clouds(draw, max_n=5):
    pts = draw(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=2, max_size=max_n, unique=True))
    return PointCloud(np.array(pts, dtype=float))


@st.composite
def small_graphs(draw, max_n=5):
    n = draw(st.integers(2, max_n))
    edges = [(i, i + 1, draw(st.integers(0, 4))) for i in range(n - 1)]
    for i, j in itertools.combinations(range(n), 2):
        if j > i + 1 and draw(st.booleans()):
            edges.append((i, j, draw(st.integers(0, 4))))
    return WeightedGraph(range(n), edges)


class TestCompose:
    def test_singletons(self):
        X = GroundSet("ab")
        D = SetFamily.discrete(X)
        assert compose(D, D).members == frozenset({1, 2})

    def test_powerset_reaches_full(self):
        X = GroundSet("abc")
        P = SetFamily.powerset(X)
        assert X.full_mask in compose(P, P)

    def test_ground_mismatch(self):
        with pytest.raises(DomainError):
            compose(SetFamily.discrete(GroundSet("ab")), SetFamily.discrete(GroundSet("xy")))

    @given(families(), families(), families(), families())
    def test_monotone(self, U, V, U2, V2):
        assert compose(U, V) <= compose(U | U2, V | V2)

    @given(families())
    def test_associative_and_nested(self, D):
        DD = compose(D, D)
        assert compose(DD, D) == compose(D, DD)
        assert compose(DD, D) <= compose(DD, DD)


class TestValidate:
    def test_discrete(self):
        assert isinstance(discrete_conformity(GroundSet("ab")).certificates, tuple)

    def test_indiscrete(self):
        c = indiscrete_conformity(GroundSet("abc"))
        assert c.certificates[0]["witness_meet"] == [0]

    def test_c2_violation(self):
        X = GroundSet("ab")
        bad = SetFamily.of(X, [[], ["a"], ["b"], ["a", "b"]]).members - {0}
        r = validate_conformity(FilterBase((SetFamily(X, bad),)))
        assert isinstance(r, ViolationReport) and r.axiom == "C2"
        assert r.detail["missing_subset"] == []

    def test_c1_violation(self):
        X = GroundSet("ab")
        r = validate_conformity(FilterBase((SetFamily.of(X, [[], ["a"]]),)))
        assert r.axiom == "C1" and r.detail["missing"] == ["b"]

    def test_c3_violation(self):
        # pairs {0,1}, {1,2} but not {0,1,2}: C∘C escapes and nothing smaller exists
        X = X3
        C = SetFamily.of(X, [[], [0], [1], [2], [0, 1], [1, 2]])
        r = validate_conformity(FilterBase((C,)))
        assert r.axiom == "C3"

    def test_empty_family_rejected(self):
        with pytest.raises(DomainError):
            FilterBase((SetFamily(X3, frozenset()),))

    def test_json(self):
        fb = filter_base_from_json({"ground": ["a", "b"], "families": [[[], ["a"], ["b"]]]})
        assert validate_conformity(fb).passed


class TestGeneration:
    def test_collinear_c1(self):
        d, X = diam_line(0, 1, 2)
        assert level_family(d, X, 1.0).subsets() == [(), (0,), (1,), (2,), (0, 1), (1, 2)]

    def test_zero_is_indiscrete(self):
        c = generate_from_diversities([zero_function(X3)], X3)
        assert len(c.families) == 1 and c.families[0].members == SetFamily.powerset(X3).members

    def test_scaling_gives_same_filter(self):
        d, X = diam_line(0, 1, 3)
        d2 = function_from_values(X, {X.from_mask(m): 2 * evaluate(d, X.from_mask(m)).ub for m in X.all_masks()})
        a = generate_from_diversities([d], X)
        b = generate_from_diversities([d, d2], X)
        assert dominates(a.families, b.families) and dominates(b.families, a.families)

    def test_interval_rejected(self):
        c = PointCloud([[0, 0], [1, 0], [0, 1]])
        with pytest.raises(UnsupportedError):
            generate_from_diversities([cloud_steiner_diversity(c)], c.labels)

    @given(clouds())
    def test_level_meets_and_half_witness(self, c):
        d = diameter_diversity(c.metric())
        X = c.labels
        vals = sorted({evaluate_ub(d, X, m) for m in X.all_masks()})
        for e1, e2 in itertools.combinations(vals, 2):
            assert level_family(d, X, e1) & level_family(d, X, e2) == level_family(d, X, min(e1, e2))
        for e in vals:
            half = level_family(d, X, e / 2)
            assert compose(half, half) <= level_family(d, X, e)

    @given(small_graphs())
    def test_generated_bases_validate(self, g):
        c = generate_from_diversities([graph_steiner_diversity(g)], g.vertices)
        assert validate_conformity(c.base).passed


def evaluate_ub(d, X, m):
    return evaluate(d, X.from_mask(m)).ub


class TestUniformity:
    def test_discrete_diagonal(self):
        u = induced_uniformity(discrete_conformity(X3))
        assert u.relations[0] == frozenset((i, i) for i in range(3))

    def test_indiscrete_full(self):
        u = induced_uniformity(indiscrete_conformity(X3))
        assert len(u.relations[0]) == 9

    def test_diam_pairs(self):
        d, X = diam_line(0, 1, 2)
        c = generate_from_diversities([d], X)
        k = [i for i, lab in enumerate(c.labels) if lab["eps"] == 1.0][0]
        rel = induced_uniformity(c).relations[k]
        assert rel == frozenset((i, j) for i in range(3) for j in range(3) if abs(i - j) <= 1)
        assert all(induced_uniformity(c).validate().values())

    def test_requires_validated(self):
        with pytest.raises(DomainError):
            induced_uniformity(FilterBase((SetFamily.discrete(X3),)))

    def test_uniformity_agreement_examples(self):
        d, X = diam_line(0, 1, 2)
        assert compare_uniformities([d], X)
        g = WeightedGraph(range(3), [(0, 1, 1), (1, 2, 2)])
        assert compare_uniformities([graph_steiner_diversity(g)], g.vertices)
        d2, _ = diam_line(0, 5, 6)
        assert compare_uniformities([d, d2], X)

    @given(small_graphs(), small_graphs())
    def test_uniformity_agreement_random(self, g, h):
        n = min(len(g.vertices), len(h.vertices))
        X = GroundSet(range(n))
        dg = restrict(graph_steiner_diversity(g), X)
        dh = restrict(graph_steiner_diversity(h), X)
        rep = compare_uniformities([dg, dh], X)
        assert rep.holds
        assert rep.conformity_base_size >= 1 and rep.uniformity_base_size == rep.conformity_base_size


def restrict(d, X):
    return function_from_values(X, {X.from_mask(m): evaluate(d, X.from_mask(m)).ub for m in X.all_masks()}, d.name)


class TestTopology:
    def test_discrete_and_indiscrete(self):
        assert uniform_topology(induced_uniformity(discrete_conformity(X3))).is_discrete()
        assert uniform_topology(induced_uniformity(indiscrete_conformity(X3))).is_indiscrete()

    def test_zero_pair_not_separated(self):
        X = GroundSet("abc")
        d = function_from_values(X, {("a", "b"): 0, ("a", "c"): 1, ("b", "c"): 1, ("a", "b", "c"): 1})
        top = uniform_topology(induced_uniformity(generate_from_diversities([d], X)))
        a, b = X.mask(["a"]), X.mask(["b"])
        assert all(bool(O & a) == bool(O & b) for O in top.opens)
        assert top == metric_topology(induced_metric(d, X))

    @given(clouds())
    def test_metric_coincidence(self, c):
        mt = c.metric()
        assert uniform_topology(metric_uniformity([mt])) == metric_topology(mt)


class TestFilters:
    def test_principal_point(self):
        c = discrete_conformity(X3)
        cauchy, limits = filter_cauchy_and_limits(SetFamily.of(X3, [[1]]), c)
        assert cauchy and limits == [1]

    def test_indiscrete_all_limits(self):
        c = indiscrete_conformity(X3)
        cauchy, limits = filter_cauchy_and_limits(SetFamily.of(X3, [[0, 1, 2], [0, 1]]), c)
        assert cauchy and limits == [0, 1, 2]

    def test_pair_under_discrete(self):
        cauchy, limits = filter_cauchy_and_limits(SetFamily.of(X3, [[0, 1]]), discrete_conformity(X3))
        assert not cauchy and limits == []

    def test_empty_member(self):
        with pytest.raises(DomainError):
            filter_cauchy_and_limits(SetFamily.of(X3, [[]]), discrete_conformity(X3))
        with pytest.raises(DomainError):
            filter_cauchy_and_limits(SetFamily.of(X3, [[0], [1]]), discrete_conformity(X3))

    @given(small_graphs(4), st.sets(st.integers(0, 3), min_size=1))
    def test_cauchy_filters_have_limits(self, g, F):
        X = g.vertices
        F = {x for x in F if x in X.labels} or {0}
        c = generate_from_diversities([graph_steiner_diversity(g)], X)
        cauchy, limits = filter_cauchy_and_limits(SetFamily.of(X, [sorted(F)]), c)
        if cauchy:
            assert limits


class TestSequences:
    def test_eventually_constant(self):
        for c in (discrete_conformity(X3), indiscrete_conformity(X3)):
            assert sequence_cauchy_conformity([0, 2, 1, 1], c, period=1).status == "certified"

    def test_alternating_discrete(self):
        assert sequence_cauchy_conformity([0, 1, 0, 1], discrete_conformity(X3), period=2).status == "refuted"

    def test_alternating_close_pair(self):
        d, X = diam_line(0, 0.1, 5)
        c = generate_from_diversities([d], X)
        v = sequence_cauchy_conformity([2, 0, 1, 0, 1], c, period=2)
        rows = {r["family"]: r for r in v.per_family}
        for k, lab in enumerate(c.labels):
            assert rows[k]["state"] == ("certified" if lab["eps"] >= 0.1 else "refuted")
            if rows[k]["state"] == "certified":
                assert rows[k]["N"] == (1 if lab["eps"] >= 5 else 2)

    def test_prefix_only(self):
        assert sequence_cauchy_conformity([0, 1], discrete_conformity(X3)).status == "inconclusive"


class TestFunctors:
    def test_diam(self):
        d, X = diam_line(0, 1, 2)
        assert functor_diagram_check(d, X).passed

    def test_zero_pair(self):
        X = GroundSet("abc")
        d = function_from_values(X, {("a", "b"): 0, ("a", "c"): 2, ("b", "c"): 2, ("a", "b", "c"): 2})
        r = functor_diagram_check(d, X)
        assert r.passed and not r.uniform_topology.is_discrete()

    def test_zero(self):
        r = functor_diagram_check(zero_function(X3), X3)
        assert r.passed and r.uniform_topology.is_indiscrete()


class TestPointwise:
    def test_kernel_groups_functions_agreeing_on_samples(self):
        c = pointwise_conformity({"f": [0, 1], "g": [0, 1], "h": [0, 0.5]})
        K = c.kernel
        assert ["f", "g"] in K and ["f", "h"] not in K
        assert validate_conformity(c.base).passed

    def test_coarser_than_each_sample(self):
        funcs = {"f": [0.0, 1.0], "g": [1.0, 1.0], "h": [0.5, 0.0]}
        c = pointwise_conformity(funcs)
        X = c.ground
        for s in range(2):
            vals = {X.from_mask(m): (max(funcs[f][s] for f in X.from_mask(m)) - min(funcs[f][s] for f in X.from_mask(m)))
                    if m else 0.0 for m in X.all_masks()}
            single = generate_from_diversities([function_from_values(X, vals)], X)
            assert dominates(c.families, single.families)

    def test_rejects_ragged(self):
        with pytest.raises(DomainError):
            pointwise_conformity({"f": [0.0], "g": [0.0, 1.0]})
