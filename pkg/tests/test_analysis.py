import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diversities.analysis import (
    DEFAULT_EPS,
    _grid_skip,
    _grid_tail_sup,
    concatenated_grid_sequence,
    constant_sequence,
    converges_to,
    eventually_constant,
    extract_cauchy_subsequence,
    finite_prefix,
    grid_block,
    grid_offset,
    grid_term,
    inverse_sequence,
    is_cauchy_diversity,
    is_cauchy_metric,
    limits_are_unique,
    modulus_backed,
)
from diversities.core import DomainError, PreconditionError, evaluate
from diversities.zoo import euclidean_diameter, euclidean_steiner, grid_points

from .oracles import tail_sup_brute

DIAM = euclidean_diameter()
STEINER = euclidean_steiner(3)


@pytest.fixture(scope="module")
def grid_prefix():
    return np.vstack([grid_points(n) for n in range(1, 9)])


class TestGridSequence:
    def test_counts(self):
        for n in range(1, 12):
            assert grid_offset(n + 1) == sum(k**3 for k in range(1, n + 1))

    def test_first_terms(self):
        assert grid_term(1) == (0.0, 0.0, 0.0)
        assert grid_term(2) == (0.0, 0.0, 0.0)
        assert grid_term(3) == (0.0, 0.0, 0.25)
        assert grid_block(9) == (2, 7) and grid_block(10) == (3, 0)

    def test_matches_grid_points(self, grid_prefix):
        got = np.array([grid_term(i) for i in range(1, len(grid_prefix) + 1)])
        assert np.array_equal(got, grid_prefix)

    def test_tail_sup_matches_brute_force(self, grid_prefix):
        # the tail beyond G_8 sits inside the G_9 box, which the brute force covers
        full = np.vstack([grid_prefix, grid_points(9)])
        for i in range(1, len(grid_prefix) + 1):
            assert math.isclose(_grid_tail_sup(i), tail_sup_brute(full, i, len(full)), abs_tol=1e-12)

    def test_skip_never_jumps_a_valid_index(self):
        for k in range(1, 9):
            r = 2.0**-k
            i = 1
            while i < 5000:
                j = _grid_skip(i, r)
                for m in range(i, min(j, 5000)):
                    assert _grid_tail_sup(m) >= r
                i = j + 1

    def test_modulus_is_sound(self):
        s = concatenated_grid_sequence()
        for k in range(1, 6):
            eps = 2.0**-k
            N = s.modulus(eps)
            assert _grid_tail_sup(N) < eps


class TestCauchy:
    def test_flagship_pair(self):
        s = concatenated_grid_sequence()
        metric = is_cauchy_metric(s)
        div = is_cauchy_diversity(s, STEINER)
        assert metric.certified and div.refuted
        w = div.witness
        assert w["value"]["lb"] > 6 and w["window"] == [grid_offset(10) + 1, grid_offset(11)]
        lbs = [g["lb"] for g in div.growth]
        assert all(b > a for a, b in zip(lbs[1:], lbs[2:]))

    def test_alternating(self):
        v = is_cauchy_diversity(finite_prefix([(0.0,), (1.0,)] * 4, period=2), DIAM)
        assert v.refuted and v.witness["eps"] == 0.5

    def test_alternating_without_period_is_inconclusive(self):
        v = is_cauchy_diversity(finite_prefix([(0.0,), (1.0,)] * 4), DIAM)
        assert v.status == "inconclusive"

    def test_eventually_constant(self):
        s = eventually_constant([(3.0,), (1.0,)], (0.0,))
        assert is_cauchy_diversity(s, DIAM).certified
        assert is_cauchy_diversity(s, STEINER).certified

    def test_inverse(self):
        v = is_cauchy_metric(inverse_sequence())
        assert v.certified and dict(v.modulus_table)[0.25] == 4

    def test_window_validation(self):
        with pytest.raises(DomainError):
            is_cauchy_diversity(inverse_sequence(), DIAM, window=1)

    def test_scan_without_certificate_is_inconclusive(self):
        s = modulus_backed(lambda n: ((-1.0) ** n / n, 0.0, 0.0), lambda e: math.ceil(2 / e), name="osc")
        assert is_cauchy_diversity(s, STEINER, scan=8).status == "inconclusive"

    def test_scan_flags_non_monotone_function(self):
        from diversities.core import PseudodiversityFn

        pairs_only = PseudodiversityFn(lambda A: 1.0 if len(set(A)) == 2 else 0.0, "pairs", True, None)
        s = modulus_backed(lambda n: (float(n),), lambda e: 1, name="walk")
        with pytest.raises(PreconditionError):
            is_cauchy_diversity(s, pairs_only, scan=2)


class TestConvergence:
    def test_constant(self):
        assert converges_to(constant_sequence((2.0,)), (2.0,), DIAM).certified

    def test_constant_elsewhere(self):
        v = converges_to(constant_sequence((2.0,)), (0.0,), DIAM)
        assert v.refuted and v.witness["eps"] < 2

    def test_grid_diam(self):
        assert converges_to(concatenated_grid_sequence(), (0.0, 0.0, 0.0), DIAM).certified

    def test_grid_steiner(self):
        assert converges_to(concatenated_grid_sequence(), (0.0, 0.0, 0.0), STEINER).refuted

    def test_wrong_limit_refuted_with_valid_witness(self):
        s = inverse_sequence()
        v = converges_to(s, (1.0,), DIAM)
        assert v.refuted
        N = v.witness["tail_from"]
        for n in (N, N + 1, 10 * N):
            assert evaluate(DIAM, [s.element(n), (1.0,)]).ub > v.witness["eps"]

    def test_convergent_implies_cauchy(self):
        cases = [
            (constant_sequence((2.0,)), (2.0,), DIAM),
            (eventually_constant([(5.0,)], (1.0,)), (1.0,), STEINER),
            (inverse_sequence(), (0.0,), DIAM),
            (concatenated_grid_sequence(), (0.0, 0.0, 0.0), DIAM),
            (finite_prefix([(1.0,), (0.0,), (0.0,)], period=1), (0.0,), DIAM),
        ]
        for s, x, d in cases:
            assert converges_to(s, x, d).certified
            assert is_cauchy_diversity(s, d).certified

    @given(st.floats(0.01, 5))
    def test_double_limits_refuted(self, y):
        assert limits_are_unique(inverse_sequence(), (0.0,), (0.0,), DIAM)
        assert limits_are_unique(inverse_sequence(), (0.0,), (y,), DIAM)
        assert converges_to(inverse_sequence(), (y,), DIAM).refuted


class TestSubsequence:
    def test_inverse(self):
        r = extract_cauchy_subsequence(inverse_sequence(), DIAM)
        assert r.passed and all(r.minimal)
        for i, n in enumerate(r.indices, 1):
            assert n <= 2**i + 1
            assert 1 / n <= 2.0**-i  # tail sup of 1/n below the target
        assert all(a < b for a, b in zip(r.indices, r.indices[1:]))

    def test_bound_table(self):
        r = extract_cauchy_subsequence(inverse_sequence(), DIAM, count=10)
        for row in r.bound_table:
            assert row["bound"] == 2.0 ** (1 - row["N"])
            assert row["value"] <= row["chain"] + 1e-12 <= row["bound"] + 1e-9

    def test_grid_minimal_indices(self):
        s = concatenated_grid_sequence()
        r = extract_cauchy_subsequence(s, DIAM, count=6)
        assert r.passed and all(r.minimal)
        for i, n in enumerate(r.indices, 1):
            assert _grid_tail_sup(n) < 2.0**-i
            assert n <= s.modulus(2.0**-i)
        # the index before each n_i fails (or belongs to an earlier term)
        for i, n in enumerate(r.indices[1:], 2):
            assert _grid_tail_sup(n - 1) >= 2.0**-i or n - 1 == r.indices[i - 2]

    def test_constant(self):
        r = extract_cauchy_subsequence(constant_sequence((1.0,)), DIAM, count=4)
        assert r.indices == [1, 2, 3, 4] and r.passed
        assert all(row["value"] == 0 for row in r.bound_table)

    def test_array_path_without_tail_oracle(self):
        s = modulus_backed(lambda n: (1.0 / n,), lambda e: max(1, math.ceil(1 / e)), name="plain")
        r = extract_cauchy_subsequence(s, DIAM, count=8)
        assert r.passed

    def test_missing_modulus(self):
        with pytest.raises(PreconditionError):
            extract_cauchy_subsequence(finite_prefix([(0.0,), (1.0,)]), DIAM)

    def test_wrong_metric(self):
        from diversities.core import PseudodiversityFn

        double = PseudodiversityFn(lambda A: 2 * evaluate(DIAM, A).ub, "2diam", True, None, pairwise=True)
        with pytest.raises(PreconditionError):
            extract_cauchy_subsequence(inverse_sequence(), double)


def test_default_grid():
    assert DEFAULT_EPS[0] == 1 and DEFAULT_EPS[-1] == 2.0**-20 and len(DEFAULT_EPS) == 21
