import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delaytomo.sensing import (
    CapacityError,
    DelayVector,
    build_matrix,
    encode,
    load_matrix,
    matrix_to_json,
    min_group_height,
    riemann_zeta,
    sample_coprime_vectors,
)

from oracles import dense_encode, enumerate_coprime_vectors, zeta_series


class TestZeta:
    def test_closed_form_pi2_over_6(self):
        assert riemann_zeta(2) == pytest.approx(math.pi**2 / 6, abs=1e-9)

    def test_closed_form_pi4_over_90(self):
        assert riemann_zeta(4) == pytest.approx(math.pi**4 / 90, abs=1e-9)

    def test_large_exponent_against_series_oracle(self):
        val = riemann_zeta(20)
        assert 1.0 < val < 1.000002
        assert val == pytest.approx(zeta_series(20), abs=1e-12)

    def test_diverges_below_two(self):
        with pytest.raises(ValueError):
            riemann_zeta(1)

    @given(st.integers(min_value=2, max_value=40))
    def test_value_in_unit_band(self, r):
        assert 1.0 < riemann_zeta(r) <= 2.0


class TestMinGroupHeight:
    def brute(self, n, cap):
        r = 2
        while (cap**r) / zeta_series(r) < 3 * n:
            r += 1
        return r

    @pytest.mark.parametrize(
        "n,cap,expect", [(1, 2, 3), (1000, 2, 12), (1000, 4096, 2)]
    )
    def test_known_points(self, n, cap, expect):
        assert min_group_height(n, cap) == expect
        assert self.brute(n, cap) == expect

    @given(st.integers(min_value=1, max_value=10**5), st.integers(min_value=2, max_value=64))
    @settings(max_examples=40)
    def test_matches_direct_evaluation(self, n, cap):
        r = min_group_height(n, cap)
        assert (cap**r) / riemann_zeta(r) >= 3 * n
        assert r == 2 or (cap ** (r - 1)) / riemann_zeta(r - 1) < 3 * n

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            min_group_height(0, 2)
        with pytest.raises(ValueError):
            min_group_height(5, 1)


class TestCoprimeSampling:
    def test_single_draw_is_valid(self):
        valid = enumerate_coprime_vectors(2, 2)
        (vec,) = sample_coprime_vectors(1, 2, 2, np.random.default_rng(0))
        assert vec in valid

    def test_exhausts_tiny_universe(self):
        # Only three unit-gcd vectors exist in [1,2]^2.
        got = sample_coprime_vectors(3, 2, 2, np.random.default_rng(1))
        assert set(got) == {(1, 1), (1, 2), (2, 1)}

    def test_capacity_error_when_too_few_exist(self):
        with pytest.raises(CapacityError):
            sample_coprime_vectors(4, 2, 2, np.random.default_rng(2))

    @given(
        st.integers(min_value=2, max_value=5),
        st.integers(min_value=2, max_value=6),
        st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=30)
    def test_all_draws_coprime_distinct_in_range(self, length, cap, seed):
        count = min(10, len(enumerate_coprime_vectors(length, min(cap, 3))))
        got = sample_coprime_vectors(count, length, cap, np.random.default_rng(seed))
        assert len(set(got)) == count
        for vec in got:
            assert math.gcd(*vec) == 1
            assert all(1 <= w <= cap for w in vec)


class TestBuildMatrix:
    def test_smallest_instance(self):
        m = build_matrix(1, 1, 2, mu_factor=3, seed=0)
        assert (m.n_groups, m.group_height, m.n_rows) == (3, 3, 9)
        assert len(m.graph.adjacency[0]) == 3

    def test_dimensions_follow_height_rule(self):
        m = build_matrix(10**4, 100, 2, seed=1)
        assert m.group_height == min_group_height(10**4, 2)
        assert m.n_groups == math.ceil(4.0 * 100)
        assert m.n_rows == m.group_height * m.n_groups

    def test_deterministic_given_seed(self):
        a = build_matrix(50, 5, 3, seed=99)
        b = build_matrix(50, 5, 3, seed=99)
        assert matrix_to_json(a) == matrix_to_json(b)
        assert a == b

    def test_column_structure(self):
        m = build_matrix(40, 4, 4, seed=7)
        seen = set()
        for j in range(m.n):
            groups = m.graph.adjacency[j]
            assert len(set(groups)) == 3
            for i in groups:
                vec = m.weights[(j, i)]
                assert len(vec) == m.group_height
                assert all(1 <= w <= 4 for w in vec)
                assert math.gcd(*vec) == 1
                seen.add(vec)
        assert len(seen) == 3 * m.n  # pairwise distinct

    def test_argument_errors(self):
        with pytest.raises(ValueError):
            build_matrix(0, 1, 2)
        with pytest.raises(ValueError):
            build_matrix(5, 6, 2)
        with pytest.raises(ValueError):
            build_matrix(5, 1, 1)
        with pytest.raises(ValueError):
            build_matrix(5, 1, 2, mu_factor=0)

    def test_json_round_trip(self):
        m = build_matrix(30, 3, 3, seed=4)
        text = matrix_to_json(m)
        again = load_matrix(text)
        assert matrix_to_json(again) == text
        assert again == m


class TestDelayVector:
    def test_sparsity_enforced(self):
        with pytest.raises(ValueError):
            DelayVector((1, 2, 3), sparsity=2)

    def test_nonneg_mode(self):
        with pytest.raises(ValueError):
            DelayVector((1, -2, 0), sparsity=2, nonneg=True)
        DelayVector((1, -2, 0), sparsity=2)  # fine without the flag

    def test_finite_required(self):
        with pytest.raises(ValueError):
            DelayVector((float("nan"), 0.0), sparsity=1)

    def test_exactness_detection(self):
        assert DelayVector((1, Fraction(1, 2)), sparsity=2).is_exact
        assert not DelayVector((1.0, 0.5), sparsity=2).is_exact


class TestEncode:
    def test_zero_vector(self):
        m = build_matrix(20, 2, 2, seed=3)
        y = encode(m, DelayVector.zeros(20))
        assert all(v == 0 for v in y.flat())

    def test_unit_vector_exposes_column(self):
        m = build_matrix(20, 2, 2, seed=3)
        j = 13
        y = encode(m, DelayVector.from_sparse(20, {j: 1}))
        for i in range(m.n_groups):
            if i in m.graph.adjacency[j]:
                assert y.groups[i] == m.weights[(j, i)]
            else:
                assert all(v == 0 for v in y.groups[i])

    @given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=1, max_value=5))
    @settings(max_examples=25, deadline=None)
    def test_matches_dense_oracle(self, seed, k):
        rng = np.random.default_rng(seed)
        m = build_matrix(60, k, 4, seed=seed)
        support = rng.choice(60, size=k, replace=False)
        d = DelayVector.from_sparse(
            60, {int(j): int(rng.integers(-50, 50)) or 1 for j in support}
        )
        assert list(encode(m, d).flat()) == dense_encode(m, d)

    def test_dimension_mismatch(self):
        m = build_matrix(20, 2, 2, seed=3)
        with pytest.raises(ValueError):
            encode(m, DelayVector.zeros(19))

    def test_float_mode_matches_dense(self):
        m = build_matrix(25, 3, 3, seed=6)
        rng = np.random.default_rng(6)
        d = DelayVector.from_sparse(25, {2: 0.25, 11: -1.5, 19: float(rng.random())})
        got = list(encode(m, d).flat())
        want = dense_encode(m, d)
        assert got == pytest.approx(want)
