"""Multi-indices and symmetric tensors in the monomial basis."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from foliquant import symtensor
from foliquant.symtensor import SymTensor

dims = st.integers(1, 4)
degrees = st.integers(0, 4)
seeds = st.integers(0, 10_000)


def random_tensor(rng, dim, degree, variance="contravariant"):
    return SymTensor(dim, degree, variance, rng.normal(size=symtensor.count(dim, degree)))


# =============================================================================
# Multi-indices
# =============================================================================


class TestMultiIndices:
    @given(dims, degrees)
    def test_count_is_binomial(self, dim, degree):
        idx = symtensor.multi_indices(dim, degree)
        assert len(idx) == math.comb(dim + degree - 1, degree) == symtensor.count(dim, degree)
        assert len(set(idx)) == len(idx)
        assert all(sum(g) == degree and len(g) == dim for g in idx)

    def test_order_is_graded_lexicographic(self):
        assert symtensor.multi_indices(2, 2) == ((2, 0), (1, 1), (0, 2))

    def test_transverse_selection(self):
        sel = symtensor.transverse_selection(3, 2, 1)
        picked = [symtensor.multi_indices(3, 2)[i] for i in sel]
        assert picked == [(0, 2, 0), (0, 1, 1), (0, 0, 2)]

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            symtensor.multi_indices(0, 1)
        with pytest.raises(ValueError):
            symtensor.multi_indices(2, -1)


# =============================================================================
# Basis changes
# =============================================================================


class TestFullArray:
    @given(dims, degrees)
    def test_compression_inverts_expansion(self, dim, degree):
        comp = symtensor.compression_matrix(dim, degree)
        exp = symtensor.expansion_matrix(dim, degree)
        assert np.allclose(comp @ exp, np.eye(symtensor.count(dim, degree)))

    @given(dims, st.integers(1, 3), seeds)
    def test_full_array_is_symmetric_and_realizes_polynomial(self, dim, degree, seed):
        rng = np.random.default_rng(seed)
        s = random_tensor(rng, dim, degree)
        full = s.full()
        for perm in itertools.permutations(range(degree)):
            assert np.allclose(full, np.transpose(full, perm))
        a = rng.normal(size=dim)
        val = full
        for _ in range(degree):
            val = val @ a
        assert val == pytest.approx(s.polynomial(a))


# =============================================================================
# Algebra
# =============================================================================


class TestOperations:
    @given(dims, st.integers(0, 3), st.integers(0, 3), seeds)
    def test_sym_product_multiplies_polynomials(self, dim, ka, kb, seed):
        rng = np.random.default_rng(seed)
        s, t = random_tensor(rng, dim, ka), random_tensor(rng, dim, kb)
        a = rng.normal(size=dim)
        assert symtensor.sym_product(s, t).polynomial(a) == pytest.approx(s.polynomial(a) * t.polynomial(a))

    @given(dims, st.integers(1, 4), seeds)
    def test_contract_is_directional_derivative(self, dim, degree, seed):
        rng = np.random.default_rng(seed)
        s = random_tensor(rng, dim, degree)
        eta, a = rng.normal(size=(2, dim))
        h = 1e-5
        num = (s.polynomial(a + h * eta) - s.polynomial(a - h * eta)) / (2 * h)
        assert symtensor.contract(eta, s).polynomial(a) == pytest.approx(num, rel=1e-6, abs=1e-8)

    @given(dims, degrees, seeds)
    def test_pairing_of_powers(self, dim, degree, seed):
        rng = np.random.default_rng(seed)
        v, eta = rng.normal(size=(2, dim))
        pv = SymTensor.power(v, degree)
        pe = SymTensor.power(eta, degree, "covariant")
        assert symtensor.pair(pv, pe) == pytest.approx(float(v @ eta) ** degree)

    def test_power_components(self):
        # (a + 2b)^2 = a² + 4ab + 4b²
        assert SymTensor.power([1.0, 2.0], 2).as_dict() == {(2, 0): 1.0, (1, 1): 4.0, (0, 2): 4.0}

    @given(st.integers(1, 3), st.integers(0, 3), seeds)
    def test_push_is_a_representation(self, dim, degree, seed):
        rng = np.random.default_rng(seed)
        A, B = rng.normal(size=(2, dim, dim))
        c = rng.normal(size=symtensor.count(dim, degree))
        lhs = symtensor.push_coeffs(A @ B, c, dim, degree)
        rhs = symtensor.push_coeffs(A, symtensor.push_coeffs(B, c, dim, degree), dim, degree)
        assert np.allclose(lhs, rhs)

    @given(st.integers(1, 3), st.integers(0, 3), seeds)
    def test_push_of_power(self, dim, degree, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(dim, dim))
        v = rng.normal(size=dim)
        pushed = symtensor.push_coeffs(A, SymTensor.power(v, degree).components, dim, degree)
        assert np.allclose(pushed, SymTensor.power(A @ v, degree).components)

    def test_project_transverse(self):
        s = SymTensor.from_dict(3, 1, {(1, 0, 0): 1.0, (0, 1, 0): 2.0, (0, 0, 1): 3.0})
        assert symtensor.project_transverse(s, 1).components.tolist() == [2.0, 3.0]


class TestErrors:
    def test_wrong_component_count(self):
        with pytest.raises(ValueError):
            SymTensor(2, 2, "contravariant", np.zeros(4))

    def test_pairing_needs_opposite_variance(self):
        s = SymTensor.zeros(2, 1)
        with pytest.raises(ValueError):
            symtensor.pair(s, s)

    def test_degree_zero_contraction(self):
        with pytest.raises(ValueError):
            symtensor.contract(np.ones(2), SymTensor.zeros(2, 0))


# =============================================================================
# Worked examples
# =============================================================================


class TestExamples:
    def test_small_index_sets(self):
        assert symtensor.multi_indices(2, 0) == ((0, 0),)
        assert symtensor.multi_indices(2, 1) == ((1, 0), (0, 1))

    def test_product_of_covectors(self):
        s = SymTensor(2, 1, "contravariant", np.array([1.0, 0.0]))
        t = SymTensor(2, 1, "contravariant", np.array([0.0, 1.0]))
        assert symtensor.sym_product(s, t).polynomial([2.0, 5.0]) == 10.0

    def test_contraction_of_square(self):
        e1e1 = SymTensor.power([1.0, 0.0], 2)
        assert symtensor.contract([1.0, 0.0], e1e1).components.tolist() == [2.0, 0.0]
        assert symtensor.contract([0.0, 1.0], e1e1).components.tolist() == [0.0, 0.0]

    def test_dual_pairing(self):
        e = SymTensor(3, 1, "contravariant", np.array([1.0, 0.0, 0.0]))
        eps = SymTensor(3, 1, "covariant", np.array([1.0, 0.0, 0.0]))
        assert symtensor.pair(e, eps) == 1.0

    def test_transverse_projection_of_degree_two(self):
        s = SymTensor.from_dict(3, 2, {(1, 1, 0): 4.0, (0, 2, 0): 7.0})
        assert symtensor.project_transverse(s, 1).as_dict() == {(2, 0): 7.0, (1, 1): 0.0, (0, 2): 0.0}
        assert np.array_equal(symtensor.project_transverse(s, 0).components, s.components)
