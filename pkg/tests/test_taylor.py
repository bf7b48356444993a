"""Truncated jets: arithmetic, nested derivatives and jet linear algebra."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from foliquant import taylor
from foliquant.taylor import Jet, JetCapacityError, SingularJetError

finite = st.floats(-2.0, 2.0, allow_nan=False)


def fd(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


# =============================================================================
# Construction and generators
# =============================================================================


class TestLift:
    def test_lift_adds_one_generator(self):
        u = taylor.lift(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        assert u.depth == 1
        assert np.array_equal(u.std, [1.0, 2.0])
        assert np.array_equal(taylor.tangent(u, 0).std, [3.0, 4.0])

    def test_generators_are_nilpotent(self):
        e = taylor.lift(0.0, 1.0)
        assert np.all((e * e).c == 0.0)

    def test_tangent_of_plain_value_is_zero(self):
        t = taylor.tangent(np.ones(3), 2)
        assert t.depth == 2
        assert np.all(t.c == 0.0)

    def test_capacity(self):
        u = Jet.constant(1.0)
        for _ in range(taylor.MAX_DEPTH):
            u = taylor.lift(u, 1.0)
        with pytest.raises(JetCapacityError):
            taylor.lift(u, 1.0)

    def test_seed_capacity(self):
        with pytest.raises(JetCapacityError):
            taylor.seed([0.0, 0.0], [[1, 0], [0, 1]], order=4)


# =============================================================================
# Derivatives against closed forms
# =============================================================================


class TestDerivatives:
    def test_third_derivative_of_exp_sin(self):
        x0 = 0.7
        (x,) = taylor.seed([x0], [[1.0]], order=3)
        y = taylor.exp(taylor.sin(x))
        s, c, e = math.sin(x0), math.cos(x0), math.exp(math.sin(x0))
        assert y.coefficient(0b001) == pytest.approx(c * e, rel=1e-14)
        assert y.coefficient(0b011) == pytest.approx((c * c - s) * e, rel=1e-14)
        assert y.coefficient(0b111) == pytest.approx((c**3 - 3 * s * c - c) * e, rel=1e-14)

    def test_mixed_partial_of_polynomial(self):
        x, y = taylor.seed([0.3, -0.4], [[1, 0], [0, 1]])
        f = x * x * y + 3.0 * y * y
        # ∂x∂y (x²y + 3y²) = 2x
        assert f.coefficient(0b11) == pytest.approx(0.6)

    def test_division_and_powers(self):
        (x,) = taylor.seed([2.0], [[1.0]], order=2)
        f = 1.0 / x + x**3
        assert f.coefficient(0b01) == pytest.approx(-1 / 4 + 12)
        assert f.coefficient(0b11) == pytest.approx(2 / 8 + 12)

    @given(finite, finite, finite)
    def test_product_rule(self, a, b, x0):
        f = lambda x: taylor.sin(a * x) * taylor.exp(b * x)  # noqa: E731
        jet = f(taylor.lift(x0, 1.0))
        expected = a * math.cos(a * x0) * math.exp(b * x0) + b * math.sin(a * x0) * math.exp(b * x0)
        assert taylor.tangent(jet, 0).std == pytest.approx(expected, abs=1e-12)

    @given(finite, finite)
    def test_cos_matches_finite_difference(self, x0, a):
        jet = taylor.cos(a * taylor.lift(x0, 1.0) ** 2)
        num = fd(lambda x: math.cos(a * x * x), x0)
        assert float(taylor.tangent(jet, 0).std) == pytest.approx(num, abs=1e-6)


class TestNestedDerivative:
    def test_lie_derivatives_along_point_dependent_fields(self):
        # f = x0, V = (x1, 0), W = (0, x0):  L_V L_W f = 0 but L_W L_V f = L_W x1 = x0
        f = lambda u: u[..., 0]  # noqa: E731
        V = lambda u: taylor.stack([u[..., 1], 0.0 * u[..., 0]], axis=-1)  # noqa: E731
        W = lambda u: taylor.stack([0.0 * u[..., 0], u[..., 0]], axis=-1)  # noqa: E731
        pt = np.array([0.5, -1.5])
        assert taylor.nested_derivative(f, pt, [V, W]) == pytest.approx(0.0)
        assert taylor.nested_derivative(f, pt, [W, V]) == pytest.approx(0.5)

    def test_batched_points(self):
        pts = np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]])
        f = lambda u: u[..., 0] ** 3 + u[..., 1]  # noqa: E731
        e0 = lambda u: taylor.as_jet(np.array([1.0, 0.0]), taylor.depth_of(u)).broadcast_to(u.shape)  # noqa: E731
        out = taylor.nested_derivative(f, pts, [e0, e0])
        assert np.allclose(out, 6 * pts[:, 0])

    def test_capacity_is_checked_up_front(self):
        with pytest.raises(JetCapacityError):
            taylor.nested_derivative(lambda u: u, np.zeros(1), [lambda u: u] * (taylor.MAX_DEPTH + 1))


# =============================================================================
# Linear algebra over jets
# =============================================================================


class TestLinearAlgebra:
    @given(st.integers(0, 10_000))
    def test_solve_matches_numpy_and_derivative(self, seed):
        rng = np.random.default_rng(seed)
        a0 = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
        da = rng.normal(size=(3, 3))
        b = rng.normal(size=3)
        x = taylor.linear_solve(taylor.lift(a0, da), b)
        assert np.allclose(x.std, np.linalg.solve(a0, b))
        num = (np.linalg.solve(a0 + 1e-6 * da, b) - np.linalg.solve(a0 - 1e-6 * da, b)) / 2e-6
        assert np.allclose(taylor.tangent(x, 0).std, num, atol=1e-6)

    def test_inverse_second_order(self, rng):
        a0 = np.eye(2) + 0.2 * rng.normal(size=(2, 2))
        d = rng.normal(size=(2, 2))
        a = taylor.lift(taylor.lift(a0, d), d)
        inv = taylor.inverse(a)
        # d²/dt² (A + tD)^{-1} = 2 A^{-1} D A^{-1} D A^{-1}
        ai = np.linalg.inv(a0)
        assert np.allclose(inv.coefficient(0b11), 2 * ai @ d @ ai @ d @ ai)

    def test_singular_matrix(self):
        with pytest.raises(SingularJetError):
            taylor.inverse(taylor.lift(np.zeros((2, 2)), np.eye(2)))


# =============================================================================
# Array helpers
# =============================================================================


class TestArrayHelpers:
    def test_einsum_keeps_batch_shape(self):
        a = taylor.lift(np.ones((4, 3, 3)), np.ones((4, 3, 3)))
        b = np.ones((4, 3))
        out = taylor.einsum("...ij,...j->...i", a, taylor.as_jet(b))
        assert out.shape == (4, 3)

    def test_concatenate_and_stack(self):
        a = taylor.lift(np.zeros(2), np.ones(2))
        b = Jet.constant(np.ones(3))
        cat = taylor.concatenate([a, b], axis=-1)
        assert cat.shape == (5,)
        assert np.array_equal(taylor.tangent(cat, 0).std, [1, 1, 0, 0, 0])
        st_ = taylor.stack([a, a], axis=0)
        assert st_.shape == (2, 2)


# =============================================================================
# Worked examples
# =============================================================================


class TestExamples:
    def test_seeded_product(self):
        u, v = taylor.seed([1.0, 2.0], [[1.0, 0.0]], order=1)
        f = u * v
        assert f.std == 2.0
        assert f.coefficient(0b1) == 2.0

    def test_zero_direction(self):
        (u,) = taylor.seed([3.0], [[0.0]], order=2)
        assert np.all(u.c[1:] == 0.0) and u.std == 3.0

    def test_euler_field_squared(self):
        # (u d/du)^2 u = u
        V = lambda u: u  # noqa: E731
        assert taylor.nested_derivative(lambda u: u[..., 0], np.array([1.0]), [V, V]) == pytest.approx(1.0)

    def test_mixed_partial_order_independent(self):
        f = lambda u: u[..., 0] * u[..., 1]  # noqa: E731
        e1 = lambda u: taylor.as_jet(np.array([1.0, 0.0]), taylor.depth_of(u))  # noqa: E731
        e2 = lambda u: taylor.as_jet(np.array([0.0, 1.0]), taylor.depth_of(u))  # noqa: E731
        pt = np.array([0.4, 0.7])
        assert taylor.nested_derivative(f, pt, [e1, e2]) == taylor.nested_derivative(f, pt, [e2, e1]) == 1.0

    def test_diagonal_jet_solve_is_series_division(self):
        a, b = 2.0, 3.0
        A = taylor.lift(taylor.lift(np.diag([a, a]), np.diag([b, b])), np.diag([b, b]))
        x = taylor.linear_solve(A, np.ones(2))
        # 1/(a + e b) with e1 e2 terms: -b/a^2 per generator, 2 b^2/a^3 for the pair
        assert np.allclose(x.coefficient(0b01), -b / a**2)
        assert np.allclose(x.coefficient(0b11), 2 * b**2 / a**3)
