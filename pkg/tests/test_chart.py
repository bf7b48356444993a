"""Charts, connections, curvature, validation and adapted diffeomorphisms."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from foliquant import chart, exprlang
from foliquant.chart import (
    AdaptedConnection,
    AdaptedDiffeo,
    AdaptednessError,
    CodimensionError,
    FoliatedChart,
    OneForm,
)
from foliquant.verify import naturality_diffeo, random_adapted_connection

seeds = st.integers(0, 10_000)
shapes = st.sampled_from([(0, 2), (1, 2), (2, 2), (1, 3)])


def fd_curvature(conn, m, h=1e-5):
    """Finite-difference oracle for ``∂_k Γ^i_{lj} - ∂_l Γ^i_{kj} + Γ^i_{ka}Γ^a_{lj} - Γ^i_{la}Γ^a_{kj}``."""
    n = conn.n
    g = conn.christoffel(m).std
    dg = np.empty((n,) * 4)  # dg[a, i, k, l] = ∂_a Γ^i_{kl}
    for a in range(n):
        e = np.eye(n)[a] * h
        dg[a] = (conn.christoffel(m + e).std - conn.christoffel(m - e).std) / (2 * h)
    R = np.empty((n,) * 4)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    R[i, j, k, l] = (
                        dg[k, i, l, j] - dg[l, i, k, j]
                        + g[i, k, :] @ g[:, l, j] - g[i, l, :] @ g[:, k, j]
                    )
    return R


def big_chart(p, q):
    return FoliatedChart(p, q, (-4.0,) * (p + q), (4.0,) * (p + q))


# =============================================================================
# Charts
# =============================================================================


class TestChart:
    @pytest.mark.parametrize("p", [0, 1, 3])
    def test_codimension_one_is_rejected(self, p):
        with pytest.raises(CodimensionError, match="different from 1"):
            FoliatedChart(p, 1)

    def test_sample_points_are_deterministic_and_inside(self):
        c = FoliatedChart(1, 2, seed=7)
        pts = c.sample_points(10)
        assert np.array_equal(pts, c.sample_points(10))
        assert all(c.contains(x) for x in pts)

    def test_empty_box(self):
        with pytest.raises(ValueError):
            FoliatedChart(0, 2, (0.0, 1.0), (1.0, 1.0))

    def test_transverse_chart(self):
        c = FoliatedChart(2, 3, (-1, -2, -3, -4, -5), (1, 2, 3, 4, 5))
        t = c.transverse()
        assert (t.p, t.q, t.lower) == (0, 3, (-3.0, -4.0, -5.0))
        assert c.leaf_reference() == {0: 0.0, 1: 0.0}


# =============================================================================
# Curvature
# =============================================================================


class TestCurvature:
    def test_flat_connection(self):
        conn = chart.flat_connection(FoliatedChart(1, 2))
        assert np.all(chart.curvature(conn, np.zeros(3)) == 0.0)

    @given(shapes, seeds)
    def test_matches_finite_difference_oracle(self, shape, seed):
        rng = np.random.default_rng(seed)
        conn = random_adapted_connection(*shape, rng)
        m = conn.chart.sample_points(1, seed=seed)[0]
        assert np.allclose(chart.curvature(conn, m), fd_curvature(conn, m), atol=1e-7)

    def test_antisymmetric_in_last_pair(self, rng):
        conn = random_adapted_connection(1, 2, rng)
        R = chart.curvature(conn, conn.chart.sample_points(4))
        assert np.allclose(R, -R.swapaxes(-1, -2))

    def test_outside_domain(self):
        with pytest.raises(ValueError):
            chart.curvature(chart.flat_connection(FoliatedChart(0, 2)), np.array([3.0, 0.0]))

    @given(st.sampled_from([(0, 2), (1, 2)]), seeds)
    def test_tensorial_under_pushforward(self, shape, seed):
        p, q = shape
        rng = np.random.default_rng(seed)
        conn = random_adapted_connection(p, q, rng)
        phi = naturality_diffeo(p, q)
        pushed = chart.pushforward(conn, phi, big_chart(p, q))
        m = conn.chart.sample_points(1, seed=seed)[0]
        J = chart.jacobian(phi, m).std
        Ji = np.linalg.inv(J)
        expected = np.einsum("ai,ijkl,jb,kc,ld->abcd", J, chart.curvature(conn, m), Ji, Ji, Ji)
        assert np.allclose(chart.curvature(pushed, phi(m).std), expected, atol=1e-9)


# =============================================================================
# Jacobians
# =============================================================================


class TestJacobian:
    def test_jacobian_and_hessian_against_finite_differences(self, rng):
        phi = naturality_diffeo(1, 2)
        m = np.array([0.2, -0.3, 0.5])
        h = 1e-5
        J = chart.jacobian(phi, m).std
        H = chart.hessian(phi, m).std
        for b in range(3):
            e = np.eye(3)[b] * h
            assert np.allclose(J[:, b], (phi(m + e).std - phi(m - e).std) / (2 * h), atol=1e-8)
            dJ = (chart.jacobian(phi, m + e).std - chart.jacobian(phi, m - e).std) / (2 * h)
            assert np.allclose(H[:, :, b], dJ, atol=1e-8)

    def test_batched_matrix_valued_function(self):
        fn = lambda z: z[..., :, None] * z[..., None, :]  # noqa: E731
        pts = np.array([[1.0, 2.0], [3.0, 4.0]])
        J = chart.jacobian(fn, pts).std
        assert J.shape == (2, 2, 2, 2)
        # ∂(z_a z_b)/∂z_c = δ_ac z_b + z_a δ_bc
        expected = np.einsum("ac,nb->nabc", np.eye(2), pts) + np.einsum("na,bc->nabc", pts, np.eye(2))
        assert np.allclose(J, expected)


# =============================================================================
# Validation and induced connections
# =============================================================================


class TestValidation:
    def test_random_adapted_connection_is_valid(self, rng):
        assert chart.validate_adapted(random_adapted_connection(2, 2, rng)).valid

    @pytest.mark.parametrize(
        "entry, violation",
        [
            ((2, 0, 1), "Γ^𝔨_{iλ}=0"),
            ((1, 1, 2), "∂_x Γ^𝔨_{𝔦𝔩}=0"),
        ],
    )
    def test_violations(self, entry, violation):
        c = FoliatedChart(1, 2)
        text = "x1*y1" if violation.startswith("∂") else "1 + y1"
        conn = AdaptedConnection(c, gamma={entry: text})
        report = chart.validate_adapted(conn)
        assert report.violations == [violation]
        with pytest.raises(AdaptednessError):
            chart.require_adapted(conn)

    def test_asymmetric_array_connection(self):
        c = FoliatedChart(0, 2)

        def gamma(m):
            g = np.zeros(np.shape(m)[:-1] + (2, 2, 2))
            g[..., 0, 0, 1] = 1.0
            return g

        report = chart.validate_adapted(AdaptedConnection(c, array_fn=gamma))
        assert report.violations == ["Γ^i_{kl}=Γ^i_{lk}"]

    def test_induced_connection_is_transverse_block(self, rng):
        conn = random_adapted_connection(2, 2, rng)
        fconn = chart.induce_foliated(conn)
        assert (fconn.p, fconn.q) == (0, 2)
        pts = conn.chart.sample_points(5)
        full = conn.christoffel(pts).std[:, 2:, 2:, 2:]
        assert np.allclose(fconn.christoffel(pts[:, 2:]).std, full)

    def test_induced_connection_from_array(self, rng):
        conn = random_adapted_connection(1, 2, rng)
        wrapped = AdaptedConnection(conn.chart, array_fn=conn.christoffel)
        pts = conn.chart.sample_points(3)[:, 1:]
        a = chart.induce_foliated(wrapped).christoffel(pts)
        b = chart.induce_foliated(conn).christoffel(pts)
        assert np.allclose(a.std, b.std)


# =============================================================================
# Projective shifts
# =============================================================================


class TestProjectiveShift:
    def test_shift_adds_deltas(self):
        c = FoliatedChart(0, 2)
        alpha = OneForm(c, ["y2", "2"])
        shifted = chart.projective_shift(chart.flat_connection(c), alpha)
        g = shifted.christoffel(np.array([0.0, 0.5])).std
        a = np.array([0.5, 2.0])
        expected = np.einsum("ki,l->kil", np.eye(2), a) + np.einsum("kl,i->kil", np.eye(2), a)
        assert np.allclose(g, expected)

    def test_shift_then_unshift(self, rng):
        conn = random_adapted_connection(1, 2, rng)
        alpha = OneForm(conn.chart, ["0", "y1*y2", "1 - y1"])
        back = chart.projective_shift(chart.projective_shift(conn, alpha), alpha.negated())
        pts = conn.chart.sample_points(4)
        assert np.allclose(back.christoffel(pts).std, conn.christoffel(pts).std)

    def test_shift_preserves_adaptedness(self, rng):
        conn = random_adapted_connection(1, 2, rng)
        alpha = OneForm(conn.chart, ["0", "y2", "y1^2"])
        assert chart.validate_adapted(chart.projective_shift(conn, alpha)).valid

    def test_non_foliated_form_is_rejected(self, rng):
        conn = random_adapted_connection(1, 2, rng)
        with pytest.raises(AdaptednessError):
            chart.projective_shift(conn, OneForm(conn.chart, ["0", "x1", "0"]))


# =============================================================================
# Adapted diffeomorphisms
# =============================================================================


class TestDiffeo:
    @pytest.mark.parametrize("p, q", [(0, 2), (1, 2), (2, 3)])
    def test_round_trip(self, p, q):
        phi = naturality_diffeo(p, q)
        pts = FoliatedChart(p, q).sample_points(10)
        assert phi.roundtrip_error(pts) < 1e-12

    def test_transverse_part_must_ignore_leaves(self):
        with pytest.raises(AdaptednessError):
            AdaptedDiffeo(1, 2, ["x1", "y1 + x1", "y2"], ["x1", "y1 - x1", "y2"])

    def test_function_pushforward_composes_with_inverse(self):
        phi = naturality_diffeo(1, 2)
        f = exprlang.parse("x1 + y1*y2", 1, 2)
        pushed = chart.pushforward(f, phi)
        m = np.array([0.1, 0.2, 0.3])
        assert pushed(list(phi(m).std)) == pytest.approx(f(m))

    def test_one_form_pushforward_is_pullback_by_inverse(self):
        phi = naturality_diffeo(1, 2)
        c = FoliatedChart(1, 2)
        alpha = OneForm(c, ["0", "y2", "1"])
        pushed = chart.pushforward(alpha, phi, big_chart(1, 2))
        m = np.array([0.1, 0.2, 0.3])
        J = chart.jacobian(phi, m).std
        # α'(φ(m)) J(m) = α(m)
        assert np.allclose(pushed(phi(m).std).std @ J, alpha(m).std)


# =============================================================================
# Worked examples
# =============================================================================


class TestExamples:
    def test_induced_connection_reindexes_transverse_block(self):
        conn = AdaptedConnection(FoliatedChart(1, 2), gamma={(2, 1, 1): "y2"})
        fconn = chart.induce_foliated(conn)
        assert fconn.gamma[(1, 0, 0)].text() == "y2"
        assert set(fconn.gamma) == {(1, 0, 0)}

    def test_shift_of_flat_plane(self):
        c = FoliatedChart(0, 2)
        g = chart.projective_shift(chart.flat_connection(c), OneForm(c, ["1", "0"])).christoffel(np.zeros(2)).std
        assert (g[0, 0, 0], g[1, 0, 1], g[1, 1, 0], g[0, 1, 1], g[0, 0, 1]) == (2.0, 1.0, 1.0, 0.0, 0.0)

    def test_curvature_of_single_symbol(self):
        conn = AdaptedConnection(FoliatedChart(0, 2), gamma={(0, 1, 1): "y1"})
        m = np.array([0.3, -0.2])
        assert np.allclose(chart.curvature(conn, m), fd_curvature(conn, m), atol=1e-6)

    def test_flat_connection_under_quadratic_change(self):
        # y1' = y1 + y2^2 / 2: the only symbol is Γ'^1_22 = ∂²y1/∂y2'² = -1
        phi = AdaptedDiffeo(0, 2, ["y1 + 0.5*y2^2", "y2"], ["y1 - 0.5*y2^2", "y2"])
        pushed = chart.pushforward(chart.flat_connection(FoliatedChart(0, 2)), phi, big_chart(0, 2))
        expected = np.zeros((2, 2, 2))
        expected[0, 1, 1] = -1.0
        assert np.allclose(pushed.christoffel(np.array([0.4, 0.1])).std, expected)

    def test_linear_change_keeps_flatness(self):
        phi = AdaptedDiffeo(1, 2, ["x1 + 2*y1", "y1 - y2", "3*y2"], ["x1 - 2*(y1 + y2/3)", "y1 + y2/3", "y2/3"])
        pushed = chart.pushforward(chart.flat_connection(FoliatedChart(1, 2)), phi, big_chart(1, 2))
        assert np.allclose(pushed.christoffel(np.array([0.1, 0.2, 0.3])).std, 0.0)
