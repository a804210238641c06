import numpy as np
import pytest

from conftest import PENTAGON, UNIT_SQUARE, regular_polygon
from polyvem.materials import LinearElastic, MaxwellViscoelastic, MisesPlasticity
from polyvem.mesh import polygon_geometry
from polyvem.quadrature import polygon_rule
from polyvem.vem import (
    ElementError,
    alpha_scaling,
    body_load_vector,
    build_dof_layout,
    build_projection,
    element_internal_force,
    scaled_monomials,
    traction_load_vector,
)

POLYGONS = {"square": UNIT_SQUARE, "pentagon": PENTAGON, "hexagon": regular_polygon(6, 0.7, (0.3, -0.2))}
ELASTIC = LinearElastic(1000.0, 0.3)


def interpolate(ops, field):
    """Dof vector of the displacement ``field(points) -> (n, 2)``."""
    g, lay = ops.geom, ops.layout
    v = np.zeros(lay.n_dof)
    v[: 2 * lay.n_boundary_nodes] = field(lay.boundary_nodes).reshape(-1)
    if lay.n_moments:
        q = polygon_rule(g, 2 * lay.k + 2)
        M = scaled_monomials(q.points, g.centroid, g.diameter, lay.k - 2)
        mom = (M * q.weights[:, None]).T @ field(q.points) / g.area
        v[2 * lay.n_boundary_nodes:] = mom.reshape(-1)
    return v


def element(verts, k):
    g = polygon_geometry(np.asarray(verts, dtype=float))
    return build_projection(g, build_dof_layout(g, k))


def rigid(ops, a=0.3, b=-0.7, w=1.1):
    return interpolate(ops, lambda p: np.column_stack([a - w * p[:, 1], b + w * p[:, 0]]))


class TestDofLayout:
    @pytest.mark.parametrize("m,k,n", [(4, 1, 8), (3, 2, 14), (6, 1, 12), (5, 3, 36)])
    def test_n_dof(self, m, k, n):
        g = polygon_geometry(regular_polygon(m))
        assert build_dof_layout(g, k).n_dof == n

    def test_order_out_of_range(self):
        with pytest.raises(ElementError):
            build_dof_layout(polygon_geometry(UNIT_SQUARE), 4)

    def test_edge_nodes_ccw(self):
        lay = build_dof_layout(polygon_geometry(UNIT_SQUARE), 2)
        np.testing.assert_allclose(lay.boundary_nodes[lay.edge_nodes(0)], [[0, 0], [0.5, 0], [1, 0]])
        assert lay.edge_nodes(3)[-1] == 0


class TestProjection:
    def test_translation(self):
        ops = element(PENTAGON, 2)
        eps = ops.strain_at(ops.quad.points) @ interpolate(ops, lambda p: np.tile([1.0, 0.0], (len(p), 1)))
        np.testing.assert_allclose(eps, 0.0, atol=1e-13)

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("name", POLYGONS)
    def test_constant_strain(self, name, k):
        ops = element(POLYGONS[name], k)
        eps = ops.strain_at(ops.quad.points) @ interpolate(ops, lambda p: np.column_stack([p[:, 0], 0 * p[:, 0]]))
        np.testing.assert_allclose(eps, np.tile([1.0, 0.0, 0.0], (len(eps), 1)), atol=1e-12)

    def test_quadratic_on_square(self):
        ops = element(UNIT_SQUARE, 2)
        eps = ops.strain_at(ops.quad.points) @ interpolate(ops, lambda p: np.column_stack([p[:, 0] ** 2, 0 * p[:, 0]]))
        exact = np.column_stack([2 * ops.quad.points[:, 0], 0 * ops.quad.points[:, 0], 0 * ops.quad.points[:, 0]])
        np.testing.assert_allclose(eps, exact, atol=1e-12)

    @pytest.mark.parametrize("k", [2, 3])
    @pytest.mark.parametrize("name", POLYGONS)
    def test_polynomial_consistency(self, name, k):
        # displacement of degree k, strain of degree k - 1
        def u(p):
            x, y = p.T
            return np.column_stack([x ** k + 0.3 * x * y ** (k - 1), -0.5 * y ** k + x ** (k - 1) * y])

        def strain(p):
            x, y = p.T
            exx = k * x ** (k - 1) + 0.3 * y ** (k - 1)
            eyy = -0.5 * k * y ** (k - 1) + x ** (k - 1)
            gxy = 0.3 * (k - 1) * x * y ** (k - 2) + (k - 1) * x ** (k - 2) * y
            return np.column_stack([exx, eyy, gxy])

        ops = element(POLYGONS[name], k)
        pts = ops.quad.points
        np.testing.assert_allclose(ops.strain_at(pts) @ interpolate(ops, u), strain(pts), atol=1e-11)


class TestStabilization:
    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("name", POLYGONS)
    def test_kernel_and_psd(self, name, k):
        ops = element(POLYGONS[name], k)
        S = ops.S
        np.testing.assert_allclose(S, S.T, atol=1e-13)
        assert np.linalg.eigvalsh(S).min() > -1e-12
        np.testing.assert_allclose(S @ rigid(ops), 0.0, atol=1e-12)
        poly = interpolate(ops, lambda p: np.column_stack([p[:, 0] ** k - p[:, 1], p[:, 0] * p[:, 1] ** (k - 1)]))
        np.testing.assert_allclose(S @ poly, 0.0, atol=1e-11)

    def test_psd_random(self):
        ops = element(UNIT_SQUARE, 1)
        v = np.random.default_rng(3).normal(size=(50, ops.n_dof))
        assert np.all(np.einsum("ni,ij,nj->n", v, ops.S, v) >= -1e-14)

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("name", POLYGONS)
    def test_stiffness_has_three_zero_modes(self, name, k):
        ops = element(POLYGONS[name], k)
        D = ELASTIC.elastic_tangent()
        K = np.einsum("q,qim,ij,qjn->mn", ops.quad.weights, ops.B, D, ops.B)
        K += alpha_scaling(D, ops.geom.m) * ops.S
        ev = np.linalg.eigvalsh(K)
        assert np.sum(np.abs(ev) < 1e-9 * ev.max()) == 3


class TestAlphaScaling:
    def test_plane_strain_example(self):
        D = ELASTIC.elastic_tangent()
        assert np.trace(D) == pytest.approx(3076.92, abs=0.01)
        assert alpha_scaling(D, 4) == pytest.approx(769.23, abs=0.01)

    def test_linear_in_edge_count(self):
        D = ELASTIC.elastic_tangent()
        assert alpha_scaling(D, 8) == pytest.approx(0.5 * alpha_scaling(D, 4))

    def test_zero(self):
        assert alpha_scaling(np.zeros((3, 3)), 5) == 0.0

    def test_non_finite(self):
        with pytest.raises(ElementError):
            alpha_scaling(np.full((3, 3), np.nan), 4)


class TestInternalForce:
    def test_rigid_motion_is_force_free(self):
        ops = element(PENTAGON, 2)
        st = ELASTIC.initial_state(len(ops.quad))
        f, K, _ = element_internal_force(ops, ELASTIC, st, np.zeros(ops.n_dof), rigid(ops))
        np.testing.assert_allclose(f, 0.0, atol=1e-12 * ELASTIC.E)

    def test_uniform_strain_square(self):
        ops = element(UNIT_SQUARE, 1)
        eps0 = np.array([1e-3, -2e-3, 5e-4])
        u = interpolate(ops, lambda p: np.column_stack([eps0[0] * p[:, 0] + eps0[2] * p[:, 1],
                                                        eps0[1] * p[:, 1]]))
        st = ELASTIC.initial_state(len(ops.quad))
        f, K, _ = element_internal_force(ops, ELASTIC, st, np.zeros(8), u)
        # hand oracle: the constant-strain B of the bilinear square, area 1
        Bh = np.zeros((3, 8))
        dN = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
        for a in range(4):
            Bh[0, 2 * a] = dN[a, 0]
            Bh[1, 2 * a + 1] = dN[a, 1]
            Bh[2, 2 * a] = dN[a, 1]
            Bh[2, 2 * a + 1] = dN[a, 0]
        np.testing.assert_allclose(Bh @ u, eps0, atol=1e-15)
        np.testing.assert_allclose(f, Bh.T @ ELASTIC.elastic_tangent() @ eps0, atol=1e-12)

    def test_plastic_tangent_fd(self):
        mat = MisesPlasticity(7000.0, 0.3, 24.3, H_kin=50.0, H_iso=30.0)
        ops = element(PENTAGON, 2)
        st = mat.initial_state(len(ops.quad))
        rng = np.random.default_rng(1)
        u = 0.02 * interpolate(ops, lambda p: np.column_stack([p[:, 0] + 0.4 * p[:, 1] ** 2, -0.5 * p[:, 1]]))
        u += 1e-4 * rng.normal(size=ops.n_dof)
        eps = ops.B @ u
        assert np.all(mat.update(st, 0 * eps, eps).state["epbar"] > 0)
        f, K, _ = element_internal_force(ops, mat, st, np.zeros(ops.n_dof), u)
        h = 1e-6 * np.abs(u).max()
        Kfd = np.empty_like(K)
        for j in range(ops.n_dof):
            d = np.zeros(ops.n_dof)
            d[j] = h
            fp = element_internal_force(ops, mat, st, np.zeros(ops.n_dof), u + d)[0]
            fm = element_internal_force(ops, mat, st, np.zeros(ops.n_dof), u - d)[0]
            Kfd[:, j] = (fp - fm) / (2 * h)
        assert np.abs(Kfd - K).max() / np.abs(K).max() < 1e-5

    def test_viscoelastic_tangent_symmetric(self):
        mat = MaxwellViscoelastic(1000.0, 0.3, 0.3, (0.7,), (1.0,))
        ops = element(regular_polygon(7), 3)
        st = mat.initial_state(len(ops.quad))
        _, K, _ = element_internal_force(ops, mat, st, np.zeros(ops.n_dof), rigid(ops), dt=0.5)
        assert np.linalg.norm(K - K.T) / np.linalg.norm(K) < 1e-12


class TestLoads:
    def test_zero_body_force(self):
        ops = element(PENTAGON, 2)
        np.testing.assert_array_equal(body_load_vector(ops, lambda p, t: np.zeros((len(p), 2))), 0.0)

    def test_square_body_force(self):
        ops = element(UNIT_SQUARE, 1)
        f = body_load_vector(ops, lambda p, t: np.array([1.0, 0.0]))
        np.testing.assert_allclose(f[0::2], 0.25, rtol=1e-13)
        np.testing.assert_allclose(f[1::2], 0.0, atol=1e-15)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_body_force_total(self, k):
        ops = element(PENTAGON, k)
        f = body_load_vector(ops, lambda p, t: np.array([2.0, -3.0]))
        nb = ops.layout.n_boundary_nodes
        # nodal loads of the boundary plus moment loads sum to b |E|
        tot = f[0:2 * nb].reshape(-1, 2).sum(0)
        if ops.layout.n_moments:
            tot = tot + f[2 * nb:2 * nb + 2]
        np.testing.assert_allclose(tot, np.array([2.0, -3.0]) * ops.geom.area, rtol=1e-12)

    def test_zero_traction(self):
        np.testing.assert_array_equal(traction_load_vector([0, 0], [1, 0], lambda p, t: np.zeros((len(p), 2)), 2), 0.0)

    def test_linear_edge(self):
        f = traction_load_vector([0, 0], [3, 4], lambda p, t: np.array([2.0, 1.0]), 1)
        np.testing.assert_allclose(f, [5.0, 2.5, 5.0, 2.5])

    def test_simpson_weights(self):
        f = traction_load_vector([0, 0], [2, 0], lambda p, t: np.array([0.0, 1.0]), 2)
        np.testing.assert_allclose(f[1::2], [1 / 3, 4 / 3, 1 / 3], rtol=1e-14)
