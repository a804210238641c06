"""Element-level virtual element machinery for 2D solids of order k.

Local degrees of freedom, in order:

* boundary nodes, CCW from vertex 0: each edge contributes its start vertex
  followed by its ``k - 1`` interior Gauss-Lobatto nodes; two dofs (x, y) per node;
* interior moments ``(1/|E|) int_E v_c m_a`` against scaled monomials of
  degree <= k - 2, ordered monomial-major with (x, y) interleaved.

With this order the vector dofs are the scalar dofs tensored with the two
components: vector dof ``2 s + c`` is scalar dof ``s`` of component ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from polyvem.mesh import ElementGeometry
from polyvem.quadrature import (
    QuadratureRule,
    gauss_legendre_01,
    gauss_lobatto_01,
    polygon_rule,
)

MAX_ORDER = 3


class ElementError(ValueError):
    pass


@lru_cache(maxsize=None)
def monomial_exponents(degree: int) -> tuple[tuple[int, int], ...]:
    """Exponents (a, b) of x^a y^b, by total degree; empty for degree < 0."""
    return tuple((d - b, b) for d in range(degree + 1) for b in range(d + 1))


def n_monomials(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2 if degree >= 0 else 0


def scaled_monomials(points, center, h, degree: int) -> np.ndarray:
    """Values of ((x - xc)/h)^a ((y - yc)/h)^b, shape (n_points, n_monomials)."""
    xi = (np.atleast_2d(points) - center) / h
    exps = monomial_exponents(degree)
    if not exps:
        return np.zeros((len(xi), 0))
    return np.column_stack([xi[:, 0] ** a * xi[:, 1] ** b for a, b in exps])


def _derivative_map(degree: int, axis: int):
    """d/dx_axis of each monomial of ``degree`` as (index of result, factor); h = 1."""
    idx = {e: i for i, e in enumerate(monomial_exponents(degree - 1))}
    out = []
    for a, b in monomial_exponents(degree):
        p = (a, b)[axis]
        if p == 0:
            out.append((None, 0.0))
        else:
            out.append((idx[(a - 1, b) if axis == 0 else (a, b - 1)], float(p)))
    return out


def _lagrange_matrix(nodes: np.ndarray, s: np.ndarray) -> np.ndarray:
    """L_j(s_q) for the Lagrange basis on ``nodes``; shape (len(s), len(nodes))."""
    L = np.ones((len(s), len(nodes)))
    for j, tj in enumerate(nodes):
        for i, ti in enumerate(nodes):
            if i != j:
                L[:, j] *= (s - ti) / (tj - ti)
    return L


@dataclass(frozen=True)
class DofLayout:
    k: int
    m: int
    edge_params: np.ndarray       # (k + 1,) Gauss-Lobatto abscissae in [0, 1]
    boundary_nodes: np.ndarray    # (m k, 2) node coordinates

    @property
    def n_boundary_nodes(self) -> int:
        return self.m * self.k

    @property
    def n_moments(self) -> int:
        """Interior moments per component."""
        return self.k * (self.k - 1) // 2

    @property
    def n_scalar(self) -> int:
        return self.n_boundary_nodes + self.n_moments

    @property
    def n_dof(self) -> int:
        return 2 * self.m * self.k + self.k * (self.k - 1)

    def edge_nodes(self, edge: int) -> list[int]:
        """Boundary node indices along ``edge``, start vertex to end vertex."""
        k, m = self.k, self.m
        return [edge * k + j for j in range(k)] + [((edge + 1) % m) * k]


def build_dof_layout(geom: ElementGeometry, k: int) -> DofLayout:
    if not 1 <= k <= MAX_ORDER:
        raise ElementError(f"order k={k} outside supported range 1..{MAX_ORDER}")
    t = gauss_lobatto_01(k + 1)
    nodes = []
    for e in geom.edges:
        for tj in t[:-1]:
            nodes.append(e.start + tj * (e.end - e.start))
    return DofLayout(k, geom.m, t, np.array(nodes))


def strain_basis_size(k: int) -> int:
    return 3 * n_monomials(k - 1)


@dataclass(frozen=True)
class ElementOperators:
    geom: ElementGeometry
    layout: DofLayout
    quad: QuadratureRule
    Pi: np.ndarray          # (3 n1, n_dof) strain coefficients [xx; yy; engineering xy]
    B: np.ndarray           # (n_q, 3, n_dof) Voigt strain at quadrature points
    B_centroid: np.ndarray  # (3, n_dof)
    S: np.ndarray           # (n_dof, n_dof) unscaled stabilization
    Pi_nabla: np.ndarray    # (n_k, n_scalar) scalar polynomial reconstruction of degree k
    P: np.ndarray           # (n_dof, n_dof) dof interpolant of the reconstruction

    @property
    def n_dof(self) -> int:
        return self.layout.n_dof

    def strain_at(self, points) -> np.ndarray:
        """(n, 3, n_dof) map from dofs to the projected Voigt strain at ``points``."""
        g = self.geom
        M = scaled_monomials(points, g.centroid, g.diameter, self.layout.k - 1)
        n1 = M.shape[1]
        return np.stack([M @ self.Pi[i * n1:(i + 1) * n1] for i in range(3)], axis=1)

    def reconstruct_at(self, points) -> np.ndarray:
        """(n, 2, n_dof) values of the degree-k displacement reconstruction."""
        g = self.geom
        M = scaled_monomials(points, g.centroid, g.diameter, self.layout.k) @ self.Pi_nabla
        out = np.zeros((len(M), 2, self.n_dof))
        out[:, 0, 0::2] = M
        out[:, 1, 1::2] = M
        return out


def _boundary_integrals(geom: ElementGeometry, layout: DofLayout, degree: int, grad: bool):
    """Integrals over the boundary of (monomial or its gradient) x normal x edge basis.

    Returns (Ex, Ey), each (n_monomials, n_boundary_nodes):
    ``int_dE f_a n_x phi_l`` with ``f_a`` the monomials of ``degree`` when
    ``grad`` is False, else ``Ex`` holds ``int_dE (grad m_a . n) phi_l`` and
    ``Ey`` is None.
    """
    k = layout.k
    h, c = geom.diameter, geom.centroid
    s, w = gauss_legendre_01(2 * k)
    L = _lagrange_matrix(layout.edge_params, s)
    nm = n_monomials(degree)
    Ex = np.zeros((nm, layout.n_boundary_nodes))
    Ey = np.zeros((nm, layout.n_boundary_nodes)) if not grad else None
    if grad:
        dx = _derivative_map(degree, 0)
        dy = _derivative_map(degree, 1)
    for i, e in enumerate(geom.edges):
        pts = e.start + np.outer(s, e.end - e.start)
        wl = w * e.length
        ids = layout.edge_nodes(i)
        if grad:
            Mlow = scaled_monomials(pts, c, h, degree - 1)
            F = np.zeros((len(s), nm))
            for a in range(nm):
                for (j, f), nrm in ((dx[a], e.normal[0]), (dy[a], e.normal[1])):
                    if j is not None:
                        F[:, a] += f / h * nrm * Mlow[:, j]
            Ex[:, ids] += (F * wl[:, None]).T @ L
        else:
            M = scaled_monomials(pts, c, h, degree)
            Ex[:, ids] += e.normal[0] * (M * wl[:, None]).T @ L
            Ey[:, ids] += e.normal[1] * (M * wl[:, None]).T @ L
    return Ex, Ey


def build_projection(geom: ElementGeometry, layout: DofLayout, quad: QuadratureRule | None = None,
                     cell=None) -> ElementOperators:
    """Strain projection onto P_{k-1} symmetric tensors, plus the stabilization.

    The right-hand side ``int_E eps(v) : T`` is evaluated by parts: a boundary
    integral of the edge traces and the interior moments against ``div T``.
    """
    k = layout.k
    h, c, area = geom.diameter, geom.centroid, geom.area
    if quad is None:
        quad = polygon_rule(geom, 2 * (k - 1), cell=cell)
    nb, nmom, nd = layout.n_boundary_nodes, layout.n_moments, layout.n_dof
    n1 = n_monomials(k - 1)
    where = f"cell {cell}" if cell is not None else "element"

    Mq = scaled_monomials(quad.points, c, h, k - 1)
    G = (Mq * quad.weights[:, None]).T @ Mq
    Ex, Ey = _boundary_integrals(geom, layout, k - 1, grad=False)

    # int_E v_c d_axis(m_b) through the moment dofs
    Ix = np.zeros((n1, nmom))
    Iy = np.zeros((n1, nmom))
    for Imat, axis in ((Ix, 0), (Iy, 1)):
        for b, (j, f) in enumerate(_derivative_map(k - 1, axis)):
            if j is not None:
                Imat[b, j] = f / h * area

    X = slice(0, nd, 2)
    Y = slice(1, nd, 2)
    rhs = np.zeros((3, n1, nd))
    bx = np.zeros((n1, nb + nmom))
    rhs_xx = np.zeros((n1, nd))
    rhs_yy = np.zeros((n1, nd))
    rhs_xy = np.zeros((n1, nd))
    bx[:, :nb], bx[:, nb:] = Ex, -Ix
    rhs_xx[:, X] = bx
    by = np.zeros((n1, nb + nmom))
    by[:, :nb], by[:, nb:] = Ey, -Iy
    rhs_yy[:, Y] = by
    # tensor shear 1/2 (d_y v_x + d_x v_y)
    rhs_xy[:, X] = 0.5 * by
    rhs_xy[:, Y] = 0.5 * bx
    rhs[0], rhs[1], rhs[2] = rhs_xx, rhs_yy, 2.0 * rhs_xy

    try:
        cond = np.linalg.cond(G)
        if not np.isfinite(cond) or cond > 1e13:
            raise np.linalg.LinAlgError
        Pi = np.concatenate([np.linalg.solve(G, rhs[i]) for i in range(3)])
    except np.linalg.LinAlgError:
        raise ElementError(f"singular strain Gram matrix on {where}") from None

    Pi_nabla, P_s = _reconstruction(geom, layout, quad)
    P = np.kron(P_s, np.eye(2))
    IP = np.eye(nd) - P
    S = IP.T @ IP

    ops = ElementOperators(geom, layout, quad, Pi, np.empty((0, 3, nd)), np.empty((3, nd)),
                           S, Pi_nabla, P)
    object.__setattr__(ops, "B", ops.strain_at(quad.points))
    object.__setattr__(ops, "B_centroid", ops.strain_at(c[None])[0])
    return ops


def _reconstruction(geom: ElementGeometry, layout: DofLayout, quad: QuadratureRule):
    """Scalar energy projection onto P_k and its dof interpolant.

    ``int grad(P v) . grad(p) = int grad(v) . grad(p)`` for p in P_k, closed by
    matching the vertex mean (k = 1) or the mean moment (k >= 2).
    """
    k = layout.k
    h, c, area = geom.diameter, geom.centroid, geom.area
    nb, nmom, ns = layout.n_boundary_nodes, layout.n_moments, layout.n_scalar
    nk = n_monomials(k)

    Mq = scaled_monomials(quad.points, c, h, k)
    # gradients of the degree-k monomials at the quadrature points
    Ml = scaled_monomials(quad.points, c, h, k - 1)
    Gx = np.zeros((len(quad), nk))
    Gy = np.zeros((len(quad), nk))
    for a, ((jx, fx), (jy, fy)) in enumerate(zip(_derivative_map(k, 0), _derivative_map(k, 1))):
        if jx is not None:
            Gx[:, a] = fx / h * Ml[:, jx]
        if jy is not None:
            Gy[:, a] = fy / h * Ml[:, jy]
    w = quad.weights[:, None]
    Gn = (Gx * w).T @ Gx + (Gy * w).T @ Gy

    Bn = np.zeros((nk, ns))
    Bn[:, :nb], _ = _boundary_integrals(geom, layout, k, grad=True)
    # - int v lap(m_a) through the moments
    moments = {e: i for i, e in enumerate(monomial_exponents(k - 2))}
    for a, (p, q) in enumerate(monomial_exponents(k)):
        if p >= 2:
            Bn[a, nb + moments[(p - 2, q)]] -= p * (p - 1) / h ** 2 * area
        if q >= 2:
            Bn[a, nb + moments[(p, q - 2)]] -= q * (q - 1) / h ** 2 * area

    # dof values of each monomial
    D = np.zeros((ns, nk))
    D[:nb] = scaled_monomials(layout.boundary_nodes, c, h, k)
    if nmom:
        Mmom = scaled_monomials(quad.points, c, h, k - 2)
        D[nb:] = (Mmom * w).T @ Mq / area

    if k == 1:
        Gn[0] = D[:nb].mean(axis=0)
        Bn[0] = 0.0
        Bn[0, :nb] = 1.0 / nb
    else:
        Gn[0] = D[nb]
        Bn[0] = 0.0
        Bn[0, nb] = 1.0
    Pi_nabla = np.linalg.solve(Gn, Bn)
    return Pi_nabla, D @ Pi_nabla


def alpha_scaling(K_T: np.ndarray, m: int) -> float:
    """Stabilization scale: trace of the 3x3 tangent divided by the edge count."""
    K_T = np.asarray(K_T, dtype=float)
    if not np.all(np.isfinite(K_T)):
        raise ElementError("non-finite tangent entries in stabilization scaling")
    return float(np.trace(K_T)) / m


def internal_force_kernel(B, w, sigma, C, S, alpha, ue):
    """Batched element force and tangent.

    Shapes: B (ne, nq, 3, nd), w (ne, nq), sigma (ne, nq, 3), C (ne, nq, 3, 3),
    S (ne, nd, nd), alpha (ne,), ue (ne, nd).
    """
    Bw = B * w[:, :, None, None]
    f = np.einsum("eqin,eqi->en", Bw, sigma)
    CB = np.einsum("eqij,eqjn->eqin", C, B)
    K = np.einsum("eqim,eqin->emn", Bw, CB)
    aS = alpha[:, None, None] * S
    f += np.einsum("emn,en->em", aS, ue)
    K += aS
    return f, K


def element_internal_force(ops: ElementOperators, material, state_n, u_n, u_trial,
                           dt: float = 1.0, temperature=0.0, alpha: float | None = None):
    """Force, tangent and trial states of a single element.

    ``state_n`` is the committed bank for the element's quadrature points.
    ``alpha`` defaults to the elastic-tangent scaling.
    """
    if alpha is None:
        alpha = alpha_scaling(material.elastic_tangent(), ops.geom.m)
    eps_n = ops.B @ np.asarray(u_n, dtype=float)
    eps = ops.B @ np.asarray(u_trial, dtype=float)
    res = material.update(state_n, eps_n, eps, dt, temperature)
    f, K = internal_force_kernel(
        ops.B[None], ops.quad.weights[None], res.sigma[None], res.tangent[None],
        ops.S[None], np.array([alpha]), np.asarray(u_trial, dtype=float)[None])
    return f[0], K[0], res.state


def body_load_vector(ops: ElementOperators, b, t: float = 0.0) -> np.ndarray:
    """Consistent load of a body force ``b(points, t) -> (n, 2)``.

    The virtual basis is replaced by its degree-k reconstruction.
    """
    quad = polygon_rule(ops.geom, 2 * ops.layout.k)
    vals = np.broadcast_to(np.asarray(b(quad.points, t), dtype=float), (len(quad), 2))
    R = ops.reconstruct_at(quad.points)
    return np.einsum("q,qc,qcn->n", quad.weights, vals, R)


def traction_load_vector(a, b, q, k: int, t: float = 0.0) -> np.ndarray:
    """Load of a traction ``q(points, t) -> (n, 2)`` on the straight edge a-b.

    Returns ``2 (k + 1)`` entries: the edge's Gauss-Lobatto nodes from ``a``
    to ``b``, (x, y) interleaved.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    s, w = gauss_legendre_01(2 * k)
    pts = a + np.outer(s, b - a)
    vals = np.broadcast_to(np.asarray(q(pts, t), dtype=float), (len(s), 2))
    L = _lagrange_matrix(gauss_lobatto_01(k + 1), s)
    nodal = (L * (w * length)[:, None]).T @ vals
    return nodal.reshape(-1)
