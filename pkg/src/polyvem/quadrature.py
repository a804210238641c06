"""Quadrature on triangles, star-shaped polygons and straight edges."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from polyvem.mesh import ElementGeometry, signed_area


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, 2) or (n,) for 1D rules
    weights: np.ndarray  # (n,), sum to the measure of the domain
    degree: int

    def __len__(self):
        return len(self.weights)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points)))


def _ab(b):
    return (1.0 - 2.0 * b, b, b)


# Symmetric rules on the reference triangle (0,0),(1,0),(0,1), stored as
# orbits (barycentric generator, weight) with weights summing to 1.
# Degree 4/5 values: Dunavant (1985), positive-weight members only.
_SYMMETRIC_ORBITS = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    4: [(_ab(0.445948490915965), 0.223381589678011),
        (_ab(0.091576213509771), 0.109951743655322)],
    5: [((1 / 3, 1 / 3, 1 / 3), 0.225),
        (_ab(0.470142064105115), 0.132394152788506),
        (_ab(0.101286507323456), 0.125939180544827)],
}
MAX_TRIANGLE_DEGREE = 40


def _expand_orbit(gen):
    a, b, c = gen
    if a == b == c:
        return [gen]
    # generators have the form (a, b, b)
    return [(a, b, b), (b, a, b), (b, b, a)]


@lru_cache(maxsize=None)
def _symmetric_rule(deg: int):
    pts, wts = [], []
    for gen, w in _SYMMETRIC_ORBITS[deg]:
        for l0, l1, l2 in _expand_orbit(gen):
            pts.append((l1, l2))
            wts.append(w)
    p = np.array(pts)
    w = np.array(wts)
    return p, w / w.sum()


@lru_cache(maxsize=None)
def _collapsed_rule(deg: int):
    """Conical product rule (Gauss-Jacobi x Gauss-Legendre), exact to ``deg``."""
    n = deg // 2 + 1
    xj, wj = roots_jacobi(n, 1.0, 0.0)   # weight (1 - x) on [-1, 1]
    xl, wl = legendre.leggauss(n)
    s = 0.5 * (xj + 1.0)
    t = 0.5 * (xl + 1.0)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(wj, wl) / 8.0
    pts = np.column_stack([S.ravel(), ((1.0 - S) * T).ravel()])
    w = W.ravel()
    return pts, w / w.sum()


def triangle_rule(exactness: int) -> QuadratureRule:
    """Positive-weight rule on the reference triangle, weights summing to 1/2."""
    if exactness < 0:
        raise QuadratureError(f"negative degree {exactness}")
    if exactness > MAX_TRIANGLE_DEGREE:
        raise QuadratureError(f"unsupported triangle degree {exactness} (max {MAX_TRIANGLE_DEGREE})")
    deg = max(exactness, 1)
    if deg == 3:
        deg = 4  # the classical 4-point degree-3 rule has a negative weight
    if deg in _SYMMETRIC_ORBITS:
        p, w = _symmetric_rule(deg)
    else:
        p, w = _collapsed_rule(deg)
    return QuadratureRule(p.copy(), 0.5 * w, deg)


def conical_triangle_rule(exactness: int) -> QuadratureRule:
    """Reference-triangle product rule; independent of the symmetric tables."""
    p, w = _collapsed_rule(max(exactness, 1))
    return QuadratureRule(p.copy(), 0.5 * w, max(exactness, 1))


def map_triangle(rule: QuadratureRule, a, b, c) -> tuple[np.ndarray, np.ndarray]:
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    J = np.column_stack([b - a, c - a])
    det = float(np.linalg.det(J))
    # reference weights sum to 1/2, the mapped triangle has area |det| / 2
    return a + rule.points @ J.T, rule.weights * abs(det)


def polygon_rule(geom: ElementGeometry, exactness: int, *, cell=None,
                 reference: QuadratureRule | None = None) -> QuadratureRule:
    """Sub-triangulate ``geom`` from its centroid and map a triangle rule onto each piece.

    The polygon must be star-shaped with respect to its centroid.
    """
    ref = reference if reference is not None else triangle_rule(exactness)
    c = geom.centroid
    pts, wts = [], []
    for i, edge in enumerate(geom.edges):
        tri = np.array([c, edge.start, edge.end])
        if signed_area(tri) <= 1e-14 * geom.diameter ** 2:
            where = f"cell {cell}" if cell is not None else "polygon"
            raise QuadratureError(f"{where} is not star-shaped with respect to its centroid (edge {i})")
        p, w = map_triangle(ref, *tri)
        pts.append(p)
        wts.append(w)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), ref.degree)


def edge_rule(a, b, exactness: int) -> QuadratureRule:
    """Gauss-Legendre rule on the segment ``a``-``b``.

    ``points`` are 2D coordinates; ``abscissae`` in [0, 1] are available via
    :func:`gauss_legendre_01`.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    if length == 0.0:
        raise QuadratureError("coincident edge endpoints")
    s, w = gauss_legendre_01(exactness)
    return QuadratureRule(a + np.outer(s, b - a), w * length, max(exactness, 1))


@lru_cache(maxsize=None)
def gauss_legendre_01(exactness: int) -> tuple[np.ndarray, np.ndarray]:
    n = max(exactness, 0) // 2 + 1
    x, w = legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_lobatto_01(n_points: int) -> np.ndarray:
    """Gauss-Lobatto abscissae on [0, 1] (endpoints included)."""
    if n_points < 2:
        raise QuadratureError("Gauss-Lobatto needs at least 2 points")
    inner = legendre.Legendre.basis(n_points - 1).deriv().roots()
    x = np.concatenate([[-1.0], np.sort(inner.real), [1.0]])
    return 0.5 * (x + 1.0)
