"""Quadrature rules on segments, triangles, polygons and mesh faces.

All rules are built from tensorized Gauss-Legendre nodes.  Triangles use a
collapsed (Duffy) tensor rule; general polygons are integrated by fanning
triangles out from the centroid, which requires the polygon to be star-shaped
with respect to it.  Zero-dimensional faces (the d=1 case) get a single point
with unit weight, so "integrating" over such a face is point evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights for numerical integration over one set.

    ``points`` has shape ``(n, d)`` in physical coordinates and ``weights``
    has shape ``(n,)``.  Weights are strictly positive and sum to the measure
    of the integration set (with the convention that a point has measure 1).
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        self.points.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]

    def integrate(self, f) -> float:
        """Integrate a callable mapping ``(n, d)`` points to ``(n,)`` values."""
        return float(self.weights @ np.asarray(f(self.points), dtype=float))


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _points_for_order(order: int) -> int:
    if order < 0:
        raise ValueError(f"quadrature order must be nonnegative, got {order}")
    return (order + 2) // 2


def segment_rule(p0, p1, order: int) -> QuadratureRule:
    """Gauss-Legendre rule on the segment from ``p0`` to ``p1``.

    The endpoints may live in any ambient dimension; the rule is exact for
    polynomials of the arc-length parameter up to ``order``.
    """
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    p1 = np.atleast_1d(np.asarray(p1, dtype=float))
    x, w = _gauss_legendre(_points_for_order(order))
    t = 0.5 * (x + 1.0)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    length = float(np.linalg.norm(p1 - p0))
    if length <= 0.0:
        raise ValueError("segment has zero length")
    return QuadratureRule(pts, 0.5 * length * w)


@lru_cache(maxsize=None)
def _duffy_reference(order: int):
    # Collapsed tensor rule on the reference triangle {x+y<=1, x,y>=0}.
    # Map (u, v) in [0,1]^2 -> (u, v*(1-u)) with Jacobian (1-u); a monomial of
    # total degree p picks up degree at most p+1 in u, hence the extra point.
    nu = _points_for_order(order + 1)
    nv = _points_for_order(order)
    xu, wu = _gauss_legendre(nu)
    xv, wv = _gauss_legendre(nv)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = 0.25 * np.outer(wu, wv) * (1.0 - uu)
    x = uu.ravel()
    y = (vv * (1.0 - uu)).ravel()
    w = ww.ravel()
    return np.column_stack([x, y]), w


def triangle_rule(v0, v1, v2, order: int) -> QuadratureRule:
    """Rule on the triangle ``(v0, v1, v2)``, exact to total degree ``order``."""
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    ref_pts, ref_w = _duffy_reference(order)
    jac = np.column_stack([v1 - v0, v2 - v0])
    det = float(np.linalg.det(jac))
    if det <= 0.0:
        raise ValueError("triangle vertices must be in counterclockwise order")
    pts = v0[None, :] + ref_pts @ jac.T
    return QuadratureRule(pts, det * ref_w)


def polygon_rule(vertices: np.ndarray, order: int) -> QuadratureRule:
    """Rule on a polygon given as a counterclockwise vertex loop.

    The polygon is fanned into triangles from its area centroid, so it must be
    star-shaped with respect to that point; a fan triangle with non-positive
    area raises ``ValueError``.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
        raise ValueError("polygon needs at least three 2d vertices")
    area, centroid = polygon_area_centroid(verts)
    pts = []
    wts = []
    nxt = np.roll(verts, -1, axis=0)
    for a, b in zip(verts, nxt):
        tri_area = 0.5 * ((a[0] - centroid[0]) * (b[1] - centroid[1])
                          - (b[0] - centroid[0]) * (a[1] - centroid[1]))
        if tri_area <= 1e-14 * area:
            raise ValueError("polygon is not star-shaped with respect to its centroid")
        rule = triangle_rule(centroid, a, b, order)
        pts.append(rule.points)
        wts.append(rule.weights)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts))


def polygon_area_centroid(vertices: np.ndarray):
    """Signed area (must be positive) and area centroid of a vertex loop."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(np.sum(cross))
    if area <= 0.0:
        raise ValueError("vertex loop is not counterclockwise (non-positive area)")
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    return area, np.array([cx, cy])


def cell_rule(vertices: np.ndarray, order: int) -> QuadratureRule:
    """Rule over a mesh cell given by its vertex coordinates.

    One-dimensional cells are segments; two-dimensional cells are polygons.
    """
    verts = np.atleast_2d(np.asarray(vertices, dtype=float))
    dim = verts.shape[1]
    if dim == 1:
        if verts.shape[0] != 2:
            raise ValueError("a 1d cell is a segment with two endpoints")
        return segment_rule(verts[0], verts[1], order)
    if dim == 2:
        if verts.shape[0] == 3:
            return triangle_rule(verts[0], verts[1], verts[2], order)
        return polygon_rule(verts, order)
    raise ValueError(f"unsupported dimension {dim}")


def face_rule(vertices: np.ndarray, order: int) -> QuadratureRule:
    """Rule over a mesh face: a segment for d=2, a unit-weight point for d=1."""
    verts = np.atleast_2d(np.asarray(vertices, dtype=float))
    dim = verts.shape[1]
    if dim == 1:
        if verts.shape[0] != 1:
            raise ValueError("a 0d face is a single point")
        return QuadratureRule(verts.copy(), np.array([1.0]))
    if dim == 2:
        if verts.shape[0] != 2:
            raise ValueError("a 1d face is a segment with two endpoints")
        return segment_rule(verts[0], verts[1], order)
    raise ValueError(f"unsupported dimension {dim}")
