"""Scaled monomial bases on cells and faces, with Gram matrices and
L2 projections.

Cell bases are monomials in the centroid-centered, diameter-scaled
coordinates ((x - x_K) / h_K)^alpha, ordered by total degree with the
constant first.  Face bases in 2d are monomials of the midpoint-centered
arc-length parameter scaled by the face diameter; in 1d a face is a point
and its basis is the single constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .quadrature import QuadratureRule


@lru_cache(maxsize=None)
def monomial_exponents(dim: int, degree: int) -> np.ndarray:
    """Exponent multi-indices up to ``degree``, graded, constant first."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    rows = []
    if dim == 1:
        rows = [[d] for d in range(degree + 1)]
    elif dim == 2:
        for total in range(degree + 1):
            for ax in range(total, -1, -1):
                rows.append([ax, total - ax])
    else:
        raise ValueError(f"unsupported dimension {dim}")
    out = np.array(rows, dtype=np.int64)
    out.flags.writeable = False
    return out


def space_dimension(dim: int, degree: int) -> int:
    return monomial_exponents(dim, degree).shape[0]


@dataclass(frozen=True)
class CellBasis:
    """Scaled monomial basis of total degree <= ``degree`` on one cell."""

    dim: int
    degree: int
    center: np.ndarray
    scale: float

    @property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.dim, self.degree)

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Basis values at ``points``; shape ``(n_points, size)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        local = (pts - self.center) / self.scale
        expo = self.exponents
        vals = np.ones((pts.shape[0], expo.shape[0]))
        for d in range(self.dim):
            vals *= local[:, d][:, None] ** expo[:, d][None, :]
        return vals

    def eval_grad(self, points: np.ndarray) -> np.ndarray:
        """Basis gradients at ``points``; shape ``(n_points, size, dim)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        local = (pts - self.center) / self.scale
        expo = self.exponents
        n, m = pts.shape[0], expo.shape[0]
        grad = np.empty((n, m, self.dim))
        for comp in range(self.dim):
            part = np.ones((n, m))
            for d in range(self.dim):
                e = expo[:, d].astype(float)
                if d == comp:
                    dropped = np.maximum(expo[:, d] - 1, 0)
                    part *= e[None, :] * local[:, d][:, None] ** dropped[None, :]
                else:
                    part *= local[:, d][:, None] ** expo[:, d][None, :]
            grad[:, :, comp] = part / self.scale
        return grad


@dataclass(frozen=True)
class FaceBasis:
    """Scaled monomial basis on one face.

    In 2d the variable is the arc-length offset from the face midpoint
    divided by the face diameter; in 1d the basis is the constant 1.
    """

    dim: int
    degree: int
    center: np.ndarray
    scale: float
    tangent: np.ndarray | None

    @property
    def size(self) -> int:
        return self.degree + 1 if self.dim == 2 else 1

    def eval(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == 1:
            return np.ones((pts.shape[0], 1))
        s = ((pts - self.center) @ self.tangent) / self.scale
        return s[:, None] ** np.arange(self.degree + 1)[None, :]


def cell_basis_for(cell, degree: int, dim: int) -> CellBasis:
    """Basis attached to a mesh cell (centroid-centered, diameter-scaled)."""
    return CellBasis(dim=dim, degree=degree, center=np.asarray(cell.centroid),
                     scale=float(cell.diameter))


def face_basis_for(face, degree: int, dim: int, face_coords=None) -> FaceBasis:
    """Basis attached to a mesh face; ``face_coords`` are its vertex coords."""
    if dim == 1:
        return FaceBasis(dim=1, degree=0, center=np.asarray(face.center),
                         scale=1.0, tangent=None)
    if face_coords is None:
        raise ValueError("face vertex coordinates required in 2d")
    t = np.asarray(face_coords[1], dtype=float) - np.asarray(face_coords[0], dtype=float)
    t = t / np.linalg.norm(t)
    return FaceBasis(dim=2, degree=degree, center=np.asarray(face.center),
                     scale=float(face.diameter), tangent=t)


def mass_matrix(basis, rule: QuadratureRule) -> np.ndarray:
    """Gram matrix of the basis in the L2 inner product of the rule."""
    vals = basis.eval(rule.points)
    return (vals * rule.weights[:, None]).T @ vals


def stiffness_gram(basis: CellBasis, rule: QuadratureRule) -> np.ndarray:
    """Gram matrix of the basis gradients (singular: constants are flat)."""
    grads = basis.eval_grad(rule.points)
    out = np.zeros((basis.size, basis.size))
    for comp in range(basis.dim):
        g = grads[:, :, comp]
        out += (g * rule.weights[:, None]).T @ g
    return out


@dataclass(frozen=True)
class PolyCoeffs:
    """A polynomial as coefficients against a cell or face basis."""

    basis: object
    coeffs: np.ndarray

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.basis.eval(points) @ self.coeffs

    def grad(self, points: np.ndarray) -> np.ndarray:
        return np.einsum("pbd,b->pd", self.basis.eval_grad(points), self.coeffs)


def l2_project(f, basis, rule: QuadratureRule) -> PolyCoeffs:
    """L2 projection of a callable onto the basis, using the given rule.

    Exact whenever the rule integrates products of ``f`` with basis functions
    exactly; for polynomial ``f`` of degree p that needs order p + degree.
    """
    vals = basis.eval(rule.points)
    fvals = np.asarray(f(rule.points), dtype=float)
    rhs = vals.T @ (rule.weights * fvals)
    gram = (vals * rule.weights[:, None]).T @ vals
    coeffs = cho_solve(cho_factor(gram), rhs)
    return PolyCoeffs(basis=basis, coeffs=coeffs)


def l2_project_cell(f, basis: CellBasis, rule: QuadratureRule) -> PolyCoeffs:
    return l2_project(f, basis, rule)


def l2_project_face(f, basis: FaceBasis, rule: QuadratureRule) -> PolyCoeffs:
    if basis.dim == 1:
        # Point face: the projection onto constants is the point value.
        value = np.asarray(f(np.atleast_2d(basis.center)), dtype=float).reshape(1)
        return PolyCoeffs(basis=basis, coeffs=value)
    return l2_project(f, basis, rule)
