"""Linear and eigenvalue solvers on the assembled block system.

Both solve paths eliminate one block before factoring.  Source problems
eliminate the cell unknowns (their blocks invert cell by cell) and factor the
face-coupled Schur complement once.  Eigenvalue problems go the other way:
the face unknowns carry no mass, so eliminating them leaves an equivalent
eigenproblem in the cell unknowns alone, with the mass matrix untouched.

Three eigensolver routes are provided.  The dense route forms the condensed
matrix and calls a symmetric dense solver after one of two congruence
transforms (see ``solve_eigen``).  The operator route never forms the
condensed matrix; it runs shift-invert Lanczos with the face-eliminated
factorization as the inverse action, and exists for meshes whose cell-unknown
count makes the dense route unreasonable.  The full-pencil route solves the
uncondensed system with a QZ decomposition and is kept as a cross-check: it
shares no code with the condensed paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .assembly import GlobalBlocks, assemble

_OPERATOR_SEED = 20260822


@dataclass
class SourceSolution:
    """Discrete solution of a source problem, split into its two dof groups."""

    dof_map: object
    cell_dofs: np.ndarray
    face_dofs: np.ndarray


@dataclass
class Spectrum:
    """Approximate eigenpairs, eigenvalues ascending, eigenvectors mass-orthonormal."""

    dof_map: object
    eigenvalues: np.ndarray
    cell_vectors: np.ndarray
    face_vectors: np.ndarray
    method: str

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.shape[0]


class CondensedSolver:
    """Factorization of the full system via elimination of the cell unknowns.

    Solving with a right-hand side supported on cells only is exactly the
    inverse action of the face-eliminated cell matrix, so one instance serves
    both as a source solver and as the shift-invert operator for Lanczos.
    """

    def __init__(self, blocks: GlobalBlocks):
        self.blocks = blocks
        dm = blocks.dof_map
        self._shape = (dm.mesh.n_cells, dm.n_cell_basis)
        # Cell blocks are small and well conditioned; batched explicit
        # inverses keep every application vectorized.
        self._cell_inv = np.linalg.inv(blocks.A_KK)
        if dm.n_face_dofs:
            inv_sp = sparse.block_diag(list(self._cell_inv), format="csr")
            face_schur = blocks.A_FF - blocks.A_FK @ (inv_sp @ blocks.A_KF)
            self._face_lu = splu(face_schur.tocsc())
        else:
            self._face_lu = None
        self._ff_lu = None

    def _cells_apply_inv(self, b: np.ndarray) -> np.ndarray:
        nc, nb = self._shape
        return (self._cell_inv @ b.reshape(nc, nb, 1)).ravel()

    def solve(self, b_cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve the full system with the given cell load and zero face load."""
        t = self._cells_apply_inv(b_cells)
        if self._face_lu is None:
            return t, np.zeros(0)
        y = self._face_lu.solve(-(self.blocks.A_FK @ t))
        u = t - self._cells_apply_inv(self.blocks.A_KF @ y)
        return u, y

    def apply_condensed(self, x_cells: np.ndarray) -> np.ndarray:
        """Matrix-vector product with the face-eliminated cell matrix."""
        nc, nb = self._shape
        out = (self.blocks.A_KK @ x_cells.reshape(nc, nb, 1)).ravel()
        if self.blocks.dof_map.n_face_dofs:
            if self._ff_lu is None:
                self._ff_lu = splu(self.blocks.A_FF.tocsc())
            z = self._ff_lu.solve(self.blocks.A_FK @ x_cells)
            out -= self.blocks.A_KF @ z
        return out


def solve_source(blocks: GlobalBlocks, rhs_cells: np.ndarray) -> SourceSolution:
    u_cells, u_faces = CondensedSolver(blocks).solve(rhs_cells)
    return SourceSolution(dof_map=blocks.dof_map, cell_dofs=u_cells,
                          face_dofs=u_faces)


def condense_cells(blocks: GlobalBlocks, dense_limit: int = 6000) -> np.ndarray:
    """Dense face-eliminated cell matrix.  Refuses unreasonably large systems."""
    dm = blocks.dof_map
    if dm.n_cell_dofs > dense_limit:
        raise ValueError(
            f"{dm.n_cell_dofs} cell unknowns exceed the dense limit "
            f"{dense_limit}; use the operator route")
    K = blocks.A_KK_dense()
    if dm.n_face_dofs:
        lu = splu(blocks.A_FF.tocsc())
        K -= blocks.A_KF @ lu.solve(blocks.A_FK.toarray())
    return K


def recover_face_dofs(blocks: GlobalBlocks, cell_vectors: np.ndarray) -> np.ndarray:
    """Face values consistent with given cell values under zero face residual."""
    dm = blocks.dof_map
    if dm.n_face_dofs == 0:
        return np.zeros((0,) + cell_vectors.shape[1:])
    lu = splu(blocks.A_FF.tocsc())
    return lu.solve(-(blocks.A_FK @ cell_vectors))


def _block_lower_solve(factors: np.ndarray, rhs: np.ndarray,
                       transposed: bool = False) -> np.ndarray:
    """Solve with a block-diagonal lower-triangular matrix, row block by row block."""
    nc, nb = factors.shape[0], factors.shape[1]
    out = np.empty_like(rhs, dtype=float)
    trans = "T" if transposed else "N"
    for ci in range(nc):
        rows = slice(ci * nb, (ci + 1) * nb)
        out[rows] = linalg.solve_triangular(factors[ci], rhs[rows],
                                            lower=True, trans=trans)
    return out


def _orientation_factors(blocks: GlobalBlocks, vectors: np.ndarray) -> np.ndarray:
    """Per-column scale giving unit mass norm and a positive largest entry."""
    Bv = blocks.B_KK_sparse() @ vectors
    norms = np.sqrt(np.einsum("ij,ij->j", vectors, Bv))
    signs = np.array([np.sign(col[np.argmax(np.abs(col))]) or 1.0
                      for col in vectors.T])
    return signs / norms


def solve_eigen(blocks: GlobalBlocks, n_modes: int,
                strategy: str = "invert") -> Spectrum:
    """Dense eigensolve on the face-eliminated cell system.

    Two congruence transforms are available.  ``"invert"`` factors the
    condensed stiffness and solves for the reciprocals, which evaluates the
    small end of the spectrum with small relative error.  ``"reduce"``
    factors the block-diagonal mass instead, a cheaper transform whose
    absolute accuracy is set by the largest eigenvalue of the transformed
    matrix; both agree far beyond the discretization error.
    """
    dm = blocks.dof_map
    _check_modes(n_modes, dm.n_cell_dofs)
    K = condense_cells(blocks)
    if strategy == "invert":
        L = linalg.cholesky(K, lower=True)
        Y = linalg.solve_triangular(L, blocks.B_KK_dense(), lower=True)
        C = linalg.solve_triangular(L, Y.T, lower=True).T
        mu, Z = linalg.eigh(0.5 * (C + C.T))
        sel = np.argsort(mu)[::-1][:n_modes]
        mu = mu[sel]
        if np.any(mu <= 0):
            raise ArithmeticError("transformed pencil lost positivity")
        values = 1.0 / mu
        vectors = linalg.solve_triangular(L, Z[:, sel], lower=True,
                                          trans="T") / np.sqrt(mu)
    elif strategy == "reduce":
        Lb = np.linalg.cholesky(blocks.B_KK)
        W = _block_lower_solve(Lb, K)
        C = _block_lower_solve(Lb, W.T).T
        w, Z = linalg.eigh(0.5 * (C + C.T))
        values = w[:n_modes]
        vectors = _block_lower_solve(Lb, Z[:, :n_modes], transposed=True)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    vectors = vectors * _orientation_factors(blocks, vectors)
    return Spectrum(dof_map=dm, eigenvalues=values, cell_vectors=vectors,
                    face_vectors=recover_face_dofs(blocks, vectors),
                    method=f"dense-{strategy}")


def solve_eigen_operator(blocks: GlobalBlocks, n_modes: int) -> Spectrum:
    """Shift-invert Lanczos at zero shift, using the cell-eliminated factorization.

    The starting vector is drawn from a fixed-seed generator so repeated runs
    agree to machine precision.
    """
    dm = blocks.dof_map
    _check_modes(n_modes, dm.n_cell_dofs)
    n = dm.n_cell_dofs
    if n_modes >= n:
        raise ValueError("the operator route needs strictly fewer modes "
                         "than cell unknowns")
    solver = CondensedSolver(blocks)
    A_op = LinearOperator((n, n), matvec=solver.apply_condensed)
    inv_op = LinearOperator(
        (n, n), matvec=lambda b: solver.solve(np.asarray(b, float).ravel())[0])
    M = blocks.B_KK_sparse().tocsc()
    v0 = np.random.default_rng(_OPERATOR_SEED).standard_normal(n)
    values, vectors = eigsh(A_op, k=n_modes, M=M, sigma=0.0, which="LM",
                            OPinv=inv_op, v0=v0, tol=0)
    order = np.argsort(values)
    vectors = vectors[:, order]
    vectors = vectors * _orientation_factors(blocks, vectors)
    return Spectrum(dof_map=dm, eigenvalues=values[order], cell_vectors=vectors,
                    face_vectors=recover_face_dofs(blocks, vectors),
                    method="operator")


def solve_eigen_full_pencil(blocks: GlobalBlocks, n_modes: int) -> Spectrum:
    """QZ on the uncondensed pencil, for cross-checking the condensed routes.

    The face unknowns carry no mass, so the pencil is singular: exactly one
    finite eigenvalue must appear per cell unknown, and anything else is an
    error.  Dense and meant for small systems only.
    """
    dm = blocks.dof_map
    _check_modes(n_modes, dm.n_cell_dofs)
    nK, nF = dm.n_cell_dofs, dm.n_face_dofs
    n = nK + nF
    A = np.zeros((n, n))
    A[:nK, :nK] = blocks.A_KK_dense()
    A[:nK, nK:] = blocks.A_KF.toarray()
    A[nK:, :nK] = blocks.A_FK.toarray()
    A[nK:, nK:] = blocks.A_FF.toarray()
    B = np.zeros((n, n))
    B[:nK, :nK] = blocks.B_KK_dense()

    (alpha, beta), vr = linalg.eig(A, B, homogeneous_eigvals=True)
    finite = np.abs(beta) > 1e-10 * np.abs(beta).max()
    if int(finite.sum()) != nK:
        raise ArithmeticError(
            f"pencil produced {int(finite.sum())} finite eigenvalues, "
            f"expected {nK}")
    lam = alpha[finite] / beta[finite]
    if np.any(np.abs(lam.imag) > 1e-8 * np.maximum(1.0, np.abs(lam.real))):
        raise ArithmeticError("finite eigenvalues are not real")
    lam = lam.real
    vecs = vr[:, finite]
    order = np.argsort(lam)[:n_modes]
    lam = lam[order]
    full = np.empty((n, n_modes))
    for j, col in enumerate(vecs[:, order].T):
        pivot = col[np.argmax(np.abs(col))]
        rotated = col * (pivot.conjugate() / abs(pivot))
        full[:, j] = rotated.real
    factors = _orientation_factors(blocks, full[:nK])
    full = full * factors
    return Spectrum(dof_map=dm, eigenvalues=lam, cell_vectors=full[:nK],
                    face_vectors=full[nK:], method="full-pencil")


def _check_modes(n_modes: int, n_cell_dofs: int) -> None:
    if n_modes < 1:
        raise ValueError("at least one mode must be requested")
    if n_modes > n_cell_dofs:
        raise ValueError(
            f"{n_modes} modes requested but only {n_cell_dofs} cell unknowns "
            "exist; refine the mesh or raise the degree")


def compute_spectrum(mesh, degree: int, eta: float, n_modes: int,
                     method: str = "auto", dense_limit: int = 2400,
                     strategy: str = "invert") -> Spectrum:
    """Assemble and solve the eigenproblem on a mesh, choosing a route by size."""
    blocks = assemble(mesh, degree, eta)
    _check_modes(n_modes, blocks.dof_map.n_cell_dofs)
    if method == "auto":
        method = "dense" if blocks.dof_map.n_cell_dofs <= dense_limit else "operator"
    if method == "dense":
        return solve_eigen(blocks, n_modes, strategy=strategy)
    if method == "operator":
        return solve_eigen_operator(blocks, n_modes)
    if method == "full":
        return solve_eigen_full_pencil(blocks, n_modes)
    raise ValueError(f"unknown method {method!r}")
