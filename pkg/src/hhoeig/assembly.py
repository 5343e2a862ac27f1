"""Global block assembly with homogeneous Dirichlet elimination.

The global system is kept in its natural 2x2 block structure: cell unknowns
against face unknowns.  Cell-cell blocks never couple across cells, so A_KK
and the mass B_KK are stored as one dense block per cell; the face-coupled
blocks are compressed sparse rows.  Boundary faces carry no unknowns (their
values are fixed to zero), which is how the Dirichlet condition enters.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .basis import cell_basis_for, space_dimension
from .local import build_local_operators
from .quadrature import cell_rule


@dataclass(frozen=True)
class DofMap:
    """Global numbering: cell blocks in cell order, interface blocks in face order."""

    mesh: object
    degree: int
    interface_of_face: np.ndarray
    face_of_interface: np.ndarray

    @classmethod
    def build(cls, mesh, degree: int) -> "DofMap":
        interface_of_face = -np.ones(mesh.n_faces, dtype=np.int64)
        face_of_interface = []
        for fid, face in enumerate(mesh.faces):
            if not face.is_boundary:
                interface_of_face[fid] = len(face_of_interface)
                face_of_interface.append(fid)
        interface_of_face.flags.writeable = False
        return cls(mesh=mesh, degree=degree,
                   interface_of_face=interface_of_face,
                   face_of_interface=np.array(face_of_interface, dtype=np.int64))

    @property
    def n_cell_basis(self) -> int:
        return space_dimension(self.mesh.dim, self.degree)

    @property
    def n_face_basis(self) -> int:
        return self.degree + 1 if self.mesh.dim == 2 else 1

    @property
    def n_interfaces(self) -> int:
        return self.face_of_interface.shape[0]

    @property
    def n_cell_dofs(self) -> int:
        return self.mesh.n_cells * self.n_cell_basis

    @property
    def n_face_dofs(self) -> int:
        return self.n_interfaces * self.n_face_basis

    def cell_slice(self, ci: int) -> slice:
        n = self.n_cell_basis
        return slice(ci * n, (ci + 1) * n)

    def interface_slice(self, fid: int):
        """Global face-dof slice for a face id, or ``None`` on the boundary."""
        idx = self.interface_of_face[fid]
        if idx < 0:
            return None
        n = self.n_face_basis
        return slice(idx * n, (idx + 1) * n)


@dataclass
class GlobalBlocks:
    """The assembled 2x2 block system and the cell mass blocks."""

    dof_map: DofMap
    eta: float
    A_KK: np.ndarray          # (n_cells, n_cell_basis, n_cell_basis)
    B_KK: np.ndarray          # (n_cells, n_cell_basis, n_cell_basis)
    A_KF: sparse.csr_matrix   # (n_cell_dofs, n_face_dofs)
    A_FK: sparse.csr_matrix
    A_FF: sparse.csr_matrix   # (n_face_dofs, n_face_dofs)

    def A_KK_dense(self) -> np.ndarray:
        n = self.dof_map.n_cell_dofs
        out = np.zeros((n, n))
        for ci in range(self.dof_map.mesh.n_cells):
            s = self.dof_map.cell_slice(ci)
            out[s, s] = self.A_KK[ci]
        return out

    def B_KK_dense(self) -> np.ndarray:
        n = self.dof_map.n_cell_dofs
        out = np.zeros((n, n))
        for ci in range(self.dof_map.mesh.n_cells):
            s = self.dof_map.cell_slice(ci)
            out[s, s] = self.B_KK[ci]
        return out

    def B_KK_sparse(self) -> sparse.csr_matrix:
        return sparse.block_diag(list(self.B_KK), format="csr")

    def A_KK_sparse(self) -> sparse.csr_matrix:
        return sparse.block_diag(list(self.A_KK), format="csr")


def assemble(mesh, degree: int, eta: float) -> GlobalBlocks:
    """Assemble stiffness blocks and cell mass blocks for the whole mesh."""
    if not 0 <= degree <= 3:
        raise ValueError("polynomial degree must be between 0 and 3")
    if not eta > 0:
        raise ValueError("stabilization weight must be positive")
    dof_map = DofMap.build(mesh, degree)
    nb = dof_map.n_cell_basis
    nf = dof_map.n_face_basis

    A_KK = np.empty((mesh.n_cells, nb, nb))
    B_KK = np.empty((mesh.n_cells, nb, nb))
    kf_rows, kf_cols, kf_vals = [], [], []
    ff_rows, ff_cols, ff_vals = [], [], []

    for ci in range(mesh.n_cells):
        ops = build_local_operators(mesh, ci, degree, eta)
        layout = ops.layout
        A = ops.stiffness
        A_KK[ci] = A[layout.cell_slice(), layout.cell_slice()]
        B_KK[ci] = ops.mass

        cell_gslice = dof_map.cell_slice(ci)
        cell_gidx = np.arange(cell_gslice.start, cell_gslice.stop)
        face_gslices = []
        for i, fid in enumerate(mesh.cells[ci].faces):
            face_gslices.append(dof_map.interface_slice(int(fid)))

        for i, gs_i in enumerate(face_gslices):
            if gs_i is None:
                continue
            gi = np.arange(gs_i.start, gs_i.stop)
            block = A[layout.cell_slice(), layout.face_slice(i)]
            rr, cc = np.meshgrid(cell_gidx, gi, indexing="ij")
            kf_rows.append(rr.ravel())
            kf_cols.append(cc.ravel())
            kf_vals.append(block.ravel())
            for j, gs_j in enumerate(face_gslices):
                if gs_j is None:
                    continue
                gj = np.arange(gs_j.start, gs_j.stop)
                block = A[layout.face_slice(i), layout.face_slice(j)]
                rr, cc = np.meshgrid(gi, gj, indexing="ij")
                ff_rows.append(rr.ravel())
                ff_cols.append(cc.ravel())
                ff_vals.append(block.ravel())

    shape_kf = (dof_map.n_cell_dofs, dof_map.n_face_dofs)
    shape_ff = (dof_map.n_face_dofs, dof_map.n_face_dofs)
    A_KF = _coo_to_csr(kf_rows, kf_cols, kf_vals, shape_kf)
    A_FF = _coo_to_csr(ff_rows, ff_cols, ff_vals, shape_ff)
    A_FK = A_KF.T.tocsr()
    return GlobalBlocks(dof_map=dof_map, eta=eta, A_KK=A_KK, B_KK=B_KK,
                        A_KF=A_KF, A_FK=A_FK, A_FF=A_FF)


def gather_cell_vector(dof_map: DofMap, ci: int, cell_values: np.ndarray,
                       face_values: np.ndarray) -> np.ndarray:
    """Local dof vector of one cell, with zeros on its boundary faces."""
    mesh = dof_map.mesh
    nf = dof_map.n_face_basis
    parts = [cell_values[dof_map.cell_slice(ci)]]
    for fid in mesh.cells[ci].faces:
        s = dof_map.interface_slice(int(fid))
        parts.append(np.zeros(nf) if s is None else face_values[s])
    return np.concatenate(parts)


def _coo_to_csr(rows, cols, vals, shape) -> sparse.csr_matrix:
    if rows:
        coo = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=shape)
    else:
        coo = sparse.coo_matrix(shape)
    out = coo.tocsr()
    out.sum_duplicates()
    return out


def assemble_rhs(mesh, degree: int, f, quad_order: int | None = None) -> np.ndarray:
    """Cell-dof load vector with entries (f, basis function) per cell.

    The default quadrature order 2k + 6 resolves smooth transcendental data;
    pass ``quad_order`` to override.
    """
    dof_map = DofMap.build(mesh, degree)
    order = quad_order if quad_order is not None else 2 * degree + 6
    rhs = np.empty(dof_map.n_cell_dofs)
    for ci, cell in enumerate(mesh.cells):
        basis = cell_basis_for(cell, degree, mesh.dim)
        rule = cell_rule(mesh.cell_vertex_coords(ci), order)
        fvals = np.asarray(f(rule.points), dtype=float)
        rhs[dof_map.cell_slice(ci)] = basis.eval(rule.points).T @ (rule.weights * fvals)
    return rhs


def dump_blocks(blocks: GlobalBlocks, directory) -> None:
    """Write all five blocks as text files in coordinate format.

    Each line is ``row col value`` with 17 significant digits; block-diagonal
    matrices use global cell-dof coordinates.
    """
    os.makedirs(directory, exist_ok=True)
    dof_map = blocks.dof_map

    def write_blockdiag(name, blocks3d):
        with open(os.path.join(directory, name), "w") as fh:
            for ci in range(dof_map.mesh.n_cells):
                base = dof_map.cell_slice(ci).start
                block = blocks3d[ci]
                for i in range(block.shape[0]):
                    for j in range(block.shape[1]):
                        fh.write(f"{base + i} {base + j} {block[i, j]:.16e}\n")

    def write_sparse(name, mat):
        coo = mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(os.path.join(directory, name), "w") as fh:
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{r} {c} {v:.16e}\n")

    write_blockdiag("A_KK.txt", blocks.A_KK)
    write_blockdiag("B_KK.txt", blocks.B_KK)
    write_sparse("A_KF.txt", blocks.A_KF)
    write_sparse("A_FK.txt", blocks.A_FK)
    write_sparse("A_FF.txt", blocks.A_FF)
