"""Solver tests.

The load-bearing checks are cross-route agreements: the condensed dense
solver against the uncondensed QZ pencil, the two congruence strategies
against each other, the Lanczos operator route against the dense route, and
a fixed-point identity tying the source solver (cells eliminated) to the
eigensolver (faces eliminated).  The two elimination orders share no
factorization, so agreement pins both.
"""

import numpy as np
import pytest

from hhoeig.assembly import assemble, assemble_rhs
from hhoeig.basis import cell_basis_for, l2_project_cell
from hhoeig.mesh import (build_triangular_square, build_uniform_interval,
                         build_uniform_square)
from hhoeig.quadrature import cell_rule
from hhoeig.solver import (CondensedSolver, compute_spectrum, condense_cells,
                           recover_face_dofs, solve_eigen,
                           solve_eigen_full_pencil, solve_eigen_operator,
                           solve_source)


class TestCondensedMatrix:
    def test_symmetric_and_positive_definite(self):
        blocks = assemble(build_uniform_square(2), 1, eta=5.0)
        K = condense_cells(blocks)
        scale = np.abs(K).max()
        assert np.abs(K - K.T).max() <= 1e-13 * scale
        assert np.linalg.eigvalsh(0.5 * (K + K.T)).min() > 0

    def test_operator_action_matches_dense(self):
        blocks = assemble(build_triangular_square(2), 1, eta=5.0)
        K = condense_cells(blocks)
        solver = CondensedSolver(blocks)
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = rng.standard_normal(K.shape[0])
            np.testing.assert_allclose(solver.apply_condensed(x), K @ x,
                                       rtol=1e-11, atol=1e-11)

    def test_solver_inverts_operator(self):
        blocks = assemble(build_uniform_square(3), 0, eta=3.0)
        solver = CondensedSolver(blocks)
        rng = np.random.default_rng(4)
        b = rng.standard_normal(blocks.dof_map.n_cell_dofs)
        u, _ = solver.solve(b)
        np.testing.assert_allclose(solver.apply_condensed(u), b,
                                   rtol=1e-10, atol=1e-12)

    def test_dense_limit_guard(self):
        blocks = assemble(build_uniform_square(4), 0, eta=3.0)
        with pytest.raises(ValueError, match="dense limit"):
            condense_cells(blocks, dense_limit=10)


class TestSourceSolve:
    def test_exact_for_quadratic_solution_in_1d(self):
        # With degree 1 the scheme reproduces any quadratic exactly, so the
        # discrete solution of -u'' = 2, u(0) = u(1) = 0 must be the
        # reduction of u(x) = x(1 - x) to round-off.
        mesh = build_uniform_interval(5)
        blocks = assemble(mesh, 1, eta=5.0)
        rhs = assemble_rhs(mesh, 1, lambda p: np.full(p.shape[0], 2.0))
        sol = solve_source(blocks, rhs)

        dm = blocks.dof_map
        def u(p):
            return p[:, 0] * (1.0 - p[:, 0])
        for ci, cell in enumerate(mesh.cells):
            basis = cell_basis_for(cell, 1, mesh.dim)
            rule = cell_rule(mesh.cell_vertex_coords(ci), 6)
            proj = l2_project_cell(u, basis, rule)
            np.testing.assert_allclose(sol.cell_dofs[dm.cell_slice(ci)],
                                       proj.coeffs, rtol=1e-12, atol=1e-13)
        for fid, face in enumerate(mesh.faces):
            s = dm.interface_slice(fid)
            if s is not None:
                x = face.center[0]
                np.testing.assert_allclose(sol.face_dofs[s], [x * (1.0 - x)],
                                           rtol=1e-12)

    def test_2d_convergence_to_manufactured_solution(self):
        lam = 2.0 * np.pi ** 2
        def u(p):
            return np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
        errors = []
        for n in (4, 8):
            mesh = build_triangular_square(n)
            blocks = assemble(mesh, 0, eta=3.0)
            rhs = assemble_rhs(mesh, 0, lambda p: lam * u(p))
            sol = solve_source(blocks, rhs)
            err = 0.0
            for ci, cell in enumerate(mesh.cells):
                mean = sol.cell_dofs[blocks.dof_map.cell_slice(ci)][0]
                rule = cell_rule(mesh.cell_vertex_coords(ci), 8)
                err += rule.integrate(lambda p: (u(p) - mean) ** 2)
            errors.append(np.sqrt(err))
        assert errors[1] < 0.6 * errors[0]


class TestEigenRoutes:
    def test_condensed_matches_full_pencil_1d(self):
        blocks = assemble(build_uniform_interval(6), 1, eta=5.0)
        dense = solve_eigen(blocks, 4)
        pencil = solve_eigen_full_pencil(blocks, 4)
        np.testing.assert_allclose(dense.eigenvalues, pencil.eigenvalues,
                                   rtol=1e-10)

    def test_condensed_matches_full_pencil_2d(self):
        blocks = assemble(build_uniform_square(3), 1, eta=5.0)
        dense = solve_eigen(blocks, 6)
        pencil = solve_eigen_full_pencil(blocks, 6)
        np.testing.assert_allclose(dense.eigenvalues, pencil.eigenvalues,
                                   rtol=1e-10)
        # The lowest mode is simple; its vectors must line up too.
        Bx = blocks.B_KK_sparse() @ pencil.cell_vectors[:, 0]
        overlap = abs(dense.cell_vectors[:, 0] @ Bx)
        assert overlap == pytest.approx(1.0, abs=1e-9)

    def test_invert_and_reduce_strategies_agree(self):
        blocks = assemble(build_triangular_square(3), 1, eta=5.0)
        a = solve_eigen(blocks, 5, strategy="invert")
        b = solve_eigen(blocks, 5, strategy="reduce")
        np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-10)
        B = blocks.B_KK_sparse()
        overlaps = np.abs(np.einsum("im,im->m", a.cell_vectors,
                                    B @ b.cell_vectors))
        assert np.all(overlaps > 1.0 - 1e-8)

    def test_operator_route_matches_dense(self):
        blocks = assemble(build_uniform_square(4), 0, eta=3.0)
        dense = solve_eigen(blocks, 4)
        op = solve_eigen_operator(blocks, 4)
        np.testing.assert_allclose(op.eigenvalues, dense.eigenvalues,
                                   rtol=1e-9)

    def test_unknown_strategy_rejected(self):
        blocks = assemble(build_uniform_interval(4), 0, eta=1.0)
        with pytest.raises(ValueError, match="strategy"):
            solve_eigen(blocks, 2, strategy="qr")


@pytest.fixture(scope="module")
def spectrum():
    mesh = build_uniform_square(3)
    blocks = assemble(mesh, 1, eta=5.0)
    return blocks, solve_eigen(blocks, 6)


class TestSpectrumProperties:
    def test_positive_and_ascending(self, spectrum):
        _, spec = spectrum
        assert np.all(spec.eigenvalues > 0)
        assert np.all(np.diff(spec.eigenvalues) >= 0)

    def test_mass_orthonormal(self, spectrum):
        blocks, spec = spectrum
        G = spec.cell_vectors.T @ (blocks.B_KK_sparse() @ spec.cell_vectors)
        np.testing.assert_allclose(G, np.eye(spec.n_modes), atol=1e-10)

    def test_full_system_residual(self, spectrum):
        # The recovered face values must close the uncondensed system.
        blocks, spec = spectrum
        scale = np.abs(blocks.A_FF.data).max()
        for j in range(spec.n_modes):
            x, y = spec.cell_vectors[:, j], spec.face_vectors[:, j]
            r_cell = (blocks.A_KK_sparse() @ x + blocks.A_KF @ y
                      - spec.eigenvalues[j] * (blocks.B_KK_sparse() @ x))
            r_face = blocks.A_FK @ x + blocks.A_FF @ y
            assert np.abs(r_cell).max() <= 1e-9 * scale * max(1.0, spec.eigenvalues[j])
            assert np.abs(r_face).max() <= 1e-9 * scale

    def test_sign_convention(self, spectrum):
        _, spec = spectrum
        for col in spec.cell_vectors.T:
            assert col[np.argmax(np.abs(col))] > 0


class TestFixedPoint:
    @pytest.mark.parametrize("mesh,degree", [
        (build_uniform_interval(8), 1),
        (build_triangular_square(3), 0),
    ])
    def test_source_solve_reproduces_eigenvector(self, mesh, degree):
        # An eigenpair satisfies the source problem with load lam * u, and
        # the source route eliminates the opposite block.
        blocks = assemble(mesh, degree, eta=2.0 * degree + 3)
        spec = solve_eigen(blocks, 1)
        lam = spec.eigenvalues[0]
        rhs = lam * (blocks.B_KK_sparse() @ spec.cell_vectors[:, 0])
        sol = solve_source(blocks, rhs)
        np.testing.assert_allclose(sol.cell_dofs, spec.cell_vectors[:, 0],
                                   rtol=1e-9, atol=1e-11)
        np.testing.assert_allclose(sol.face_dofs, spec.face_vectors[:, 0],
                                   rtol=1e-9, atol=1e-11)


class TestComputeSpectrum:
    def test_auto_picks_dense_for_small_problems(self):
        spec = compute_spectrum(build_uniform_interval(10), 1, 5.0, 3)
        assert spec.method == "dense-invert"
        assert spec.eigenvalues[0] == pytest.approx(np.pi ** 2, rel=1e-3)

    def test_auto_picks_operator_beyond_limit(self):
        spec = compute_spectrum(build_uniform_square(5), 0, 3.0, 2,
                                dense_limit=10)
        assert spec.method == "operator"
        assert spec.eigenvalues[0] == pytest.approx(2.0 * np.pi ** 2, rel=0.1)

    def test_square_spectrum_shape(self):
        spec = compute_spectrum(build_uniform_square(6), 1, 5.0, 4)
        exact = np.pi ** 2 * np.array([2.0, 5.0, 5.0, 8.0])
        np.testing.assert_allclose(spec.eigenvalues, exact, rtol=2e-2)

    def test_mode_count_validation(self):
        mesh = build_uniform_interval(3)
        with pytest.raises(ValueError, match="mode"):
            compute_spectrum(mesh, 0, 1.0, 0)
        with pytest.raises(ValueError, match="cell unknowns"):
            compute_spectrum(mesh, 0, 1.0, 10)
        with pytest.raises(ValueError, match="method"):
            compute_spectrum(mesh, 0, 1.0, 2, method="magic")

    def test_face_recovery_matches_direct_solve(self):
        blocks = assemble(build_uniform_square(3), 0, eta=3.0)
        spec = solve_eigen(blocks, 2)
        again = recover_face_dofs(blocks, spec.cell_vectors)
        np.testing.assert_allclose(again, spec.face_vectors, atol=1e-14)
