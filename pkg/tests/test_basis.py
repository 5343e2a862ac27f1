"""Scaled monomial bases: evaluation, Gram matrices, projections."""

import numpy as np
import pytest

from hhoeig.basis import (
    CellBasis,
    FaceBasis,
    l2_project,
    l2_project_face,
    mass_matrix,
    monomial_exponents,
    space_dimension,
    stiffness_gram,
)
from hhoeig.quadrature import cell_rule, face_rule, segment_rule


def test_exponent_ordering_graded_constant_first():
    e1 = monomial_exponents(1, 3)
    assert e1.tolist() == [[0], [1], [2], [3]]
    e2 = monomial_exponents(2, 2)
    assert e2[0].tolist() == [0, 0]
    totals = e2.sum(axis=1)
    assert np.all(np.diff(totals) >= 0)
    assert space_dimension(2, 2) == 6
    assert space_dimension(2, 3) == 10
    assert space_dimension(1, 4) == 5


@pytest.mark.parametrize("dim,degree", [(1, 2), (2, 2), (2, 3)])
def test_eval_grad_matches_finite_differences(dim, degree):
    rng = np.random.default_rng(7)
    basis = CellBasis(dim=dim, degree=degree,
                      center=np.full(dim, 0.3), scale=0.7)
    pts = rng.uniform(0.0, 0.6, size=(5, dim))
    grads = basis.eval_grad(pts)
    eps = 1e-6
    for comp in range(dim):
        shift = np.zeros(dim)
        shift[comp] = eps
        fd = (basis.eval(pts + shift) - basis.eval(pts - shift)) / (2 * eps)
        assert np.allclose(grads[:, :, comp], fd, atol=1e-8)


def test_mass_matrix_spd_and_constant_entry():
    tri = np.array([[0.0, 0.0], [0.5, 0.0], [0.1, 0.4]])
    basis = CellBasis(dim=2, degree=2, center=np.array([0.2, 0.15]), scale=0.55)
    rule = cell_rule(tri, 6)
    M = mass_matrix(basis, rule)
    assert np.allclose(M, M.T)
    assert np.all(np.linalg.eigvalsh(M) > 0)
    # (1, 1) integrates to the triangle area.
    assert M[0, 0] == pytest.approx(0.1, rel=1e-13)


def test_stiffness_gram_kernel_is_constant():
    basis = CellBasis(dim=2, degree=2, center=np.zeros(2), scale=1.0)
    rule = cell_rule(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 6)
    K = stiffness_gram(basis, rule)
    assert np.allclose(K[0, :], 0.0)
    eigs = np.sort(np.linalg.eigvalsh(K))
    assert abs(eigs[0]) < 1e-14
    assert eigs[1] > 1e-8


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_projection_reproduces_polynomials(degree):
    # Projecting a member of the space returns it exactly.
    rng = np.random.default_rng(degree)
    quad = np.array([[0.0, 0.0], [0.8, 0.1], [0.9, 0.9], [-0.1, 0.8]])
    basis = CellBasis(dim=2, degree=degree, center=np.array([0.4, 0.45]), scale=1.3)
    coeffs = rng.standard_normal(basis.size)
    rule = cell_rule(quad, 2 * degree)
    proj = l2_project(lambda p: basis.eval(p) @ coeffs, basis, rule)
    assert np.allclose(proj.coeffs, coeffs, atol=1e-12)
    check = rng.uniform(0.1, 0.7, size=(4, 2))
    assert np.allclose(proj(check), basis.eval(check) @ coeffs)


@pytest.mark.parametrize("degree", [0, 1, 2])
def test_projection_error_decays_at_order_kp1(degree):
    # L2 best-approximation of a transcendental function on a shrinking cell
    # is O(h^{k+1}); halving h must reduce the error accordingly.  (exp has
    # no vanishing derivatives, so no order can accidentally look higher.)
    f = lambda p: np.exp(p[:, 0])
    errors = []
    for h in (0.2, 0.1, 0.05):
        basis = CellBasis(dim=1, degree=degree, center=np.array([0.5 * h]), scale=h)
        rule = segment_rule([0.0], [h], 2 * degree + 8)
        proj = l2_project(f, basis, rule)
        err2 = rule.integrate(lambda p: (f(p) - proj(p)) ** 2)
        errors.append(np.sqrt(err2))
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(rates - (degree + 1.5)) < 0.2)


def test_face_basis_2d_is_scaled_arclength():
    p0, p1 = np.array([0.2, 0.1]), np.array([0.8, 0.9])
    center = 0.5 * (p0 + p1)
    h = np.linalg.norm(p1 - p0)
    basis = FaceBasis(dim=2, degree=2, center=center, scale=h,
                      tangent=(p1 - p0) / h)
    assert basis.size == 3
    vals = basis.eval(np.vstack([p0, center, p1]))
    assert np.allclose(vals[:, 0], 1.0)
    assert vals[0, 1] == pytest.approx(-0.5)
    assert vals[1, 1] == pytest.approx(0.0, abs=1e-15)
    assert vals[2, 2] == pytest.approx(0.25)


def test_face_basis_1d_is_constant_and_projection_is_point_value():
    basis = FaceBasis(dim=1, degree=0, center=np.array([0.3]), scale=1.0, tangent=None)
    assert basis.size == 1
    assert np.allclose(basis.eval(np.array([[0.0], [1.0]])), 1.0)
    rule = face_rule(np.array([[0.3]]), 2)
    proj = l2_project_face(lambda p: p[:, 0] ** 2, basis, rule)
    assert proj.coeffs[0] == pytest.approx(0.09)


def test_poly_coeffs_gradient():
    basis = CellBasis(dim=2, degree=2, center=np.zeros(2), scale=1.0)
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal(basis.size)
    rule = cell_rule(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 4)
    proj = l2_project(lambda p: basis.eval(p) @ coeffs, basis, rule)
    pts = rng.uniform(0.0, 0.5, size=(6, 2))
    eps = 1e-6
    gx = (proj(pts + [eps, 0.0]) - proj(pts - [eps, 0.0])) / (2 * eps)
    gy = (proj(pts + [0.0, eps]) - proj(pts - [0.0, eps])) / (2 * eps)
    assert np.allclose(proj.grad(pts), np.column_stack([gx, gy]), atol=1e-8)
