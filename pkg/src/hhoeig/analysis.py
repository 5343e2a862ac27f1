"""Reference spectra, error metrics, and convergence-order bookkeeping.

Four reference domains are supported: the unit interval, the unit square,
an L-shaped domain of side 2 with a square quarter removed, and the unit
disk.  Interval and square spectra are closed-form sine products.  The disk
spectrum needs zeros of Bessel functions, computed here by Newton iteration
on an ascending series evaluated in extended precision (the alternating
series cancels catastrophically in double precision once the argument grows).
For the L-shape only the first eigenvalue (a known benchmark number) and the
third (an exact sine product that happens to satisfy the boundary condition)
have references; other modes carry a no-reference marker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np

from .assembly import assemble, assemble_rhs, gather_cell_vector
from .basis import cell_basis_for
from .local import reconstruction_operator
from .mesh import PolytopalMesh
from .quadrature import cell_rule
from .solver import SourceSolution, Spectrum, compute_spectrum, solve_source

_SERIES_LIMIT = 12.0


def bessel_j(n: int, x) -> np.ndarray:
    """Bessel function of the first kind by its ascending series.

    Vectorized and fast, but limited to ``|x| <= 12`` where the alternating
    series still leaves roughly twelve correct digits in double precision.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(np.abs(xs) > _SERIES_LIMIT):
        raise ValueError(f"series evaluation is limited to |x| <= {_SERIES_LIMIT}")
    half = 0.5 * xs
    term = half ** n / float(math.factorial(n))
    total = np.array(term, dtype=float, copy=True)
    minus_sq = -(half * half)
    for s in range(1, 48):
        term = term * minus_sq / (s * (s + n))
        total = total + term
    return total


def bessel_j_derivative(n: int, x) -> np.ndarray:
    if n == 0:
        return -bessel_j(1, x)
    return 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))


def _bessel_j_precise(n: int, x: float) -> float:
    """Series evaluation in 50-digit arithmetic; no argument cap."""
    with localcontext() as ctx:
        ctx.prec = 50
        half = Decimal(repr(x)) / 2
        term = half ** n / Decimal(math.factorial(n))
        total = term
        minus_sq = -(half * half)
        s = 1
        while s < 400:
            term = term * minus_sq / (Decimal(s) * Decimal(s + n))
            total += term
            if abs(term) < Decimal("1e-45"):
                break
            s += 1
        return float(total)


def _bessel_deriv_precise(n: int, x: float) -> float:
    if n == 0:
        return -_bessel_j_precise(1, x)
    return 0.5 * (_bessel_j_precise(n - 1, x) - _bessel_j_precise(n + 1, x))


def bessel_zero(n: int, m: int) -> float:
    """The m-th positive zero of the order-n Bessel function, to 1e-12.

    Newton iteration started from the McMahon asymptotic estimate; the
    estimate lands well inside the right basin for every order this package
    asks for.
    """
    if n < 0 or m < 1:
        raise ValueError("order must be >= 0 and index >= 1")
    beta = (m + 0.5 * n - 0.25) * math.pi
    x = beta - (4 * n * n - 1) / (8.0 * beta)
    for _ in range(60):
        f = _bessel_j_precise(n, x)
        df = _bessel_deriv_precise(n, x)
        step = f / df
        x -= step
        if abs(step) <= 1e-14 * abs(x):
            break
    else:
        raise ArithmeticError(f"zero search for order {n}, index {m} stalled")
    if abs(_bessel_j_precise(n, x)) > 1e-11:
        raise ArithmeticError(f"zero search for order {n}, index {m} diverged")
    return float(x)


# ---------------------------------------------------------------------------
# Reference eigenfunctions.  Each is callable on an (n, dim) point array and
# exposes a gradient; all are L2-normalized on their domain.

@dataclass(frozen=True)
class _Sine1D:
    j: int

    def __call__(self, points):
        return math.sqrt(2.0) * np.sin(self.j * np.pi * points[:, 0])

    def grad(self, points):
        c = math.sqrt(2.0) * self.j * np.pi
        return (c * np.cos(self.j * np.pi * points[:, 0]))[:, None]


@dataclass(frozen=True)
class _SineProduct2D:
    a: int
    b: int
    amplitude: float

    def __call__(self, points):
        return (self.amplitude * np.sin(self.a * np.pi * points[:, 0])
                * np.sin(self.b * np.pi * points[:, 1]))

    def grad(self, points):
        sx = np.sin(self.a * np.pi * points[:, 0])
        cx = np.cos(self.a * np.pi * points[:, 0])
        sy = np.sin(self.b * np.pi * points[:, 1])
        cy = np.cos(self.b * np.pi * points[:, 1])
        out = np.empty((points.shape[0], 2))
        out[:, 0] = self.amplitude * self.a * np.pi * cx * sy
        out[:, 1] = self.amplitude * self.b * np.pi * sx * cy
        return out


@dataclass(frozen=True)
class _DiskMode:
    order: int
    zero: float
    norm: float
    angular: str  # "radial", "cos", or "sin"

    def _angular(self, theta):
        if self.angular == "radial":
            return np.ones_like(theta), np.zeros_like(theta)
        if self.angular == "cos":
            return (np.cos(self.order * theta),
                    -self.order * np.sin(self.order * theta))
        return (np.sin(self.order * theta),
                self.order * np.cos(self.order * theta))

    def __call__(self, points):
        x, y = points[:, 0], points[:, 1]
        r = np.hypot(x, y)
        ang, _ = self._angular(np.arctan2(y, x))
        return self.norm * bessel_j(self.order, self.zero * r) * ang

    def grad(self, points):
        x, y = points[:, 0], points[:, 1]
        r = np.hypot(x, y)
        rs = np.maximum(r, 1e-30)
        theta = np.arctan2(y, x)
        ang, dang = self._angular(theta)
        radial = bessel_j(self.order, self.zero * r)
        dradial = self.zero * bessel_j_derivative(self.order, self.zero * r)
        out = np.empty((points.shape[0], 2))
        out[:, 0] = self.norm * (dradial * (x / rs) * ang
                                 - radial * dang * y / (rs * rs))
        out[:, 1] = self.norm * (dradial * (y / rs) * ang
                                 + radial * dang * x / (rs * rs))
        return out


@dataclass(frozen=True)
class ExactEigenpair:
    """Reference eigenvalue with an evaluable eigenfunction when one exists.

    ``value`` is None for modes with no trusted reference; ``eigenfunction``
    may be None even when the value is known (L-shape mode 1, high disk modes
    whose Bessel argument exceeds the fast series range).
    """

    value: float | None
    eigenfunction: object | None
    multiplicity: int = 1


_LSHAPE_FIRST = 9.6397238440219


def exact_spectrum(domain: str, count: int) -> list[ExactEigenpair]:
    """The first ``count`` reference eigenpairs of a domain, ascending."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if domain == "interval":
        return [ExactEigenpair((j * math.pi) ** 2, _Sine1D(j))
                for j in range(1, count + 1)]
    if domain == "square":
        return _square_spectrum(count)
    if domain == "lshape":
        known = {
            0: ExactEigenpair(_LSHAPE_FIRST, None),
            2: ExactEigenpair(2.0 * math.pi ** 2,
                              _SineProduct2D(1, 1, 2.0 / math.sqrt(3.0))),
        }
        return [known.get(j, ExactEigenpair(None, None)) for j in range(count)]
    if domain == "disk":
        return _disk_spectrum(count)
    raise ValueError(f"unknown reference domain {domain!r}")


def _square_spectrum(count: int) -> list[ExactEigenpair]:
    top = count + 1
    cand = sorted((a * a + b * b, a, b)
                  for a in range(1, top + 1) for b in range(1, top + 1))
    mult = {}
    for s, _, _ in cand:
        mult[s] = mult.get(s, 0) + 1
    return [ExactEigenpair(math.pi ** 2 * s, _SineProduct2D(a, b, 2.0), mult[s])
            for s, a, b in cand[:count]]


def _disk_spectrum(count: int) -> list[ExactEigenpair]:
    zeros = []
    top = count + 1
    for n in range(0, top):
        for m in range(1, top):
            zeros.append((bessel_zero(n, m), n))
    zeros.sort()
    out: list[ExactEigenpair] = []
    for z, n in zeros:
        if len(out) >= count:
            break
        value = z * z
        if n == 0:
            fn = None
            if z <= _SERIES_LIMIT:
                fn = _DiskMode(0, z, 1.0 / (math.sqrt(math.pi)
                                            * abs(float(bessel_j(1, z)))), "radial")
            out.append(ExactEigenpair(value, fn))
        else:
            fns = [None, None]
            if z <= _SERIES_LIMIT:
                scale = math.sqrt(2.0 / math.pi) / abs(float(bessel_j_derivative(n, z)))
                fns = [_DiskMode(n, z, scale, "cos"), _DiskMode(n, z, scale, "sin")]
            out.append(ExactEigenpair(value, fns[0], 2))
            out.append(ExactEigenpair(value, fns[1], 2))
    return out[:count]


def reference_domain(family: str) -> str | None:
    """Reference domain for a mesh family, or None when no exact spectrum exists."""
    return {"interval": "interval", "square": "square", "tri-square": "square",
            "hex": "square", "lshape": "lshape", "disk": "disk"}.get(family)


# ---------------------------------------------------------------------------
# Error metrics.

def match_and_errors(spectrum: Spectrum, exact_pairs: list[ExactEigenpair]):
    """Relative eigenvalue errors after sorted-order pairing; None without reference."""
    out = []
    for j, lam in enumerate(spectrum.eigenvalues):
        ref = exact_pairs[j].value if j < len(exact_pairs) else None
        out.append(None if ref is None else abs(lam - ref) / ref)
    return out


def _reconstruction_matrices(mesh: PolytopalMesh, degree: int) -> list:
    return [reconstruction_operator(mesh, ci, degree)
            for ci in range(mesh.n_cells)]


def _h1_error_core(dof_map, cell_values, face_values, grad_fn, quad_order,
                   recons) -> float:
    mesh = dof_map.mesh
    per_cell = np.empty(mesh.n_cells)
    for ci, cell in enumerate(mesh.cells):
        rule = cell_rule(mesh.cell_vertex_coords(ci), quad_order)
        coeffs = recons[ci] @ gather_cell_vector(dof_map, ci, cell_values,
                                                 face_values)
        rbasis = cell_basis_for(cell, dof_map.degree + 1, mesh.dim)
        gp = np.einsum("pbd,b->pd", rbasis.eval_grad(rule.points), coeffs)
        diff = grad_fn(rule.points) - gp
        per_cell[ci] = rule.weights @ np.einsum("pd,pd->p", diff, diff)
    return float(np.sqrt(np.sum(per_cell)))


def h1_eigenfunction_error(spec: Spectrum, exact_pairs: list[ExactEigenpair],
                           mode: int, quad_order: int | None = None,
                           recons=None) -> float | None:
    """Broken H1 distance between one discrete mode and the exact eigenspace.

    The discrete eigenfunction is the cellwise degree-(k+1) reconstruction of
    the eigenvector, normalized so its cell field has unit L2 norm.  It is
    compared against the L2 projection of that cell field onto the span of
    the reference functions sharing the eigenvalue, which fixes both the
    sign and the scale of the comparison; for a simple eigenvalue the
    projection is a single multiple of the reference.  Returns None when no
    reference function exists.
    """
    if mode >= len(exact_pairs):
        return None
    target = exact_pairs[mode]
    if target.value is None:
        return None
    cluster = [q.eigenfunction for q in exact_pairs
               if q.value is not None and q.eigenfunction is not None
               and abs(q.value - target.value) <= 1e-8 * target.value]
    if not cluster:
        return None

    dm = spec.dof_map
    mesh = dm.mesh
    qo = quad_order if quad_order is not None else 2 * dm.degree + 6
    x = spec.cell_vectors[:, mode]
    y = spec.face_vectors[:, mode]

    coeffs = np.zeros(len(cluster))
    for ci, cell in enumerate(mesh.cells):
        rule = cell_rule(mesh.cell_vertex_coords(ci), qo)
        basis = cell_basis_for(cell, dm.degree, mesh.dim)
        vh = basis.eval(rule.points) @ x[dm.cell_slice(ci)]
        for i, fn in enumerate(cluster):
            coeffs[i] += rule.weights @ (fn(rule.points) * vh)
    if np.linalg.norm(coeffs) < 1e-6:
        raise ArithmeticError(
            f"mode {mode} does not align with its reference eigenspace")

    if recons is None:
        recons = _reconstruction_matrices(mesh, dm.degree)

    def grad_fn(points):
        out = coeffs[0] * cluster[0].grad(points)
        for c, fn in zip(coeffs[1:], cluster[1:]):
            out += c * fn.grad(points)
        return out

    return _h1_error_core(dm, x, y, grad_fn, qo, recons)


def h1_source_error(sol: SourceSolution, exact, quad_order: int | None = None,
                    recons=None) -> float:
    """Broken H1 distance between a source solve's reconstruction and ``exact``."""
    dm = sol.dof_map
    qo = quad_order if quad_order is not None else 2 * dm.degree + 6
    if recons is None:
        recons = _reconstruction_matrices(dm.mesh, dm.degree)
    return _h1_error_core(dm, sol.cell_dofs, sol.face_dofs, exact.grad, qo,
                          recons)


def observed_orders(errors, h_values=None):
    """Convergence orders between consecutive levels.

    ``None`` marks the first level and any pair touching a missing or
    sub-machine (< 1e-13) error, where the ratio measures noise.  With no
    ``h_values`` the mesh size is assumed to halve per level.
    """
    orders = [None]
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 is None or e1 is None or e0 < 1e-13 or e1 < 1e-13:
            orders.append(None)
            continue
        ratio = 2.0 if h_values is None else h_values[i - 1] / h_values[i]
        orders.append(math.log(e0 / e1) / math.log(ratio))
    return orders


# ---------------------------------------------------------------------------
# Study drivers.

@dataclass
class StudyRow:
    level: int
    h: float
    degree: int
    eta: float
    mode: int | None
    lambda_h: float | None
    lambda_exact: float | None
    rel_err: float | None
    order: float | None


@dataclass
class ConvergenceStudy:
    family: str
    degree: int
    eta: float
    rows: list


def eigen_study(family: str, meshes, degree: int, eta: float, n_modes: int,
                method: str = "auto", dense_limit: int = 2400) -> ConvergenceStudy:
    """Eigenvalue convergence over a sequence of (level, mesh) pairs."""
    domain = reference_domain(family)
    exact = exact_spectrum(domain, n_modes) if domain else []
    levels = []
    for level, mesh in meshes:
        spec = compute_spectrum(mesh, degree, eta, n_modes, method=method,
                                dense_limit=dense_limit)
        errs = match_and_errors(spec, exact) if exact else [None] * n_modes
        levels.append((level, mesh.max_diameter, spec, errs))

    hs = [h for _, h, _, _ in levels]
    orders = {}
    for j in range(n_modes):
        orders[j] = observed_orders([lv[3][j] for lv in levels], hs)

    rows = []
    for i, (level, h, spec, errs) in enumerate(levels):
        for j in range(n_modes):
            ref = exact[j].value if j < len(exact) else None
            rows.append(StudyRow(level=level, h=h, degree=degree, eta=eta,
                                 mode=j + 1, lambda_h=float(spec.eigenvalues[j]),
                                 lambda_exact=ref, rel_err=errs[j],
                                 order=orders[j][i]))
    return ConvergenceStudy(family=family, degree=degree, eta=eta, rows=rows)


def manufactured_solution(family: str):
    """An exact Dirichlet solution and its eigenvalue-factor load for a family.

    Every supported family uses a first-mode sine product, whose load is just
    the eigenvalue times the solution.  The disk has no polynomial-boundary
    analogue here and is rejected.
    """
    if family == "interval":
        return _Sine1D(1), math.pi ** 2
    if family in ("square", "tri-square", "hex"):
        return _SineProduct2D(1, 1, 2.0), 2.0 * math.pi ** 2
    if family == "lshape":
        return _SineProduct2D(1, 1, 2.0 / math.sqrt(3.0)), 2.0 * math.pi ** 2
    raise ValueError(f"no manufactured solution for the {family!r} family")


def source_study(family: str, meshes, degree: int, eta: float,
                 quad_order: int | None = None) -> ConvergenceStudy:
    """Source-problem H1 convergence with the manufactured solution."""
    exact, lam = manufactured_solution(family)

    def load(points):
        return lam * exact(points)

    per_level = []
    for level, mesh in meshes:
        blocks = assemble(mesh, degree, eta)
        rhs = assemble_rhs(mesh, degree, load, quad_order=quad_order)
        sol = solve_source(blocks, rhs)
        err = h1_source_error(sol, exact, quad_order=quad_order)
        per_level.append((level, mesh.max_diameter, err))

    orders = observed_orders([e for _, _, e in per_level],
                             [h for _, h, _ in per_level])
    rows = [StudyRow(level=level, h=h, degree=degree, eta=eta, mode=None,
                     lambda_h=None, lambda_exact=None, rel_err=err,
                     order=orders[i])
            for i, (level, h, err) in enumerate(per_level)]
    return ConvergenceStudy(family=family, degree=degree, eta=eta, rows=rows)
