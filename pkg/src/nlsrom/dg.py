"""Discontinuous piecewise-polynomial space on a triangulation.

Degrees of freedom are ordered element-major, then local node.  The local
basis is the Lagrange basis on the equispaced lattice of the reference
triangle; for ``q = 1`` local node ``k`` is element vertex ``k``.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConfigurationError, PointLocationError
from .mesh import Mesh
from .quadrature import triangle_rule


def lattice_nodes(q: int) -> np.ndarray:
    """Reference nodes of the degree-``q`` Lagrange element, vertices first."""
    if q == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    verts = [(0, 0), (q, 0), (0, q)]
    rest = [(i, j) for j in range(q + 1) for i in range(q + 1 - j) if (i, j) not in verts]
    return np.array(verts + rest, dtype=float) / q


def _monomial_exponents(q: int) -> list[tuple[int, int]]:
    return [(a, d - a) for d in range(q + 1) for a in range(d, -1, -1)]


class LagrangeBasis:
    """Nodal basis of P^q on the reference triangle."""

    def __init__(self, q: int):
        self.degree = q
        self.nodes = lattice_nodes(q)
        self.exponents = _monomial_exponents(q)
        V = self._monomials(self.nodes)
        self.coeffs = np.linalg.inv(V)

    def __len__(self) -> int:
        return len(self.exponents)

    def _monomials(self, pts):
        pts = np.atleast_2d(pts)
        return np.stack([pts[:, 0] ** a * pts[:, 1] ** b for a, b in self.exponents], axis=-1)

    def _monomial_grads(self, pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        gx = [a * x ** max(a - 1, 0) * y ** b if a else np.zeros_like(x) for a, b in self.exponents]
        gy = [b * x ** a * y ** max(b - 1, 0) if b else np.zeros_like(x) for a, b in self.exponents]
        return np.stack([np.stack(gx, -1), np.stack(gy, -1)], axis=-1)

    def values(self, pts) -> np.ndarray:
        """Basis values, shape ``(n_pts, n_local)``."""
        return self._monomials(pts) @ self.coeffs

    def gradients(self, pts) -> np.ndarray:
        """Reference gradients, shape ``(n_pts, n_local, 2)``."""
        g = self._monomial_grads(pts)
        return np.einsum("pmd,mi->pid", g, self.coeffs)


class DgSpace:
    """Broken polynomial space W_h of degree ``q`` on ``mesh``."""

    def __init__(self, mesh: Mesh, q: int = 1, quadrature_degree: int | None = None):
        if q < 1:
            raise ConfigurationError(f"polynomial degree must be >= 1, got {q}")
        self.mesh = mesh
        self.degree = q
        self.basis = LagrangeBasis(q)
        self.n_local = len(self.basis)
        self.n_elements = mesh.n_elements
        self.N = self.n_elements * self.n_local
        # quartic energy density of P^q functions has degree 4q
        self.quadrature = triangle_rule(quadrature_degree or max(4 * q, 2 * q + 2))

        verts = mesh.element_vertices
        self.origin = verts[:, 0, :]
        self.jac = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=-1)
        det = np.linalg.det(self.jac)
        if np.any(det <= 0):
            raise AssemblyError("degenerate or clockwise triangle in mesh")
        self.areas = 0.5 * det
        self.jac_inv = np.linalg.inv(self.jac)

        pts = self.quadrature.points
        self.phi = self.basis.values(pts)  # (nqp, nloc)
        self.weights = self.areas[:, None] * self.quadrature.weights[None, :]  # (nK, nqp)

    @property
    def n_q(self) -> int:
        return self.n_local

    def dofs(self, elements) -> np.ndarray:
        elements = np.asarray(elements)
        return elements[..., None] * self.n_local + np.arange(self.n_local)

    @cached_property
    def quadrature_points(self) -> np.ndarray:
        """Physical quadrature points, shape ``(n_K, n_qp, 2)``."""
        return self.to_physical(np.arange(self.n_elements)[:, None], self.quadrature.points[None])

    @cached_property
    def grad_phi(self) -> np.ndarray:
        """Physical basis gradients at quadrature points, ``(n_K, n_qp, n_loc, 2)``."""
        g = self.basis.gradients(self.quadrature.points)
        return np.einsum("pid,kde->kpie", g, self.jac_inv)

    def to_physical(self, elements, ref_pts) -> np.ndarray:
        return self.origin[elements] + np.einsum("...de,...e->...d", self.jac[elements], ref_pts)

    def to_reference(self, elements, pts) -> np.ndarray:
        return np.einsum("...de,...e->...d", self.jac_inv[elements], pts - self.origin[elements])

    def local_gradients(self, elements, ref_pts) -> np.ndarray:
        """Physical gradients of the local basis of ``elements`` at reference points."""
        g = self.basis.gradients(ref_pts)  # (n, nloc, 2)
        return np.einsum("pid,pde->pie", g, self.jac_inv[elements])

    @cached_property
    def mass_blocks(self) -> np.ndarray:
        """Per-element mass matrices, shape ``(n_K, n_loc, n_loc)``."""
        local = np.einsum("q,qi,qj->ij", self.quadrature.weights, self.phi, self.phi)
        return self.areas[:, None, None] * local[None]

    def block_diagonal(self, blocks) -> sp.csr_matrix:
        n, m, _ = blocks.shape
        rows = np.repeat(np.arange(n * m).reshape(n, m), m, axis=1).reshape(n, m, m)
        cols = np.transpose(rows, (0, 2, 1))
        return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(n * m, n * m))

    def at_quadrature(self, coeffs) -> np.ndarray:
        """Values of the expansion at quadrature points, shape ``(n_K, n_qp)``."""
        c = np.asarray(coeffs).reshape(self.n_elements, self.n_local)
        return c @ self.phi.T

    def integrate(self, f, degree: int = 10) -> float:
        """Integral of a vectorised ``f(x, y)`` over the domain."""
        rule = triangle_rule(degree)
        x = self.to_physical(np.arange(self.n_elements)[:, None], rule.points[None])
        return np.sum(self.areas[:, None] * rule.weights * f(x[..., 0], x[..., 1]))

    def load_vector(self, f, degree: int = 10) -> np.ndarray:
        rule = triangle_rule(degree)
        x = self.to_physical(np.arange(self.n_elements)[:, None], rule.points[None])
        vals = f(x[..., 0], x[..., 1])
        phi = self.basis.values(rule.points)
        return np.einsum("kq,q,qi->ki", self.areas[:, None] * vals, rule.weights, phi).ravel()

    def l2_project(self, f, degree: int = 10) -> np.ndarray:
        """Coefficients of the orthogonal L2 projection of ``f`` (may be complex)."""
        rhs = self.load_vector(f, degree).reshape(self.n_elements, self.n_local)
        return np.linalg.solve(self.mass_blocks, rhs[..., None])[..., 0].ravel()

    def l2_error(self, coeffs, f, degree: int = 10) -> float:
        """L2 norm of ``u_h - f`` computed with a high-order rule."""
        rule = triangle_rule(degree)
        x = self.to_physical(np.arange(self.n_elements)[:, None], rule.points[None])
        c = np.asarray(coeffs).reshape(self.n_elements, self.n_local)
        uh = c @ self.basis.values(rule.points).T
        d = uh - f(x[..., 0], x[..., 1])
        return float(np.sqrt(np.sum(self.areas[:, None] * rule.weights * np.abs(d) ** 2)))

    def evaluate(self, coeffs, point, element: int, tol: float = 1e-12):
        ref = self.to_reference(element, np.asarray(point, dtype=float))
        bary = np.array([1.0 - ref.sum(), ref[0], ref[1]])
        if np.any(bary < -tol):
            raise PointLocationError(f"point {tuple(point)} is outside element {element}")
        c = np.asarray(coeffs).reshape(self.n_elements, self.n_local)[element]
        return self.basis.values(ref)[0] @ c


def assemble_mass_matrix(space: DgSpace) -> sp.csr_matrix:
    return space.block_diagonal(space.mass_blocks)


def l2_project(space: DgSpace, f) -> np.ndarray:
    return space.l2_project(f)


def evaluate_field(space: DgSpace, coeffs, point, element: int):
    return space.evaluate(coeffs, point, element)
