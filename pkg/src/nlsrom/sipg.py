"""Symmetric interior penalty discretisation of the NLS operator.

The semi-discrete system is ``M z_t = J (A z + b(z))`` with ``z = [r; s]``,
block-diagonal ``M``/``A`` and ``J = [[0, I], [-I, 0]]``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dg import DgSpace
from .errors import ConfigurationError
from .quadrature import edge_rule


def _face_traces(space: DgSpace, elements, xq):
    """Basis values and gradients of ``elements`` at physical points ``xq``.

    ``xq`` has shape ``(n_faces, n_g, 2)``.
    """
    nf, ng, _ = xq.shape
    el = np.repeat(elements, ng)
    ref = space.to_reference(el, xq.reshape(-1, 2))
    phi = space.basis.values(ref).reshape(nf, ng, -1)
    grad = space.local_gradients(el, ref).reshape(nf, ng, space.n_local, 2)
    return phi, grad


def assemble_stiffness(space: DgSpace, alpha: float, potential=None, kappa: float = 10.0) -> sp.csr_matrix:
    """SIPG matrix of ``a_h`` (diffusion, potential and penalty terms) on ``space``.

    ``potential`` is ``None`` or a vectorised callable ``V(x, y)`` sampled at
    the element quadrature points.
    """
    if not kappa > 0:
        raise ConfigurationError(f"penalty parameter must be positive, got {kappa}")
    if not alpha > 0:
        raise ConfigurationError(f"diffusion coefficient must be positive, got {alpha}")
    mesh, nloc = space.mesh, space.n_local

    # element terms
    G = space.grad_phi
    W = space.weights
    vol = alpha * np.einsum("kq,kqid,kqjd->kij", W, G, G)
    if potential is not None:
        xq = space.quadrature_points
        V = potential(xq[..., 0], xq[..., 1]) * np.ones(W.shape)
        vol += np.einsum("kq,qi,qj->kij", W * V, space.phi, space.phi)
    dofs = space.dofs(np.arange(space.n_elements))
    rows = [np.repeat(dofs[:, :, None], nloc, axis=2).ravel()]
    cols = [np.repeat(dofs[:, None, :], nloc, axis=1).ravel()]
    vals = [vol.ravel()]

    # face terms: interior edges and periodic pairs share one formula
    faces = mesh.faces
    s, ws = edge_rule(2 * space.degree)
    verts = mesh.element_vertices
    a = verts[faces.plus, (faces.plus_edge + 1) % 3]
    b = verts[faces.plus, (faces.plus_edge + 2) % 3]
    xq = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    wq = faces.length[:, None] * ws[None, :]
    phi_p, grad_p = _face_traces(space, faces.plus, xq)
    phi_m, grad_m = _face_traces(space, faces.minus, xq + faces.offset[:, None, :])
    n = faces.normal[:, None, None, :]
    dn_p = np.sum(grad_p * n, axis=-1)
    dn_m = np.sum(grad_m * n, axis=-1)
    sigma = (kappa * alpha / faces.length)[:, None]

    sides = ((faces.plus, phi_p, dn_p, 1.0), (faces.minus, phi_m, dn_m, -1.0))
    for ea, pa, da, ja in sides:  # test side
        for eb, pb, db, jb in sides:  # trial side
            blk = (-0.5 * alpha * (ja * np.einsum("fg,fgi,fgj->fij", wq, pa, db)
                                   + jb * np.einsum("fg,fgi,fgj->fij", wq, da, pb))
                   + ja * jb * np.einsum("fg,fgi,fgj->fij", wq * sigma, pa, pb))
            da_ = space.dofs(ea)
            db_ = space.dofs(eb)
            rows.append(np.repeat(da_[:, :, None], nloc, axis=2).ravel())
            cols.append(np.repeat(db_[:, None, :], nloc, axis=1).ravel())
            vals.append(blk.ravel())

    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(space.N, space.N)).tocsr()
    A.sum_duplicates()
    # exact symmetry: the face blocks are symmetric up to summation order
    return ((A + A.T) * 0.5).tocsr()


@dataclass
class OperatorSet:
    """Assembled FOM operators and the cubic nonlinearity.

    Implements the semi-discrete system interface used by the integrators:
    ``lhs``, ``structure``, ``stiffness``, ``apply_structure``, ``nonlinear``
    and ``nonlinear_jacobian``.
    """

    space: DgSpace
    alpha: float
    beta: float
    kappa: float = 10.0
    potential: object = None
    M: sp.csr_matrix = field(init=False, repr=False)
    A: sp.csr_matrix = field(init=False, repr=False)
    counters: Counter = field(init=False, repr=False, default_factory=Counter)

    def __post_init__(self):
        sp_ = self.space
        self.M = sp_.block_diagonal(sp_.mass_blocks)
        self.A = assemble_stiffness(sp_, self.alpha, self.potential, self.kappa)
        N = sp_.N
        self.lhs = sp.block_diag([self.M, self.M], format="csr")
        self.stiffness = sp.block_diag([self.A, self.A], format="csr")
        I = sp.identity(N, format="csr")
        self.structure = sp.bmat([[None, I], [-I, None]], format="csr")
        self._beta_w = self.beta * sp_.weights
        self._jac_pattern = self._jacobian_pattern()
        self._chord_cache = {}

    @property
    def N(self) -> int:
        return self.space.N

    @property
    def dim(self) -> int:
        return 2 * self.space.N

    def apply_structure(self, v):
        N = self.N
        out = np.empty_like(v)
        out[:N] = v[N:]
        out[N:] = -v[:N]
        return out

    def linear_part_solver(self, theta_tau: float):
        """Inverse of ``Mb - theta_tau * J Ab`` as a function of a real 2N vector.

        With ``psi = r + i s`` that matrix acts as the complex ``M + i theta_tau A``,
        which is factorised once (half the size of the real system).
        """
        key = float(theta_tau)
        if key not in self._chord_cache:
            if len(self._chord_cache) > 4:
                self._chord_cache.clear()
            C = (self.M + 1j * key * self.A).tocsc()
            self._chord_cache[key] = spla.splu(C, permc_spec="COLAMD", diag_pivot_thresh=0.1)
        lu = self._chord_cache[key]
        N = self.N

        def solve(rhs):
            x = lu.solve(rhs[:N] + 1j * rhs[N:])
            return np.concatenate([x.real, x.imag])

        return solve

    def split(self, z):
        nK, nloc = self.space.n_elements, self.space.n_local
        return z[: self.N].reshape(nK, nloc), z[self.N:].reshape(nK, nloc)

    # nonlinear term ------------------------------------------------------

    def local_nonlinear(self, R, S, elements=None):
        """Element blocks ``(b_r, b_s)`` for local coefficients ``R``, ``S``."""
        phi = self.space.phi
        W = self._beta_w if elements is None else self._beta_w[elements]
        rq, sq = R @ phi.T, S @ phi.T
        rho = W * (rq * rq + sq * sq)
        return (rho * rq) @ phi, (rho * sq) @ phi

    def local_jacobian(self, R, S, elements=None):
        """Element blocks ``d(b_r, b_s)/d(r, s)``, each ``(n_el, n_loc, n_loc)``."""
        phi = self.space.phi
        W = self._beta_w if elements is None else self._beta_w[elements]
        rq, sq = R @ phi.T, S @ phi.T
        r2, s2 = rq * rq, sq * sq
        c = np.stack([W * (3 * r2 + s2), W * (2 * rq * sq), W * (r2 + 3 * s2)])
        blocks = np.einsum("ckq,qi,qj->ckij", c, phi, phi)
        return blocks[0], blocks[1], blocks[2]  # rr, rs (= sr), ss

    def nonlinear(self, z):
        self.counters["full_nonlinear"] += 1
        br, bs = self.local_nonlinear(*self.split(z))
        return np.concatenate([br.ravel(), bs.ravel()])

    def _jacobian_pattern(self):
        N, nloc = self.N, self.space.n_local
        d = self.space.dofs(np.arange(self.space.n_elements))
        r = np.repeat(d[:, :, None], nloc, axis=2).ravel()
        c = np.repeat(d[:, None, :], nloc, axis=1).ravel()
        rows = np.concatenate([r, r, r + N, r + N])
        cols = np.concatenate([c, c + N, c, c + N])
        order = sp.csr_matrix((np.arange(1, len(rows) + 1, dtype=float), (rows, cols)),
                              shape=(2 * N, 2 * N))
        return order, order.data.astype(np.int64) - 1

    def nonlinear_jacobian(self, z) -> sp.csr_matrix:
        self.counters["full_jacobian"] += 1
        rr, rs, ss = self.local_jacobian(*self.split(z))
        vals = np.concatenate([rr.ravel(), rs.ravel(), rs.ravel(), ss.ravel()])
        template, perm = self._jac_pattern
        J = template.copy()
        J.data = vals[perm]
        return J

    def quartic_energy(self, z) -> float:
        R, S = self.split(z)
        phi = self.space.phi
        rho = (R @ phi.T) ** 2 + (S @ phi.T) ** 2
        return 0.25 * float(np.sum(self._beta_w * rho * rho))


def nonlinear_vector(ops: OperatorSet, z) -> np.ndarray:
    return ops.nonlinear(z)


def nonlinear_jacobian(ops: OperatorSet, z) -> sp.csr_matrix:
    return ops.nonlinear_jacobian(z)


def energy_gradient(ops: OperatorSet, z) -> np.ndarray:
    """``A z + b(z)`` with the block-diagonal stiffness."""
    return ops.stiffness @ z + ops.nonlinear(z)
