"""Hyper-reduction of the cubic term: DEIM interpolation and exact DMD."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, RankDeficiencyError, SaturationError, SelectionError
from .lowrank import DEFAULT_SEED, _fix_signs, rsvd

CONDITION_WARN = 1e8


# -- DEIM ---------------------------------------------------------------------

def deim_select(Q, tol: float = 1e-12) -> np.ndarray:
    """Greedy interpolation indices (0-based) for the columns of ``Q``.

    Ties go to the lowest row index.  A column whose interpolation residual
    vanishes (relative ``tol``) raises :class:`SelectionError`.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    n, m = Q.shape
    if m > n:
        raise SelectionError(f"cannot pick {m} indices from {n} rows")
    idx = np.empty(m, dtype=np.int64)
    r = Q[:, 0]
    for j in range(m):
        if j:
            c = np.linalg.solve(Q[idx[:j], :j], Q[idx[:j], j])
            r = Q[:, j] - Q[:, :j] @ c
        a = np.abs(r)
        pj = int(np.argmax(a))
        scale = max(np.linalg.norm(Q[:, j]), np.finfo(float).tiny)
        if not a[pj] > tol * scale:
            raise SelectionError(f"column {j} of the DEIM basis is (numerically) dependent on the previous ones")
        idx[j] = pj
    return idx


@dataclass(frozen=True)
class DeimInterpolant:
    """``b ~ Q (P^T Q)^{-1} P^T b`` with selection ``indices``.

    ``B`` is ``W^T Q (P^T Q)^{-1}`` for the reduction matrix ``W`` passed to
    :func:`build_deim` (``None`` if none was given); ``cond`` is
    ``||(P^T Q)^{-1}||_2``.
    """

    Q: np.ndarray
    indices: np.ndarray
    PQ_inv: np.ndarray
    cond: float
    B: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.indices)


def build_deim(Q, U=None, bound: float = CONDITION_WARN) -> DeimInterpolant:
    Q = np.asarray(Q, dtype=float)
    idx = deim_select(Q)
    PQ_inv = np.linalg.inv(Q[idx])
    cond = float(np.linalg.norm(PQ_inv, 2))
    if cond > bound:
        warnings.warn(f"DEIM interpolant is poorly conditioned: ||(P^T Q)^-1|| = {cond:.3e}", stacklevel=2)
    B = None if U is None else (U.T @ Q) @ PQ_inv
    return DeimInterpolant(Q, idx, PQ_inv, cond, B)


def deim_basis(G, m: int, p: int = 2, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Leading ``m`` left singular vectors of the nonlinearity snapshots ``G``."""
    G = np.asarray(G, dtype=float)
    p = min(p, min(G.shape) - m)
    Q, _, _ = rsvd(G, m, max(p, 0), seed)
    return _fix_signs(Q)[0]


def deim_apply(interp: DeimInterpolant, sampled, lift: bool = True) -> np.ndarray:
    """Interpolate from the sampled entries ``P^T b``.

    Returns the lifted approximant ``Q c`` or, with ``lift=False``, the
    coefficients ``c = (P^T Q)^{-1} P^T b``.
    """
    if interp.cond > CONDITION_WARN:
        warnings.warn(f"DEIM interpolant is poorly conditioned ({interp.cond:.3e})", stacklevel=2)
    c = interp.PQ_inv @ np.asarray(sampled, dtype=float)
    return interp.Q @ c if lift else c


def deim_error_bound(interp: DeimInterpolant, b) -> float:
    """``||(P^T Q)^{-1}|| * ||(I - Q Q^T) b||`` (``Q`` orthonormal)."""
    b = np.asarray(b, dtype=float)
    return interp.cond * float(np.linalg.norm(b - interp.Q @ (interp.Q.T @ b)))


class SampledNonlinearity:
    """Entries ``b(U z^r)[indices]`` computed only on the elements owning them.

    Each degree of freedom belongs to one element, so every sampled entry is
    a single element integral.  ``elements_touched`` records how many
    elements the last call integrated over.
    """

    def __init__(self, ops, U, indices):
        self.ops = ops
        N, nloc = ops.N, ops.space.n_local
        indices = np.asarray(indices, dtype=np.int64)
        self.indices = indices
        comp = indices // N
        local = indices % N
        el = local // nloc
        self.elements, inv = np.unique(el, return_inverse=True)
        self._pos = inv  # position of each index's element in self.elements
        self._comp = comp
        self._loc = local % nloc
        dofs = ops.space.dofs(self.elements)  # (n_el, nloc)
        self.U_r = U[dofs]  # (n_el, nloc, k)
        self.U_s = U[dofs + N]
        self.elements_touched = 0
        self.calls = 0

    def local_state(self, zr):
        return self.U_r @ zr, self.U_s @ zr

    def __call__(self, zr) -> np.ndarray:
        R, S = self.local_state(zr)
        br, bs = self.ops.local_nonlinear(R, S, self.elements)
        self.elements_touched = len(self.elements)
        self.calls += 1
        both = np.stack([br, bs])  # (2, n_el, nloc)
        return both[self._comp, self._pos, self._loc]

    def jacobian(self, zr) -> np.ndarray:
        """``d (P^T b(U z^r)) / d z^r``, shape ``(m, k)``."""
        R, S = self.local_state(zr)
        rr, rs, ss = self.ops.local_jacobian(R, S, self.elements)
        # rows of the element Jacobian in (r, s) blocks, then chain rule through U
        dr = np.einsum("eij,ejk->eik", rr, self.U_r) + np.einsum("eij,ejk->eik", rs, self.U_s)
        ds = np.einsum("eij,ejk->eik", rs, self.U_r) + np.einsum("eij,ejk->eik", ss, self.U_s)
        both = np.stack([dr, ds])
        return both[self._comp, self._pos, self._loc]


def deim_sampled_nonlinearity(ops, interp: DeimInterpolant, zr, U) -> np.ndarray:
    return SampledNonlinearity(ops, U, interp.indices)(zr)


# -- DMD ----------------------------------------------------------------------

@dataclass(frozen=True)
class DmdModel:
    """``b(t) ~ Re(sum_j amplitudes_j modes_j exp(omega_j t))``."""

    modes: np.ndarray  # (n, m) complex
    eigenvalues: np.ndarray
    omega: np.ndarray
    amplitudes: np.ndarray
    dt: float
    sigma: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.omega)


def numerical_rank(sigma, shape, rcond: float | None = None) -> int:
    s = np.asarray(sigma)
    if s.size == 0 or s[0] == 0:
        return 0
    tol = (max(shape) * np.finfo(float).eps if rcond is None else rcond) * s[0]
    return int(np.sum(s > tol))


def dmd_fit(G, Gp, m: int, dt: float, b0=None, p: int = 2, seed: int = DEFAULT_SEED,
            rcond: float | None = None) -> DmdModel:
    """Exact DMD of the pair ``Gp ~ A G`` truncated to rank ``m``.

    ``omega = log(lambda) / dt`` on the principal branch and the amplitudes
    solve ``modes @ a = b0`` in the least-squares sense (``b0`` defaults to
    the first column of ``G``).
    """
    G = np.asarray(G, dtype=float)
    Gp = np.asarray(Gp, dtype=float)
    if G.ndim == 1:
        G, Gp = G[None, :], Gp[None, :]
    if G.shape != Gp.shape:
        raise ConfigurationError(f"snapshot pair shapes differ: {G.shape} vs {Gp.shape}")
    if not 1 <= m <= min(G.shape):
        raise ConfigurationError(f"DMD rank {m} outside [1, {min(G.shape)}]")
    if not dt > 0:
        raise ConfigurationError(f"snapshot spacing must be positive, got {dt}")
    U, s, Vt = rsvd(G, m, min(p, min(G.shape) - m), seed)
    r = numerical_rank(s, G.shape, rcond)
    if r < m:
        raise RankDeficiencyError(
            f"snapshot matrix has numerical rank {r} < m = {m}; use at most {r} DMD modes")
    GV = Gp @ (Vt.T / s)
    At = U.T @ GV
    lam, W = np.linalg.eig(At)
    modes = GV @ W
    with np.errstate(divide="ignore"):
        omega = np.log(lam.astype(complex)) / dt
    b0 = G[:, 0] if b0 is None else np.asarray(b0, dtype=float)
    amps = np.linalg.lstsq(modes, b0.astype(complex), rcond=None)[0]
    return DmdModel(modes, lam, omega, amps, float(dt), s)


def _exponentials(model: DmdModel, t: float):
    re = model.omega.real * t
    if np.any(re > 700.0) or not np.all(np.isfinite(model.omega)):
        raise SaturationError(f"DMD mode growth overflows at t = {t} (max Re(omega) t = {re.max():.1f})")
    return np.exp(model.omega * t)


def dmd_coefficients(model: DmdModel, t: float) -> np.ndarray:
    return model.amplitudes * _exponentials(model, t)


def dmd_predict(model: DmdModel, t: float) -> np.ndarray:
    """Real part of ``modes @ (amplitudes * exp(omega t))``."""
    out = model.modes @ dmd_coefficients(model, t)
    if not np.all(np.isfinite(out)):
        raise SaturationError(f"DMD prediction is not finite at t = {t}")
    return out.real


def step_integral(omega, t0: float, tau: float, small: float = 1e-14) -> np.ndarray:
    """``int_{t0}^{t0+tau} exp(omega t) dt`` per entry, with the ``omega -> 0`` limit."""
    omega = np.asarray(omega, dtype=complex)
    e0 = np.exp(omega * t0)
    tiny = np.abs(omega) < small
    safe = np.where(tiny, 1.0, omega)
    return np.where(tiny, tau * e0, e0 * np.expm1(safe * tau) / safe)


def conjugate_paired(values, tol: float = 1e-8) -> bool:
    """Whether the multiset of complex ``values`` is closed under conjugation."""
    v = np.asarray(values, dtype=complex)
    scale = max(np.abs(v).max(initial=0.0), 1.0)
    used = np.zeros(len(v), dtype=bool)
    for i, x in enumerate(v):
        if used[i]:
            continue
        d = np.abs(v - np.conj(x))
        d[used] = np.inf
        if abs(x.imag) <= tol * scale:
            used[i] = True
            continue
        d[i] = np.inf
        j = int(np.argmin(d))
        if d[j] > tol * scale:
            return False
        used[i] = used[j] = True
    return True
