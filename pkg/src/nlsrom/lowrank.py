"""Randomised SVD and M-orthonormal POD bases."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DegenerateInputError

DEFAULT_SEED = 20180101


def rsvd(Y, k: int, p: int = 2, seed: int = DEFAULT_SEED):
    """Rank-``k`` SVD of ``Y`` from a Gaussian sketch with ``p`` extra columns.

    Returns ``(U, s, Vt)`` with ``U`` of shape ``(m, k)``.  The sketch is drawn
    from ``numpy.random.default_rng(seed)``.
    """
    Y = np.asarray(Y, dtype=float)
    m, n = Y.shape
    if not 1 <= k <= min(m, n):
        raise ConfigurationError(f"target rank {k} outside [1, {min(m, n)}]")
    if p < 0 or k + p > min(m, n):
        raise ConfigurationError(f"k + p = {k + p} exceeds min(shape) = {min(m, n)}")
    rng = np.random.default_rng(seed)
    Omega = rng.standard_normal((n, k + p))
    Q, _ = np.linalg.qr(Y @ Omega)
    B = Q.T @ Y
    Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
    return Q @ Ub[:, :k], s[:k], Vt[:k]


def _fix_signs(U, Vt=None):
    idx = np.argmax(np.abs(U), axis=0)
    sign = np.sign(U[idx, np.arange(U.shape[1])])
    sign[sign == 0] = 1.0
    U = U * sign
    if Vt is not None:
        Vt = Vt * sign[:, None]
    return U, Vt


@dataclass(frozen=True)
class SnapshotSet:
    """Column snapshots with uniform spacing ``dt``; ``tag`` is ``"state"`` or ``"nonlinearity"``."""

    matrix: np.ndarray
    dt: float
    tag: str = "state"

    def __post_init__(self):
        X = np.asarray(self.matrix, dtype=float)
        if X.ndim != 2 or X.shape[1] < 2:
            raise ConfigurationError("a snapshot set needs at least two columns")
        if not np.all(np.isfinite(X)):
            raise ConfigurationError("snapshots contain non-finite values")
        if not self.dt > 0:
            raise ConfigurationError(f"snapshot spacing must be positive, got {self.dt}")
        if self.tag not in ("state", "nonlinearity"):
            raise ConfigurationError(f"unknown snapshot tag {self.tag!r}")
        object.__setattr__(self, "matrix", X)

    @property
    def shape(self):
        return self.matrix.shape

    def shifted_pair(self):
        """``(G, G')``: all but the last column and all but the first."""
        return self.matrix[:, :-1], self.matrix[:, 1:]


class MassFactor:
    """Cholesky factor ``L`` of a block-diagonal SPD weight ``M = L L^T``.

    ``M`` may be ``None`` (identity), a sparse/dense matrix, or per-element
    blocks of shape ``(n_blocks, b, b)``; for the two-component state the
    blocks are repeated.
    """

    def __init__(self, M=None):
        self.blocks = None
        self.dense = None
        if M is None:
            return
        if isinstance(M, np.ndarray) and M.ndim == 3:
            self.blocks = np.linalg.cholesky(M)
            return
        C = sp.coo_matrix(M)
        b = _block_size(C)
        if b is None:
            self.dense = np.linalg.cholesky(C.toarray())
            return
        n = C.shape[0]
        blocks = np.zeros((n // b, b, b))
        np.add.at(blocks, (C.row // b, C.row % b, C.col % b), C.data)
        self.blocks = np.linalg.cholesky(blocks)

    def _apply(self, X, fn):
        if self.blocks is None and self.dense is None:
            return np.array(X, dtype=float)
        X = np.asarray(X, dtype=float)
        vec = X.ndim == 1
        X2 = X[:, None] if vec else X
        if self.dense is not None:
            out = fn(self.dense, X2)
        else:
            nb, b, _ = self.blocks.shape
            rows = X2.shape[0]
            reps = rows // (nb * b)
            if reps * nb * b != rows:
                raise ConfigurationError(f"weight of size {nb * b} does not divide state size {rows}")
            L = np.tile(self.blocks, (reps, 1, 1))
            out = fn(L, X2.reshape(reps * nb, b, -1)).reshape(rows, -1)
        return out[:, 0] if vec else out

    def lt(self, X):
        """``L^T X``."""
        return self._apply(X, lambda L, Y: np.swapaxes(L, -1, -2) @ Y)

    def lt_inv(self, X):
        """``L^{-T} X``."""
        def solve(L, Y):
            return np.linalg.solve(np.swapaxes(L, -1, -2), Y)
        return self._apply(X, solve)


def _block_size(C):
    """Smallest block size of a block-diagonal sparse matrix, or ``None``."""
    n = C.shape[0]
    for b in range(1, min(n, 64) + 1):
        if n % b == 0 and np.all(C.row // b == C.col // b):
            return b
    return None


@dataclass(frozen=True)
class PodBasis:
    U: np.ndarray  # (2N, k), U^T W U = I
    sigma: np.ndarray  # all computed singular values (length >= k)
    k: int
    weight: object = None
    seed: int = DEFAULT_SEED
    total: float | None = None  # squared Frobenius norm of L^T Z

    @property
    def modes(self) -> np.ndarray:
        return self.U

    def energy(self, k: int | None = None) -> float:
        return energy_criterion(self.sigma, self.k if k is None else k, total=self.total)


def energy_criterion(sigma, k: int, total: float | None = None) -> float:
    """Fraction ``sum_{i<=k} s_i^2 / sum_i s_i^2``.

    ``total`` overrides the denominator (the squared Frobenius norm of the
    snapshot matrix, when only leading values were computed).
    """
    s = np.asarray(sigma, dtype=float)
    if not 1 <= k <= len(s):
        raise ConfigurationError(f"k = {k} outside [1, {len(s)}]")
    if np.any(s < 0) or np.any(np.diff(s) > 1e-12 * max(s[0], 1.0)):
        raise ConfigurationError("singular values must be non-negative and non-increasing")
    denom = float(np.sum(s * s)) if total is None else float(total)
    if denom == 0.0:
        raise DegenerateInputError("energy criterion undefined for all-zero singular values")
    return min(float(np.sum(s[:k] ** 2)) / denom, 1.0)


def select_rank(sigma, threshold: float, total: float | None = None) -> int:
    """Smallest ``k`` with ``energy_criterion(sigma, k) > threshold``."""
    s = np.asarray(sigma, dtype=float)
    denom = float(np.sum(s * s)) if total is None else float(total)
    if denom == 0.0:
        raise DegenerateInputError("energy criterion undefined for all-zero singular values")
    eps = np.cumsum(s * s) / denom
    hits = np.nonzero(eps > threshold)[0]
    return int(hits[0]) + 1 if len(hits) else len(s)


def pod_basis(snapshots, M=None, rank: int | None = None, threshold: float | None = None,
              p: int = 2, seed: int = DEFAULT_SEED, max_rank: int = 100) -> PodBasis:
    """M-orthonormal POD modes of the snapshot columns.

    With ``M = L L^T`` the modes are ``L^{-T}`` times the left singular vectors
    of ``L^T Z``.  ``threshold`` picks the smallest ``k`` whose energy fraction
    exceeds it among the leading ``max_rank`` values; a ``rank`` given as
    well caps that choice.
    """
    Z = snapshots.matrix if isinstance(snapshots, SnapshotSet) else np.asarray(snapshots, dtype=float)
    if rank is None and threshold is None:
        raise ConfigurationError("give a rank, a threshold, or both")
    if threshold is not None and not 0 < threshold < 1:
        raise ConfigurationError(f"energy threshold must lie in (0, 1), got {threshold}")
    if not np.any(Z):
        raise DegenerateInputError("snapshot matrix is identically zero")
    factor = M if isinstance(M, MassFactor) else MassFactor(M)
    Y = factor.lt(Z)
    total = float(np.sum(Y * Y))
    nmax = min(Y.shape)
    if rank is not None and not 1 <= rank <= nmax:
        raise ConfigurationError(f"rank {rank} outside [1, {nmax}]")
    want = rank if threshold is None else max(min(max_rank, nmax), rank or 1)
    p_eff = min(p, nmax - want)
    if p_eff < p and want + p > nmax and threshold is None:
        raise ConfigurationError(f"k + p = {want + p} exceeds min(shape) = {nmax}")
    Ut, s, _ = rsvd(Y, want, p_eff, seed)
    k = rank if threshold is None else select_rank(s, threshold, total)
    if threshold is not None and rank is not None:
        k = min(k, rank)
    U, _ = _fix_signs(factor.lt_inv(Ut[:, :k]))
    return PodBasis(U, s, k, M, seed, total)
