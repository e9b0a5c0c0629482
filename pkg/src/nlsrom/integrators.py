"""Implicit time stepping for ``L z_t = S (K z + n(z))``.

A *system* is any object providing ``dim``, ``lhs`` (matrix or ``None`` for
the identity), ``structure`` (matrix), ``stiffness`` (matrix),
``apply_structure(v)``, ``nonlinear(z)`` and ``nonlinear_jacobian(z)``.  The
FOM :class:`~nlsrom.sipg.OperatorSet` and the POD/DEIM reduced systems all
qualify.  Systems may also offer ``linear_part_solver(theta_tau)``, a
factorisation of ``L - theta_tau * S K`` used by the chord iteration.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConvergenceError

log = logging.getLogger(__name__)

# 2-point Gauss-Legendre on [0, 1]; exact for the cubic AVF integrand
GAUSS_XI = np.array([0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0])
GAUSS_W = np.array([0.5, 0.5])


@dataclass(frozen=True)
class TimeGrid:
    tau: float
    T: float

    def __post_init__(self):
        if not self.tau > 0 or not self.T >= 0:
            raise ConfigurationError(f"need tau > 0 and T >= 0, got tau={self.tau}, T={self.T}")
        n = round(self.T / self.tau)
        if abs(n * self.tau - self.T) > 1e-12 * max(self.T, self.tau):
            raise ConfigurationError(f"T={self.T} is not an integer multiple of tau={self.tau}")

    @property
    def n_steps(self) -> int:
        return round(self.T / self.tau)

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class NewtonSettings:
    """``jacobian`` is ``"exact"`` (refactorised each iteration) or ``"chord"``.

    The chord variant reuses one factorisation of the linear part and falls
    back to exact Newton if it stalls.
    """

    tol: float = 1e-12
    max_iter: int = 50
    damping: float = 1.0
    jacobian: str = "exact"

    def __post_init__(self):
        if not self.tol > 0 or self.max_iter < 1 or not 0 < self.damping <= 1:
            raise ConfigurationError(f"invalid Newton settings {self}")
        if self.jacobian not in ("exact", "chord"):
            raise ConfigurationError(f"unknown Jacobian strategy {self.jacobian!r}")


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def _solve(J, rhs):
    if callable(J):
        return J(rhs)
    if sp.issparse(J):
        return spla.splu(J.tocsc()).solve(rhs)
    return np.linalg.solve(J, rhs)


def newton_solve(residual, jacobian, x0, settings: NewtonSettings = NewtonSettings(),
                 linear_solve=None) -> NewtonResult:
    """Solve ``residual(x) = 0``.

    ``jacobian(x)`` returns a dense or sparse matrix (or a callable applying
    its inverse).  If ``linear_solve`` is given it replaces the Jacobian
    inverse in every iteration.
    """
    x = np.array(x0, dtype=float, copy=True)
    F = residual(x)
    norm = float(np.linalg.norm(F))
    it = 0
    while norm > settings.tol:
        if it >= settings.max_iter:
            raise ConvergenceError(
                f"Newton did not converge in {settings.max_iter} iterations "
                f"(residual {norm:.3e} > {settings.tol:.1e})", norm, it)
        try:
            dx = linear_solve(F) if linear_solve is not None else _solve(jacobian(x), F)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise ConvergenceError(f"linear solve failed: {exc}", norm, it) from exc
        if not np.all(np.isfinite(dx)):
            raise ConvergenceError("non-finite Newton update", norm, it)
        x -= settings.damping * dx
        F = residual(x)
        norm = float(np.linalg.norm(F))
        it += 1
    return NewtonResult(x, it, norm)


def _lhs_times(system, v):
    return v if system.lhs is None else system.lhs @ v


def _lhs_matrix(system):
    if system.lhs is not None:
        return system.lhs
    return np.eye(system.dim)


def _implicit_solve(system, z_n, residual, jacobian, theta_tau, settings):
    chord = None
    if settings.jacobian == "chord" and hasattr(system, "linear_part_solver"):
        chord = system.linear_part_solver(theta_tau)
    if chord is None:
        return newton_solve(residual, jacobian, z_n, settings)
    try:
        return newton_solve(residual, jacobian, z_n, settings, linear_solve=chord)
    except ConvergenceError as exc:
        log.warning("chord iteration failed (%s); retrying with exact Newton", exc)
        return newton_solve(residual, jacobian, z_n,
                            NewtonSettings(settings.tol, settings.max_iter, settings.damping))


def avf_step(system, z_n, tau: float, settings: NewtonSettings = NewtonSettings()):
    """One average-vector-field step; returns ``(z_next, NewtonResult)``.

    Solves ``L (z' - z) = S (tau/2 K (z' + z) + tau * int_0^1 n(xi z' + (1-xi) z) dxi)``
    with the xi-integral by 2-point Gauss, which is exact for cubic ``n``.
    """
    z_n = np.asarray(z_n, dtype=float)
    Kz = system.stiffness @ z_n
    Lz = _lhs_times(system, z_n)

    def residual(z):
        avg = sum(w * system.nonlinear(xi * z + (1 - xi) * z_n) for xi, w in zip(GAUSS_XI, GAUSS_W))
        rhs = 0.5 * tau * (system.stiffness @ z + Kz) + tau * avg
        return _lhs_times(system, z) - Lz - system.apply_structure(rhs)

    def jacobian(z):
        dn = sum(w * xi * system.nonlinear_jacobian(xi * z + (1 - xi) * z_n)
                 for xi, w in zip(GAUSS_XI, GAUSS_W))
        return _lhs_matrix(system) - system.structure @ (0.5 * tau * system.stiffness + tau * dn)

    res = _implicit_solve(system, z_n, residual, jacobian, 0.5 * tau, settings)
    return res.x, res


def backward_euler_step(system, z_n, tau: float, settings: NewtonSettings = NewtonSettings()):
    """Solve ``L (z' - z) = tau S (K z' + n(z'))``; returns ``(z_next, NewtonResult)``."""
    z_n = np.asarray(z_n, dtype=float)
    Lz = _lhs_times(system, z_n)

    def residual(z):
        return _lhs_times(system, z) - Lz - tau * system.apply_structure(
            system.stiffness @ z + system.nonlinear(z))

    def jacobian(z):
        return _lhs_matrix(system) - tau * (system.structure @ (system.stiffness + system.nonlinear_jacobian(z)))

    res = _implicit_solve(system, z_n, residual, jacobian, tau, settings)
    return res.x, res


STEPPERS = {"avf": avf_step, "backward_euler": backward_euler_step}


@dataclass
class SnapshotSink:
    """In-memory collector of ``z_n`` and ``n(z_n)`` every ``stride`` steps."""

    stride: int = 1
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    nonlinear: list = field(default_factory=list)

    def __post_init__(self):
        if self.stride < 1:
            raise ConfigurationError("snapshot stride must be >= 1")

    def __call__(self, n, t, z, bz):
        if n % self.stride == 0:
            self.times.append(t)
            self.states.append(np.array(z))
            self.nonlinear.append(np.array(bz))

    @property
    def state_matrix(self) -> np.ndarray:
        return np.column_stack(self.states)

    @property
    def nonlinear_matrix(self) -> np.ndarray:
        return np.column_stack(self.nonlinear)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else float("nan")


@dataclass
class Trajectory:
    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    final_state: np.ndarray
    newton_iterations: np.ndarray
    wall_time: float = 0.0

    @property
    def mass_drift(self) -> np.ndarray:
        return np.abs(self.mass - self.mass[0])

    @property
    def energy_drift(self) -> np.ndarray:
        return np.abs(self.energy - self.energy[0])


def integrate(ops, z0, grid: TimeGrid, method: str = "avf",
              settings: NewtonSettings = NewtonSettings(), sink=None, callback=None) -> Trajectory:
    """Advance the FOM from ``z0`` over ``grid``.

    ``sink(n, t, z, b(z))`` receives every accepted state; ``callback(n, t, z)``
    is an optional cheap observer.  Mass and energy series are returned.
    """
    import time

    from .diagnostics import discrete_energy, discrete_mass

    if method not in STEPPERS:
        raise ConfigurationError(f"unknown integrator {method!r}")
    step = STEPPERS[method]
    z = np.array(z0, dtype=float)
    times = grid.times
    mass = np.empty(len(times))
    energy = np.empty(len(times))
    iters = np.zeros(len(times), dtype=np.int64)
    elapsed = 0.0
    for n, t in enumerate(times):
        if n > 0:
            t0 = time.perf_counter()
            try:
                z, res = step(ops, z, grid.tau, settings)
            except ConvergenceError as exc:
                exc.step = n
                raise ConvergenceError(f"step {n} (t={t:.6g}) failed: {exc}",
                                       exc.residual_norm, exc.iterations, n) from exc
            elapsed += time.perf_counter() - t0
            iters[n] = res.iterations
        mass[n] = discrete_mass(ops, z)
        energy[n] = discrete_energy(ops, z)
        if sink is not None:
            sink(n, t, z, ops.nonlinear(z))
        if callback is not None:
            callback(n, t, z)
    return Trajectory(times, mass, energy, z, iters, elapsed)
