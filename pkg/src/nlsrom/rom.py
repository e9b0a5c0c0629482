"""Energy-preserving reduced systems and their time stepping.

The corrected reduced system is ``z_t = J_r (U^T A U z + U^T b(U z))`` with the
skew matrix ``J_r = U^T J M U``; it is Hamiltonian for any ``M``-orthonormal
``U``.  The plain Galerkin projection ``z_t = U^T J (A U z + b(U z))`` is kept
behind ``corrected=False`` for comparison.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError
from .hyper import DeimInterpolant, DmdModel, SampledNonlinearity, step_integral, _exponentials
from .integrators import NewtonSettings, TimeGrid, avf_step, backward_euler_step

VARIANTS = ("pod", "deim", "dmd")


@dataclass
class RomSystem:
    """Reduced operators for one basis, variant and (optional) hyper-reducer.

    Satisfies the integrator system protocol with ``lhs = None``.
    """

    U: np.ndarray
    ops: object
    variant: str
    corrected: bool
    J_r: np.ndarray
    A_u: np.ndarray  # U^T A U
    structure: np.ndarray
    stiffness: np.ndarray
    reducer: object = None
    _nl_proj: np.ndarray | None = field(default=None, repr=False)  # k x 2N (pod)
    _nl_comb: np.ndarray | None = field(default=None, repr=False)  # k x m (deim)
    _sampler: SampledNonlinearity | None = field(default=None, repr=False)
    _forcing: np.ndarray | None = field(default=None, repr=False)  # k x m complex (dmd)
    _dmd_lu: dict = field(default_factory=dict, repr=False)

    lhs = None

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def dim(self) -> int:
        return self.k

    @property
    def A_r(self) -> np.ndarray:
        """Linear reduced operator ``structure @ stiffness``."""
        return self.structure @ self.stiffness

    def apply_structure(self, v):
        return self.structure @ v

    def lift(self, zr):
        return self.U @ zr

    def restrict(self, z):
        return self.U.T @ (self.ops.lhs @ z)

    # reduced nonlinearity -------------------------------------------------

    def nonlinear(self, zr):
        if self.variant == "pod":
            return self._nl_proj @ self.ops.nonlinear(self.U @ zr)
        if self.variant == "deim":
            return self._nl_comb @ self._sampler(zr)
        raise ConfigurationError("the DMD system has no state-dependent nonlinearity")

    def nonlinear_jacobian(self, zr):
        if self.variant == "pod":
            return self._nl_proj @ (self.ops.nonlinear_jacobian(self.U @ zr) @ self.U)
        if self.variant == "deim":
            return self._nl_comb @ self._sampler.jacobian(zr)
        raise ConfigurationError("the DMD system has no state-dependent nonlinearity")

    def forcing_integral(self, t0: float, tau: float) -> np.ndarray:
        """``int_{t0}^{t0+tau}`` of the DMD forcing, in reduced coordinates."""
        model: DmdModel = self.reducer
        _exponentials(model, t0 + tau)  # overflow check at the step end
        c = model.amplitudes * step_integral(model.omega, t0, tau)
        return (self._forcing @ c).real

    def forcing(self, t: float) -> np.ndarray:
        model: DmdModel = self.reducer
        return (self._forcing @ (model.amplitudes * _exponentials(model, t))).real

    def rhs(self, zr, t: float = 0.0):
        if self.variant == "dmd":
            return self.A_r @ zr + self.forcing(t)
        return self.structure @ (self.stiffness @ zr + self.nonlinear(zr))

    def dmd_solver(self, tau: float):
        key = float(tau)
        if key not in self._dmd_lu:
            I = np.eye(self.k)
            A = self.A_r
            self._dmd_lu[key] = (sla.lu_factor(I - 0.5 * tau * A), I + 0.5 * tau * A)
        return self._dmd_lu[key]


def build_rom(basis, ops, variant: str = "pod", reducer=None, corrected: bool = True) -> RomSystem:
    """Precompute the reduced operators for ``variant`` in ``{"pod", "deim", "dmd"}``.

    ``basis`` is a :class:`~nlsrom.lowrank.PodBasis` or a mode matrix.  DEIM
    needs a :class:`DeimInterpolant` and DMD a :class:`DmdModel` as ``reducer``.
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown ROM variant {variant!r}")
    U = np.asarray(getattr(basis, "U", basis), dtype=float)
    if U.ndim != 2 or U.shape[0] != ops.dim:
        raise ConfigurationError(f"basis has shape {U.shape}, expected ({ops.dim}, k)")
    MU = ops.lhs @ U
    J_r = U.T @ ops.apply_structure(MU)
    J_r = 0.5 * (J_r - J_r.T)
    A_u = U.T @ (ops.stiffness @ U)
    A_u = 0.5 * (A_u + A_u.T)
    JU = ops.structure @ U  # columns J U_i
    if corrected:
        structure, stiffness, proj = J_r, A_u, U.T
    else:
        # U^T J = -(J U)^T since J is skew
        proj = -JU.T
        structure, stiffness = np.eye(U.shape[1]), proj @ (ops.stiffness @ U)
    sys_ = RomSystem(U, ops, variant, corrected, J_r, A_u, structure, stiffness, reducer)
    if variant == "pod":
        sys_._nl_proj = np.ascontiguousarray(proj)
    elif variant == "deim":
        if not isinstance(reducer, DeimInterpolant):
            raise ConfigurationError("the DEIM variant needs a DeimInterpolant")
        if reducer.Q.shape[0] != ops.dim:
            raise ConfigurationError("DEIM basis size does not match the FOM")
        sys_._nl_comb = (proj @ reducer.Q) @ reducer.PQ_inv
        sys_._sampler = SampledNonlinearity(ops, U, reducer.indices)
    else:
        if not isinstance(reducer, DmdModel):
            raise ConfigurationError("the DMD variant needs a DmdModel")
        if reducer.modes.shape[0] != ops.dim:
            raise ConfigurationError("DMD modes do not match the FOM")
        outer = J_r if corrected else np.eye(U.shape[1])
        sys_._forcing = outer @ (proj @ reducer.modes)
    return sys_


def rom_rhs_pod(sys_: RomSystem, zr):
    return sys_.structure @ (sys_.stiffness @ zr + sys_._nl_proj @ sys_.ops.nonlinear(sys_.U @ zr))


def rom_rhs_deim(sys_: RomSystem, zr):
    return sys_.structure @ (sys_.stiffness @ zr + sys_._nl_comb @ sys_._sampler(zr))


def rom_rhs_dmd(sys_: RomSystem, zr, t: float):
    return sys_.A_r @ zr + sys_.forcing(t)


def lift(sys_: RomSystem, zr):
    return sys_.lift(zr)


def restrict(sys_: RomSystem, z):
    return sys_.restrict(z)


def rom_avf_step(sys_: RomSystem, zr, t_n: float, tau: float,
                 settings: NewtonSettings = NewtonSettings()):
    """One AVF step of the reduced system; returns ``(z_next, newton_iterations)``.

    The DMD system is linear, so its step is one solve with the forcing
    integrated exactly over ``[t_n, t_n + tau]``.
    """
    if sys_.variant == "dmd":
        lu, rhs_mat = sys_.dmd_solver(tau)
        return sla.lu_solve(lu, rhs_mat @ zr + sys_.forcing_integral(t_n, tau)), 0
    z, res = avf_step(sys_, zr, tau, settings)
    return z, res.iterations


@dataclass
class RomTrajectory:
    times: np.ndarray
    states: np.ndarray  # (k, n_t)
    newton_iterations: np.ndarray
    wall_time: float

    def lifted(self, sys_: RomSystem) -> np.ndarray:
        return sys_.U @ self.states

    def invariants(self, sys_: RomSystem):
        """Mass and energy of the lifted states ``U z^r_n``."""
        from .diagnostics import discrete_energy, discrete_mass

        Z = self.lifted(sys_)
        mass = np.array([discrete_mass(sys_.ops, z) for z in Z.T])
        energy = np.array([discrete_energy(sys_.ops, z) for z in Z.T])
        return mass, energy


def integrate_rom(sys_: RomSystem, zr0, grid: TimeGrid, settings: NewtonSettings = NewtonSettings(),
                  method: str = "avf") -> RomTrajectory:
    """Online time loop; ``wall_time`` covers the steps only."""
    zr = np.array(zr0, dtype=float)
    if zr.shape != (sys_.k,):
        raise ConfigurationError(f"reduced state has shape {zr.shape}, expected ({sys_.k},)")
    times = grid.times
    states = np.empty((sys_.k, len(times)))
    iters = np.zeros(len(times), dtype=np.int64)
    states[:, 0] = zr
    if method == "backward_euler" and sys_.variant == "dmd":
        raise ConfigurationError("backward Euler is not provided for the DMD system")
    t0 = time.perf_counter()
    for n in range(1, len(times)):
        if method == "avf":
            zr, it = rom_avf_step(sys_, zr, times[n - 1], grid.tau, settings)
        else:
            zr, res = backward_euler_step(sys_, zr, grid.tau, settings)
            it = res.iterations
        states[:, n] = zr
        iters[n] = it
    elapsed = time.perf_counter() - t0
    return RomTrajectory(times, states, iters, elapsed)
