"""Discrete invariants, reference solutions and error norms."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError


def _mass_block(ops_or_M):
    return getattr(ops_or_M, "M", ops_or_M)


def discrete_mass(ops_or_M, z) -> float:
    """``r^T M r + s^T M s`` for ``z = [r; s]``."""
    M = _mass_block(ops_or_M)
    N = M.shape[0]
    r, s = z[:N], z[N:]
    return float(r @ (M @ r) + s @ (M @ s))


def discrete_energy(ops, z) -> float:
    """``1/2 r^T A r + 1/2 s^T A s + beta/4 * int (r^2 + s^2)^2``."""
    N = ops.N
    r, s = z[:N], z[N:]
    return float(0.5 * (r @ (ops.A @ r) + s @ (ops.A @ s)) + ops.quartic_energy(z))


@dataclass(frozen=True)
class PlaneWave:
    """``A exp(i (c1 x + c2 y - omega t))``, a solution of the NLS for ``V = 0``.

    ``omega`` defaults to the dispersion relation ``alpha |c|^2 + beta |A|^2``
    obtained by substituting the wave into the equation.
    """

    amplitude: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    alpha: float = 2.0
    beta: float = 2.0
    omega_override: float | None = None

    @property
    def omega(self) -> float:
        if self.omega_override is not None:
            return self.omega_override
        return self.alpha * (self.c1 ** 2 + self.c2 ** 2) + self.beta * abs(self.amplitude) ** 2

    @property
    def omega_alternative(self) -> float:
        """``c1^2 + c2^2 - beta |A|^2``, the frequency quoted with the example."""
        return self.c1 ** 2 + self.c2 ** 2 - self.beta * abs(self.amplitude) ** 2

    def __call__(self, t, x, y):
        return self.amplitude * np.exp(1j * (self.c1 * x + self.c2 * y - self.omega * t))

    def check_periodic(self, lx: float, ly: float):
        for c, L in ((self.c1, lx), (self.c2, ly)):
            k = c * L / (2 * np.pi)
            if abs(k - round(k)) > 1e-12:
                warnings.warn(f"wave number {c} is not periodic on a box of length {L}",
                              stacklevel=2)


def plane_wave(params: PlaneWave, t, x, y):
    return params(t, x, y)


def gaussian(x, y):
    """``exp(-(x^2 + y^2)/2) / sqrt(pi)``, unit mass on the whole plane."""
    return np.exp(-0.5 * (x * x + y * y)) / np.sqrt(np.pi)


def project_complex(space, psi) -> np.ndarray:
    """L2 projection of a complex field ``psi(x, y)`` into ``z = [r; s]``."""
    c = space.l2_project(lambda x, y: psi(x, y).astype(complex))
    return np.concatenate([c.real, c.imag])


def l2_error(space, z, psi) -> float:
    """``||psi_h - psi||_{L2}`` for the complex field ``psi(x, y)``."""
    N = space.N
    return space.l2_error(z[:N] + 1j * z[N:], psi)


def m_norm(ops_or_M, z) -> float:
    return float(np.sqrt(max(discrete_mass(ops_or_M, z), 0.0)))


def relative_l2l2_error(ops_or_M, states, references, tau: float = 1.0) -> float:
    """``sqrt(sum tau ||z_n - ref_n||_M^2) / sqrt(sum tau ||ref_n||_M^2)``.

    ``states``/``references`` are sequences (or column matrices) of 2N vectors.
    """
    num = den = 0.0
    for z, ref in zip(_columns(states), _columns(references)):
        num += tau * discrete_mass(ops_or_M, z - ref)
        den += tau * discrete_mass(ops_or_M, ref)
    if den == 0.0:
        raise DegenerateInputError("reference series has zero norm")
    return float(np.sqrt(num / den))


def _columns(a):
    if isinstance(a, np.ndarray) and a.ndim == 2:
        return a.T
    return a


def max_drift(series) -> float:
    s = np.asarray(series, dtype=float)
    return float(np.max(np.abs(s - s[0])))


def error_norms(ops_or_M, states, references, tau: float, mass=None, energy=None) -> dict:
    """Relative L2-L2 solution error plus L-infinity invariant drifts."""
    out = {"l2l2": relative_l2l2_error(ops_or_M, states, references, tau)}
    if mass is not None:
        out["mass_drift"] = max_drift(mass)
    if energy is not None:
        out["energy_drift"] = max_drift(energy)
    return out


@dataclass
class InvariantSeries:
    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    l2_error: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.times)
        if len(self.mass) != n or len(self.energy) != n:
            raise ValueError("invariant series lengths differ")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("time stamps must be strictly increasing")

    @property
    def mass_drift(self) -> np.ndarray:
        return np.abs(self.mass - self.mass[0])

    @property
    def energy_drift(self) -> np.ndarray:
        return np.abs(self.energy - self.energy[0])
