"""Energy-preserving reduced-order models for the 2D nonlinear Schroedinger equation.

Full model: linear SIPG discontinuous Galerkin in space, average vector
field (AVF) in time.  Reduced models: M-orthonormal POD Galerkin projection
with the skew structure ``U^T J M U``, optionally hyper-reduced by DEIM or DMD.
"""
from .config import RunConfig, example1, example2
from .dg import DgSpace
from .diagnostics import PlaneWave, discrete_energy, discrete_mass
from .errors import NlsromError
from .integrators import NewtonSettings, TimeGrid, avf_step, backward_euler_step, integrate
from .lowrank import PodBasis, energy_criterion, pod_basis, rsvd
from .mesh import build_periodic_mesh
from .rom import RomSystem, build_rom, integrate_rom
from .sipg import OperatorSet

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "example1", "example2", "DgSpace", "PlaneWave", "discrete_energy",
    "discrete_mass", "NlsromError", "NewtonSettings", "TimeGrid", "avf_step",
    "backward_euler_step", "integrate", "PodBasis", "energy_criterion", "pod_basis", "rsvd",
    "build_periodic_mesh", "RomSystem", "build_rom", "integrate_rom", "OperatorSet",
]
