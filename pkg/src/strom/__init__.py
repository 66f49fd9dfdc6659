"""Space-time reduced-order models for linear dynamical systems.

Offline: march the full-order model over training parameters, stream the
snapshots through an incremental SVD, and extract spatial plus per-mode
temporal bases.  Online: assemble the reduced space-time operators
directly from their block structure (never forming the space-time basis)
and solve one small dense system for the whole trajectory.  Certified
a-posteriori error bounds accompany both the spatial and space-time ROMs.
"""

from .basis import BasisSet, SvdState, batch_pod, build_basis_set, ingest_simulation, isvd_init, isvd_update
from .bounds import BoundReport, residual_error_bound, rom_error_bound, space_time_error_bound
from .spatial import SpatialRom, build_spatial_rom, srom_march, srom_output
from .spacetime import SpaceTimeRom, build_st_rom, reconstruct_states, solve_st_rom
from .system import LinearDynamicalSystem, TimeGrid, fom_march
from .problems import ProblemSpec, make_system

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "BoundReport",
    "LinearDynamicalSystem",
    "ProblemSpec",
    "SpaceTimeRom",
    "SpatialRom",
    "SvdState",
    "TimeGrid",
    "batch_pod",
    "build_basis_set",
    "build_spatial_rom",
    "build_st_rom",
    "fom_march",
    "ingest_simulation",
    "isvd_init",
    "isvd_update",
    "make_system",
    "reconstruct_states",
    "residual_error_bound",
    "rom_error_bound",
    "solve_st_rom",
    "space_time_error_bound",
    "srom_march",
    "srom_output",
]
