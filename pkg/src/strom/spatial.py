"""Spatial Galerkin reduced-order model.

The state is approximated as ``x(t) ~ x_ref + Phi_s xhat(t)``; projecting
the dynamics onto the basis gives a dense n_s-dimensional system whose
operators are precomputed once per parameter and then marched with the
same backward-Euler scheme as the full model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import BasisSet
from .system import InputSignal, LinearDynamicalSystem, TimeGrid

REF_MODES = ("zero", "initial_state")


@dataclass(frozen=True)
class SpatialRom:
    """Reduced operators of one parameter instance.

    ``x_ref_hat`` is the projected A x_ref forcing term and ``y_ref`` the
    constant output offset C^T x_ref; with ``ref_mode="initial_state"`` the
    reduced initial condition is exactly zero.
    """

    a_hat: np.ndarray
    b_hat: np.ndarray
    c_hat: np.ndarray
    x_ref: np.ndarray
    x_ref_hat: np.ndarray
    x0_hat: np.ndarray
    y_ref: np.ndarray
    ref_mode: str

    @property
    def n_s(self) -> int:
        return self.a_hat.shape[0]


def build_spatial_rom(
    sys: LinearDynamicalSystem, basis: BasisSet, ref_mode: str = "initial_state"
) -> SpatialRom:
    """Project the system operators onto the spatial basis."""
    if ref_mode not in REF_MODES:
        raise ValueError(f"ref_mode must be one of {REF_MODES}, got {ref_mode!r}")
    phi = basis.phi_s
    if phi.shape[0] != sys.n_states:
        raise ValueError(
            f"basis has {phi.shape[0]} rows but the system has {sys.n_states} states"
        )
    x_ref = sys.x0 if ref_mode == "initial_state" else np.zeros(sys.n_states)
    a_phi = sys.a @ phi
    return SpatialRom(
        a_hat=phi.T @ a_phi,
        b_hat=phi.T @ sys.b.toarray(),
        c_hat=phi.T @ sys.c,
        x_ref=x_ref,
        x_ref_hat=phi.T @ (sys.a @ x_ref),
        x0_hat=phi.T @ (sys.x0 - x_ref),
        y_ref=sys.c.T @ x_ref,
        ref_mode=ref_mode,
    )


def srom_march(rom: SpatialRom, grid: TimeGrid, inputs: InputSignal) -> np.ndarray:
    """March the reduced coordinates over the grid; column k-1 holds xhat_k."""
    n_s, nt = rom.n_s, grid.n_steps
    traj = np.empty((n_s, nt))
    eye = np.eye(n_s)
    factors = {}
    x = rom.x0_hat
    for k in range(nt):
        dt = float(grid.dt[k])
        lu = factors.get(dt)
        if lu is None:
            lu = scipy.linalg.lu_factor(eye - dt * rom.a_hat)
            factors[dt] = lu
        rhs = x + dt * (rom.b_hat @ np.atleast_1d(inputs(k + 1))) + dt * rom.x_ref_hat
        x = scipy.linalg.lu_solve(lu, rhs)
        traj[:, k] = x
    return traj


def srom_output(rom: SpatialRom, x_hat) -> np.ndarray:
    """Recover outputs: y = C_hat^T xhat + C^T x_ref (vector or trajectory)."""
    x_hat = np.asarray(x_hat, dtype=float)
    y = rom.c_hat.T @ x_hat
    return y + (rom.y_ref if x_hat.ndim == 1 else rom.y_ref[:, None])


def reconstruct_states(rom: SpatialRom, basis: BasisSet, x_hat) -> np.ndarray:
    """Lift reduced coordinates back to full states: x_ref + Phi_s xhat."""
    x_hat = np.asarray(x_hat, dtype=float)
    lifted = basis.phi_s @ x_hat
    return lifted + (rom.x_ref if x_hat.ndim == 1 else rom.x_ref[:, None])
