"""Space-time Galerkin reduced-order model via the basis block structure.

The space-time basis column for (spatial mode i, temporal mode j) is the
Kronecker product psi_i^j (x) phi_i.  Written in time-step row blocks the
whole basis is Phi_s E_k^(j) with E_k^(j) the n_s x n_s diagonal holding
the k-th entry of every mode's j-th temporal vector.  All reduced
space-time operators therefore collapse to sums of cheap diagonal
products around the already-reduced spatial operators, so the full-size
space-time basis never has to exist.  The explicit Kronecker construction
is kept (capped) purely as the verification oracle for that claim.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .basis import BasisSet
from .spatial import SpatialRom
from .system import InputSignal, TimeGrid, CapExceededError, ST_VERIFICATION_CAP


def temporal_diag(basis: BasisSet, k: int, j: int) -> np.ndarray:
    """Diagonal of E_k^(j): entry i is mode i's j-th temporal vector at step k.

    Indices are 0-based: ``0 <= k < N_t``, ``0 <= j < n_t``.
    """
    if not 0 <= k < basis.n_steps:
        raise IndexError(f"time step {k} out of range [0, {basis.n_steps})")
    if not 0 <= j < basis.n_t:
        raise IndexError(f"temporal mode {j} out of range [0, {basis.n_t})")
    return np.array([basis.temporal[i][k, j] for i in range(basis.n_s)])


def _step_factors(basis: BasisSet) -> np.ndarray:
    # f[j] is the N_t x n_s matrix whose row k is the diagonal of E_k^(j)
    stack = basis.temporal_stack()  # (n_s, N_t, n_t)
    return np.transpose(stack, (2, 1, 0))


def build_st_matrix(srom: SpatialRom, basis: BasisSet, grid: TimeGrid) -> np.ndarray:
    """Assemble the reduced space-time system matrix from its (j', j) blocks.

    Block (j', j) = sum_k (E_k^(j') E_k^(j) - dt_k E_k^(j') A_hat E_k^(j))
    minus the step-coupling sum over E_{k+1}^(j') E_k^(j).  Diagonal
    products reduce to elementwise vector work, so the extra cost over the
    spatial operators is O(n_s^2 n_t^2 N_t).
    """
    if basis.n_steps != grid.n_steps:
        raise ValueError(
            f"basis covers {basis.n_steps} steps but the grid has {grid.n_steps}"
        )
    n_s, n_t = basis.n_s, basis.n_t
    f = _step_factors(basis)
    dt = grid.dt
    out = np.empty((n_s * n_t, n_s * n_t))
    for jp in range(n_t):
        fp = f[jp]
        for j in range(n_t):
            fj = f[j]
            same_step = np.einsum("ki,ki->i", fp, fj)
            coupling = np.einsum("ki,ki->i", fp[1:], fj[:-1])
            weighted = fp.T @ (dt[:, None] * fj)
            block = -weighted * srom.a_hat
            block[np.diag_indices(n_s)] += same_step - coupling
            out[jp * n_s : (jp + 1) * n_s, j * n_s : (j + 1) * n_s] = block
    return out


def build_st_input(
    srom: SpatialRom,
    basis: BasisSet,
    grid: TimeGrid,
    inputs: InputSignal,
    constant_input: bool = False,
) -> np.ndarray:
    """Assemble the reduced space-time input vector block by block.

    Block j is sum_k dt_k E_k^(j) (B_hat f_k).  For inputs flagged constant
    the temporal weights are summed first and applied once to the
    precomputed B_hat f.
    """
    n_s, n_t = basis.n_s, basis.n_t
    f = _step_factors(basis)
    dt = grid.dt
    out = np.empty(n_s * n_t)
    if constant_input:
        bf = srom.b_hat @ np.atleast_1d(inputs(1))
        for j in range(n_t):
            out[j * n_s : (j + 1) * n_s] = (dt[:, None] * f[j]).sum(axis=0) * bf
    else:
        g = np.column_stack(
            [srom.b_hat @ np.atleast_1d(inputs(k + 1)) for k in range(grid.n_steps)]
        ).T  # (N_t, n_s)
        for j in range(n_t):
            out[j * n_s : (j + 1) * n_s] = (dt[:, None] * f[j] * g).sum(axis=0)
    return out


def build_st_init(srom: SpatialRom, basis: BasisSet) -> np.ndarray:
    """Assemble the reduced space-time initial vector.

    The stacked initial vector is nonzero only in its first time block, so
    projecting it costs one diagonal scaling per temporal mode: block j is
    E_1^(j) x0_hat.  Identically zero whenever the reduced initial
    condition is (e.g. ref-shifted or zero initial states).
    """
    n_s, n_t = basis.n_s, basis.n_t
    out = np.empty(n_s * n_t)
    first = _step_factors(basis)[:, 0, :]  # (n_t, n_s) diagonals of E_1^(j)
    for j in range(n_t):
        out[j * n_s : (j + 1) * n_s] = first[j] * srom.x0_hat
    return out


@dataclass(frozen=True)
class SpaceTimeRom:
    """Assembled reduced space-time system plus the basis to lift solutions."""

    a_st_hat: np.ndarray
    f_st_hat: np.ndarray
    x0_st_hat: np.ndarray
    basis: BasisSet


def build_st_rom(
    srom: SpatialRom,
    basis: BasisSet,
    grid: TimeGrid,
    inputs: InputSignal,
    constant_input: bool = False,
) -> SpaceTimeRom:
    """Assemble matrix, input, and initial vector in one pass.

    The space-time formulation carries no reference-state term, so the
    spatial ROM supplied here must have been built with ``ref_mode="zero"``
    (any srom qualifies when the initial state is zero).
    """
    if srom.ref_mode != "zero" and np.any(srom.x_ref != 0.0):
        raise ValueError(
            "space-time assembly needs a zero-reference spatial ROM; "
            "rebuild it with ref_mode='zero'"
        )
    return SpaceTimeRom(
        a_st_hat=build_st_matrix(srom, basis, grid),
        f_st_hat=build_st_input(srom, basis, grid, inputs, constant_input),
        x0_st_hat=build_st_init(srom, basis),
        basis=basis,
    )


def solve_st_rom(rom: SpaceTimeRom) -> np.ndarray:
    """Solve the dense reduced space-time system for all coefficients at once."""
    try:
        return linalg.solve_dense(rom.a_st_hat, rom.f_st_hat + rom.x0_st_hat)
    except linalg.SingularMatrixError as exc:
        raise linalg.SingularMatrixError(
            f"reduced space-time matrix is singular ({exc}); "
            "try smaller n_s or n_t, or better-conditioned bases"
        ) from exc


def reconstruct_step(basis: BasisSet, x_hat_st: np.ndarray, k: int) -> np.ndarray:
    """Lift the reduced space-time solution at time step k (0-based).

    x_k = Phi_s sum_j E_k^(j) xhat^(j) -- the full-size space-time basis is
    never formed.
    """
    if not 0 <= k < basis.n_steps:
        raise IndexError(f"time step {k} out of range [0, {basis.n_steps})")
    n_s = basis.n_s
    coeffs = np.zeros(n_s)
    for j in range(basis.n_t):
        coeffs += temporal_diag(basis, k, j) * x_hat_st[j * n_s : (j + 1) * n_s]
    return basis.phi_s @ coeffs


def reconstruct_states(basis: BasisSet, x_hat_st: np.ndarray) -> np.ndarray:
    """Lift the reduced space-time solution at every step: N_s x N_t."""
    n_s, n_t = basis.n_s, basis.n_t
    f = _step_factors(basis)  # (n_t, N_t, n_s)
    blocks = x_hat_st.reshape(n_t, n_s)
    coeffs = np.einsum("jki,ji->ik", f, blocks)  # (n_s, N_t)
    return basis.phi_s @ coeffs


def explicit_st_basis(basis: BasisSet, cap: int = ST_VERIFICATION_CAP) -> np.ndarray:
    """Materialize the space-time basis column by Kronecker column (oracle only).

    Column i + n_s*j is psi_i^j (x) phi_i.  Refuses sizes above the
    verification cap: at production scale this construction is exactly what
    the block-structured assembly avoids.
    """
    n_rows = basis.phi_s.shape[0] * basis.n_steps
    if n_rows > cap:
        raise CapExceededError(
            f"explicit space-time basis would have {n_rows} rows, above the "
            f"verification cap {cap}; it exists only as a testing oracle"
        )
    cols = []
    for j in range(basis.n_t):
        for i in range(basis.n_s):
            cols.append(
                linalg.kron(
                    basis.temporal[i][:, j][:, None], basis.phi_s[:, i][:, None]
                ).ravel()
            )
    return np.column_stack(cols)
