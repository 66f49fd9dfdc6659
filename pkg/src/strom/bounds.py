"""A-posteriori error bounds for the spatial and space-time ROMs.

Three certified bounds, each paired with the measured error so reports can
state whether the bound actually dominated:

* residual bound     -- any approximate trajectory; per-step residual norms
                        amplified by products of inverse-step-operator norms
* ROM-specific bound -- spatial-ROM trajectories only; needs dt < 1/||A||_2
                        and amplifies dt*(A xtilde + B f) norms
* space-time bound   -- one scalar: sqrt(N_t) ||A_st^{-1}||_2 max_k ||r_k||_2
                        against the max-over-steps error norm

Operator norms come from a dense SVD below a size cutoff and otherwise
from seeded matrix-free power iteration, so every bound is evaluable
without assembling the space-time operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .system import (
    LinearDynamicalSystem,
    StepSolver,
    TimeGrid,
    fom_march,
    st_inverse_operator,
    step_residual,
    st_residual,
)

DENSE_NORM_CUTOFF = 256
_VALIDITY_SLACK = 1e-12


class PreconditionError(Exception):
    """Raised when a bound's hypothesis fails (e.g. dt too large for ||A||)."""


@dataclass(frozen=True)
class BoundReport:
    """Measured per-step errors next to the certified bound values."""

    name: str
    step_errors: np.ndarray
    step_bounds: np.ndarray
    constants: np.ndarray
    st_bound: float | None = None

    @property
    def valid(self) -> bool:
        """True when the bound dominates the measured error at every step."""
        slack = _VALIDITY_SLACK * np.maximum(1.0, self.step_bounds)
        return bool(np.all(self.step_errors <= self.step_bounds + slack))


def operator_norm(a, seed: int = 0, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """||A||_2 of a sparse operator: dense SVD when small, else power iteration."""
    n, m = a.shape
    if max(n, m) <= DENSE_NORM_CUTOFF:
        dense = a.toarray() if hasattr(a, "toarray") else np.asarray(a)
        return float(scipy.linalg.svdvals(dense)[0])
    at = a.T.tocsr() if hasattr(a, "tocsr") else a.T
    return linalg.largest_singular_value(
        lambda v: a @ v, lambda v: at @ v, m, n, tol=tol, max_iter=max_iter, seed=seed
    )


def inv_step_norm(
    sys: LinearDynamicalSystem,
    dt: float,
    solver: StepSolver | None = None,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> float:
    """||(I - dt A)^{-1}||_2, the reciprocal of that operator's smallest singular value."""
    n = sys.n_states
    if n <= DENSE_NORM_CUTOFF:
        dense = np.eye(n) - dt * sys.a.toarray()
        return float(1.0 / scipy.linalg.svdvals(dense)[-1])
    if solver is None:
        solver = StepSolver(sys)
    return linalg.largest_singular_value(
        lambda v: solver.solve(dt, v),
        lambda v: solver.solve_adjoint(dt, v),
        n,
        n,
        tol=tol,
        max_iter=max_iter,
        seed=seed,
    )


def st_inverse_norm(
    sys: LinearDynamicalSystem,
    grid: TimeGrid,
    seed: int = 0,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> float:
    """||A_st^{-1}||_2 via matrix-free forward/adjoint marching applies."""
    apply, apply_adjoint = st_inverse_operator(sys, grid)
    n = sys.n_states * grid.n_steps
    return linalg.largest_singular_value(
        apply, apply_adjoint, n, n, tol=tol, max_iter=max_iter, seed=seed
    )


def _measured_errors(sys, grid, approx_states, fom_states):
    if fom_states is None:
        fom_states = fom_march(sys, grid).states
    if fom_states.shape != approx_states.shape:
        raise ValueError(
            f"state shapes disagree: {fom_states.shape} vs {approx_states.shape}"
        )
    return np.linalg.norm(fom_states - approx_states, axis=0), fom_states


def residual_error_bound(
    sys: LinearDynamicalSystem,
    grid: TimeGrid,
    approx_states: np.ndarray,
    fom_states: np.ndarray | None = None,
    seed: int = 0,
) -> BoundReport:
    """Residual-based bound valid for any approximation that starts at x0.

    The step-k bound is sum_{i<=k} (prod_{j=i..k} beta_j) ||r_i|| with
    beta_j = ||(I - dt_j A)^{-1}||_2, accumulated by the recursion
    b_k = beta_k (b_{k-1} + ||r_k||).
    """
    nt = grid.n_steps
    approx_states = np.asarray(approx_states, dtype=float)
    errors, _ = _measured_errors(sys, grid, approx_states, fom_states)
    solver = StepSolver(sys)
    betas = np.empty(nt)
    cache: dict[float, float] = {}
    for k in range(nt):
        dt = float(grid.dt[k])
        if dt not in cache:
            cache[dt] = inv_step_norm(sys, dt, solver=solver, seed=seed)
        betas[k] = cache[dt]
    bounds = np.empty(nt)
    acc = 0.0
    x_prev = sys.x0
    for k in range(nt):
        r_k = step_residual(
            sys, float(grid.dt[k]), approx_states[:, k], x_prev, sys.input_signal(k + 1)
        )
        acc = betas[k] * (acc + float(np.linalg.norm(r_k)))
        bounds[k] = acc
        x_prev = approx_states[:, k]
    return BoundReport("residual", errors, bounds, betas)


def rom_error_bound(
    sys: LinearDynamicalSystem,
    grid: TimeGrid,
    approx_states: np.ndarray,
    fom_states: np.ndarray | None = None,
    seed: int = 0,
) -> BoundReport:
    """Spatial-ROM-specific bound; requires dt_k < 1/||A||_2 for every step.

    The step-k bound is sum_{i<=k} (prod_{j=i..k} gamma_j) ||w_i|| with
    gamma_j = 1/(1 - dt_j ||A||_2) and w_i = dt_i (A xtilde_i + B f_i).
    Only trajectories produced by the spatial ROM satisfy the identity this
    bound is derived from.
    """
    nt = grid.n_steps
    approx_states = np.asarray(approx_states, dtype=float)
    errors, _ = _measured_errors(sys, grid, approx_states, fom_states)
    a_norm = operator_norm(sys.a, seed=seed)
    if np.any(grid.dt >= 1.0 / a_norm):
        worst = float(grid.dt.max())
        raise PreconditionError(
            f"time step {worst:.3e} is not below 1/||A||_2 = {1.0 / a_norm:.3e}"
        )
    gammas = 1.0 / (1.0 - grid.dt * a_norm)
    bounds = np.empty(nt)
    acc = 0.0
    for k in range(nt):
        w_k = grid.dt[k] * (
            sys.a @ approx_states[:, k]
            + sys.b @ np.atleast_1d(sys.input_signal(k + 1))
        )
        acc = gammas[k] * (acc + float(np.linalg.norm(w_k)))
        bounds[k] = acc
    return BoundReport("rom_specific", errors, bounds, gammas)


def space_time_error_bound(
    sys: LinearDynamicalSystem,
    grid: TimeGrid,
    approx_st: np.ndarray,
    fom_states: np.ndarray | None = None,
    seed: int = 0,
) -> BoundReport:
    """Space-time residual bound on the max-over-steps error norm.

    Bound = sqrt(N_t) ||A_st^{-1}||_2 max_k ||r_k||_2, reported against
    max_k ||x_k - xtilde_k||_2; the per-step arrays carry the step errors
    and the constant bound so the report can be plotted like the others.
    """
    n, nt = sys.n_states, grid.n_steps
    approx_st = np.asarray(approx_st, dtype=float).ravel()
    approx_states = approx_st.reshape(nt, n).T
    errors, _ = _measured_errors(sys, grid, approx_states, fom_states)
    res = st_residual(sys, grid, approx_st)
    max_res = float(np.linalg.norm(res.reshape(nt, n), axis=1).max())
    inv_norm = st_inverse_norm(sys, grid, seed=seed)
    bound = float(np.sqrt(nt) * inv_norm * max_res)
    return BoundReport(
        "space_time",
        errors,
        np.full(nt, bound),
        np.array([inv_norm]),
        st_bound=bound,
    )
