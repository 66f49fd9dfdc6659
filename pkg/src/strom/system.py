"""Parametric linear dynamical systems and their full-order solution paths.

A system is ``x' = A x + B f(t)`` with output ``y = C^T x``, discretized by
backward Euler on a :class:`TimeGrid`.  Besides the time-marching full-order
solve this module provides the equivalent all-at-once space-time operator
(capped, for verification only), matrix-free applies of its inverse and
transpose-inverse, and the step/space-time residual evaluations the error
bounds are built on.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

InputSignal = Callable[[int], np.ndarray]

ST_VERIFICATION_CAP = 20_000


class CapExceededError(Exception):
    """Raised when an explicit space-time assembly would exceed the verification cap."""


@dataclass(frozen=True)
class TimeGrid:
    """Positive step sizes dt_k, k = 1..n_steps; total time is their sum."""

    dt: np.ndarray

    def __post_init__(self):
        dt = np.atleast_1d(np.asarray(self.dt, dtype=float))
        if dt.ndim != 1 or dt.size == 0:
            raise ValueError("time grid needs at least one step")
        if not np.all(dt > 0.0):
            raise ValueError("all step sizes must be positive")
        object.__setattr__(self, "dt", dt)

    @classmethod
    def uniform(cls, dt: float, n_steps: int) -> "TimeGrid":
        return cls(np.full(n_steps, float(dt)))

    @property
    def n_steps(self) -> int:
        return self.dt.size

    @property
    def total_time(self) -> float:
        return float(self.dt.sum())

    @property
    def times(self) -> np.ndarray:
        return np.cumsum(self.dt)

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.dt == self.dt[0]))


@dataclass
class LinearDynamicalSystem:
    """Operators of one parameter instance of ``x' = A x + B f``, ``y = C^T x``.

    ``input_signal(k)`` returns the input vector driving the step that
    produces ``x_k`` (k = 1..n_steps).  ``constant_input`` marks signals that
    do not depend on k, which unlocks a cheaper reduced-input assembly.
    """

    a: sp.spmatrix
    b: sp.spmatrix
    c: np.ndarray
    x0: np.ndarray
    input_signal: InputSignal
    constant_input: bool = False
    param: dict = field(default_factory=dict)

    def __post_init__(self):
        self.a = sp.csr_array(self.a)
        self.b = sp.csr_array(self.b)
        self.c = np.atleast_2d(np.asarray(self.c, dtype=float))
        self.x0 = np.asarray(self.x0, dtype=float)
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise ValueError(f"A must be square, got {self.a.shape}")
        if self.b.shape[0] != n or self.c.shape[0] != n or self.x0.shape != (n,):
            raise ValueError("operator dimensions are inconsistent")

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[1]


class StepSolver:
    """Sparse LU of (I - dt A), cached per distinct dt so uniform grids factor once."""

    def __init__(self, sys: LinearDynamicalSystem):
        self._sys = sys
        self._eye = sp.eye_array(sys.n_states, format="csc")
        self._lu = {}

    def _factor(self, dt: float):
        lu = self._lu.get(dt)
        if lu is None:
            lu = spla.splu(sp.csc_array(self._eye - dt * self._sys.a))
            self._lu[dt] = lu
        return lu

    def solve(self, dt: float, rhs: np.ndarray) -> np.ndarray:
        return self._factor(dt).solve(rhs)

    def solve_adjoint(self, dt: float, rhs: np.ndarray) -> np.ndarray:
        return self._factor(dt).solve(rhs, trans="T")


def backward_euler_step(
    sys: LinearDynamicalSystem,
    dt: float,
    x_prev: np.ndarray,
    f_k: np.ndarray,
    solver: StepSolver | None = None,
) -> np.ndarray:
    """One implicit step: solve (I - dt A) x_k = x_prev + dt B f_k."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if solver is None:
        solver = StepSolver(sys)
    rhs = x_prev + dt * (sys.b @ np.atleast_1d(f_k))
    return solver.solve(float(dt), rhs)


class FomResult(NamedTuple):
    states: np.ndarray  # n_states x n_steps, column k-1 holds x_k
    outputs: np.ndarray  # n_outputs x n_steps
    wall_time: float


def fom_march(sys: LinearDynamicalSystem, grid: TimeGrid) -> FomResult:
    """March the full-order model over the grid; the clock covers the march only."""
    n, nt = sys.n_states, grid.n_steps
    states = np.empty((n, nt))
    solver = StepSolver(sys)
    inputs = [np.atleast_1d(sys.input_signal(k)) for k in range(1, nt + 1)]
    start = time.perf_counter()
    x = sys.x0
    for k in range(nt):
        x = solver.solve(float(grid.dt[k]), x + grid.dt[k] * (sys.b @ inputs[k]))
        states[:, k] = x
    wall = time.perf_counter() - start
    outputs = sys.c.T @ states
    return FomResult(states, outputs, wall)


def assemble_st(
    sys: LinearDynamicalSystem, grid: TimeGrid, cap: int = ST_VERIFICATION_CAP
) -> tuple[sp.csr_array, np.ndarray, np.ndarray]:
    """Explicitly assemble the space-time system (A_st, f_st, x0_st).

    The block bidiagonal A_st has diagonal blocks I - dt_k A and subdiagonal
    blocks -I; f_st stacks dt_k B f_k; x0_st is (x0, 0, ..., 0).  Intended for
    small verification problems only: refuses n_states*n_steps above ``cap``
    since production solves always go through the marching path.
    """
    n, nt = sys.n_states, grid.n_steps
    if n * nt > cap:
        raise CapExceededError(
            f"space-time size {n * nt} exceeds the verification cap {cap}; "
            "explicit assembly exists only to cross-check the marching solver"
        )
    eye = sp.eye_array(n, format="csr")
    blocks = [[None] * nt for _ in range(nt)]
    for k in range(nt):
        blocks[k][k] = eye - grid.dt[k] * sys.a
        if k > 0:
            blocks[k][k - 1] = -eye
    a_st = sp.csr_array(sp.bmat(blocks, format="csr"))
    f_st = np.concatenate(
        [grid.dt[k] * (sys.b @ np.atleast_1d(sys.input_signal(k + 1))) for k in range(nt)]
    )
    x0_st = np.zeros(n * nt)
    x0_st[:n] = sys.x0
    return a_st, f_st, x0_st


def st_apply_inverse(
    sys: LinearDynamicalSystem,
    grid: TimeGrid,
    v: np.ndarray,
    solver: StepSolver | None = None,
) -> np.ndarray:
    """Apply (A_st)^{-1} by forward block substitution (time marching on v-blocks)."""
    n, nt = sys.n_states, grid.n_steps
    v = np.asarray(v, dtype=float)
    if v.shape != (n * nt,):
        raise ValueError(f"expected vector of length {n * nt}, got {v.shape}")
    if solver is None:
        solver = StepSolver(sys)
    out = np.empty_like(v)
    x = np.zeros(n)
    for k in range(nt):
        x = solver.solve(float(grid.dt[k]), v[k * n : (k + 1) * n] + x)
        out[k * n : (k + 1) * n] = x
    return out


def st_apply_inverse_adjoint(
    sys: LinearDynamicalSystem,
    grid: TimeGrid,
    v: np.ndarray,
    solver: StepSolver | None = None,
) -> np.ndarray:
    """Apply (A_st)^{-T} by reverse-time substitution with the transposed steps."""
    n, nt = sys.n_states, grid.n_steps
    v = np.asarray(v, dtype=float)
    if v.shape != (n * nt,):
        raise ValueError(f"expected vector of length {n * nt}, got {v.shape}")
    if solver is None:
        solver = StepSolver(sys)
    out = np.empty_like(v)
    y = np.zeros(n)
    for k in range(nt - 1, -1, -1):
        y = solver.solve_adjoint(float(grid.dt[k]), v[k * n : (k + 1) * n] + y)
        out[k * n : (k + 1) * n] = y
    return out


def st_inverse_operator(sys: LinearDynamicalSystem, grid: TimeGrid):
    """Matrix-free (A_st)^{-1} and its adjoint sharing one cached factorization."""
    solver = StepSolver(sys)

    def apply(v):
        return st_apply_inverse(sys, grid, v, solver)

    def apply_adjoint(v):
        return st_apply_inverse_adjoint(sys, grid, v, solver)

    return apply, apply_adjoint


def step_residual(
    sys: LinearDynamicalSystem,
    dt: float,
    x_k: np.ndarray,
    x_prev: np.ndarray,
    f_k: np.ndarray,
) -> np.ndarray:
    """Residual of one backward-Euler step: x_k - x_prev - dt A x_k - dt B f_k."""
    return x_k - x_prev - dt * (sys.a @ x_k) - dt * (sys.b @ np.atleast_1d(f_k))


def st_residual(sys: LinearDynamicalSystem, grid: TimeGrid, xst: np.ndarray) -> np.ndarray:
    """Space-time residual A_st x - f_st - x0_st, evaluated block-wise without assembly."""
    n, nt = sys.n_states, grid.n_steps
    xst = np.asarray(xst, dtype=float)
    if xst.shape != (n * nt,):
        raise ValueError(f"expected vector of length {n * nt}, got {xst.shape}")
    out = np.empty_like(xst)
    x_prev = sys.x0
    for k in range(nt):
        x_k = xst[k * n : (k + 1) * n]
        out[k * n : (k + 1) * n] = step_residual(
            sys, float(grid.dt[k]), x_k, x_prev, sys.input_signal(k + 1)
        )
        x_prev = x_k
    return out


def snapshot_matrix(state_mats: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate per-sample state matrices columnwise, sample-major then time."""
    if not state_mats:
        raise ValueError("need at least one state matrix")
    rows = state_mats[0].shape[0]
    for m in state_mats:
        if m.ndim != 2 or m.shape[0] != rows:
            raise ValueError("state matrices must share their row dimension")
    return np.hstack(state_mats)
