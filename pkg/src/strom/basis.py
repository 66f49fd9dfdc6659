"""Streaming incremental SVD and spatial/temporal basis extraction.

Snapshots arrive one column at a time.  Each arrival performs a rank-one
update of the running thin SVD through a small bordered-diagonal middle
matrix, so the cost per column is O(n r^2) instead of re-factoring the
whole snapshot matrix.  Columns that are numerically dependent on the
current left basis update only the existing r components; trailing
singular values below ``tol_sv`` are truncated; orthogonality of the left
basis is monitored and restored by QR when drift is detected.

After ingestion, the left singular vectors give the spatial basis and the
rows of the right singular matrix are sliced per simulation to build one
temporal basis per spatial mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import linalg


class BasisError(Exception):
    """Raised when a requested basis exceeds what the data supports."""


@dataclass(frozen=True)
class SvdState:
    """Running thin SVD of every column ingested so far.

    ``phi`` is n x r, ``sigma`` is the non-increasing r-vector, ``v`` is
    k x r with one row per ingested column (rows of rejected columns are
    zero).  ``r_max`` caps the rank; ``cap_mode`` selects what happens at
    the cap: ``"restart"`` re-initializes from the incoming column (the
    streaming-update rule, surprising but cheap) while ``"truncate"``
    keeps updating and drops the trailing singular value instead.
    """

    phi: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    k: int
    tol_svd: float
    tol_sv: float = 0.0
    r_max: int | None = None
    cap_mode: str = "restart"
    # stream diagnostics
    n_rejected: int = 0
    n_dependent: int = 0
    n_truncated: int = 0
    n_restarts: int = 0

    def __post_init__(self):
        if self.cap_mode not in ("restart", "truncate"):
            raise ValueError(f"unknown cap_mode {self.cap_mode!r}")

    @property
    def rank(self) -> int:
        return self.sigma.size


def isvd_init(
    x: np.ndarray,
    tol_svd: float,
    k: int = 1,
    tol_sv: float = 0.0,
    r_max: int | None = None,
    cap_mode: str = "restart",
) -> SvdState:
    """Start (or restart) the stream from its k-th column.

    Accepts the column only when ``||x|| > tol_svd`` (strict); otherwise the
    state is empty with rank zero.  The right singular matrix keeps one row
    per column seen so far, so restarts zero out history rows.
    """
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    rejected = 0
    if norm > tol_svd:
        phi = (x / norm)[:, None]
        sigma = np.array([norm])
        v = np.zeros((k, 1))
        v[k - 1, 0] = 1.0
    else:
        phi = np.empty((x.size, 0))
        sigma = np.empty(0)
        v = np.empty((k, 0))
        rejected = 1
    return SvdState(
        phi,
        sigma,
        v,
        k,
        float(tol_svd),
        float(tol_sv),
        r_max,
        cap_mode,
        n_rejected=rejected,
    )


def isvd_update(state: SvdState, x: np.ndarray) -> SvdState:
    """Fold one more column into the running SVD and return the new state."""
    x = np.asarray(x, dtype=float)
    n = state.phi.shape[0] if state.rank else x.size
    if x.shape != (n,):
        raise ValueError(f"expected column of length {n}, got shape {x.shape}")

    r = state.rank
    k = state.k + 1
    at_cap = state.r_max is not None and r >= state.r_max
    if r == 0 or (at_cap and state.cap_mode == "restart"):
        if at_cap:
            warnings.warn(
                f"incremental SVD rank hit r_max={state.r_max}; restarting from "
                "the incoming column and discarding the accumulated basis "
                "(set cap_mode='truncate' to keep it)",
                RuntimeWarning,
                stacklevel=2,
            )
        fresh = isvd_init(
            x, state.tol_svd, k, state.tol_sv, state.r_max, state.cap_mode
        )
        return replace(
            fresh,
            n_rejected=state.n_rejected + fresh.n_rejected,
            n_dependent=state.n_dependent,
            n_truncated=state.n_truncated,
            n_restarts=state.n_restarts + (1 if at_cap else 0),
        )

    ell = state.phi.T @ x
    p_sq = float(x @ x - ell @ ell)
    p = np.sqrt(p_sq) if p_sq > 0.0 else 0.0  # clamp cancellation noise
    # a full-space basis makes every column dependent, whatever roundoff says
    dependent = p < state.tol_svd or p == 0.0 or r >= n

    q = np.zeros((r + 1, r + 1))
    q[:r, :r] = np.diag(state.sigma)
    q[:r, r] = ell
    q[r, r] = 0.0 if dependent else p
    w_bar, sigma_bar, v_bar = linalg.thin_svd(q)

    v_bordered = np.zeros((k, r + 1))
    v_bordered[: k - 1, :r] = state.v
    v_bordered[k - 1, r] = 1.0
    if dependent:
        phi = state.phi @ w_bar[:r, :r]
        sigma = sigma_bar[:r]
        v = v_bordered @ v_bar[:, :r]
    else:
        j = (x - state.phi @ ell) / p
        phi = np.hstack([state.phi, j[:, None]]) @ w_bar
        sigma = sigma_bar
        v = v_bordered @ v_bar

    # truncate a trailing singular value that fell below tol_sv
    truncated = 0
    if sigma.size and sigma[-1] < state.tol_sv:
        phi, sigma, v = phi[:, :-1], sigma[:-1], v[:, :-1]
        truncated = 1
    # enforce the cap when running in truncate mode
    if state.r_max is not None and sigma.size > state.r_max:
        phi, sigma, v = phi[:, : state.r_max], sigma[: state.r_max], v[:, : state.r_max]
        truncated = 1

    # re-orthogonalize on detected drift between first and last left vectors
    if sigma.size:
        drift = abs(float(phi[:, 0] @ phi[:, -1])) if sigma.size > 1 else 0.0
        if drift > min(state.tol_svd, np.finfo(float).eps * n):
            phi, _ = linalg.qr(phi)

    return replace(
        state,
        phi=phi,
        sigma=sigma,
        v=v,
        k=k,
        n_dependent=state.n_dependent + (1 if dependent else 0),
        n_truncated=state.n_truncated + truncated,
    )


def ingest_simulation(state: SvdState, states: np.ndarray) -> SvdState:
    """Fold the columns of one simulation's state matrix, left to right."""
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        raise ValueError("expected a 2-D state matrix")
    for col in range(states.shape[1]):
        state = isvd_update(state, states[:, col])
    return state


def batch_pod(u: np.ndarray, n_s: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-shot POD of a snapshot matrix: leading left singular vectors.

    Returns ``(phi_s, sigma, v)`` with phi_s the first n_s left singular
    vectors; sigma and v carry the full thin factorization for downstream
    temporal slicing.  This is the reference the streaming path is checked
    against.
    """
    u = np.asarray(u, dtype=float)
    if n_s < 1:
        raise BasisError(f"need n_s >= 1, got {n_s}")
    w, sigma, v = linalg.thin_svd(u)
    rank = int(np.sum(sigma > max(u.shape) * np.finfo(float).eps * (sigma[0] if sigma.size else 0.0)))
    if n_s > rank:
        raise BasisError(f"requested {n_s} modes but the snapshots have rank {rank}")
    return w[:, :n_s], sigma, v


def temporal_snapshots(v: np.ndarray, mode: int, n_steps: int, n_mu: int) -> np.ndarray:
    """Slice column ``mode`` of the right singular matrix into per-sample pieces.

    Column p of the result is rows ``p*n_steps:(p+1)*n_steps`` of ``v[:, mode]``,
    i.e. the temporal behavior of that spatial mode in sample p.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != n_mu * n_steps:
        raise ValueError(
            f"right singular matrix has {v.shape[0]} rows, expected {n_mu * n_steps}"
        )
    if not 0 <= mode < v.shape[1]:
        raise IndexError(f"mode {mode} out of range for rank {v.shape[1]}")
    return v[:, mode].reshape(n_mu, n_steps).T


@dataclass(frozen=True)
class BasisSet:
    """Spatial basis plus one temporal basis per spatial mode.

    ``phi_s`` is N_s x n_s orthonormal; ``temporal[i]`` is the N_t x n_t
    orthonormal temporal basis of mode i.
    """

    phi_s: np.ndarray
    temporal: tuple[np.ndarray, ...]
    n_mu: int

    def __post_init__(self):
        object.__setattr__(self, "temporal", tuple(np.asarray(t) for t in self.temporal))
        if len(self.temporal) != self.phi_s.shape[1]:
            raise ValueError("need one temporal basis per spatial mode")
        shapes = {t.shape for t in self.temporal}
        if len(shapes) > 1:
            raise ValueError(f"temporal bases disagree on shape: {shapes}")

    @property
    def n_s(self) -> int:
        return self.phi_s.shape[1]

    @property
    def n_t(self) -> int:
        return self.temporal[0].shape[1]

    @property
    def n_steps(self) -> int:
        return self.temporal[0].shape[0]

    def temporal_stack(self) -> np.ndarray:
        """All temporal bases as one (n_s, N_t, n_t) array."""
        return np.stack(self.temporal)

    def orthonormality_defect(self) -> float:
        """Worst max-abs deviation of phi_s^T phi_s and psi_i^T psi_i from identity."""
        defect = np.max(np.abs(self.phi_s.T @ self.phi_s - np.eye(self.n_s)))
        for t in self.temporal:
            defect = max(defect, np.max(np.abs(t.T @ t - np.eye(self.n_t))))
        return float(defect)


def build_basis_set(state: SvdState, n_s: int, n_t: int, n_steps: int, n_mu: int) -> BasisSet:
    """Extract the spatial basis and per-mode temporal bases from a final state.

    The temporal basis of mode i comes from the thin SVD of that mode's
    sliced right singular vectors; n_t may not exceed min(N_t, n_mu) nor
    any mode's achievable rank.
    """
    if n_s < 1 or n_s > state.rank:
        raise BasisError(f"requested n_s={n_s} but the stream has rank {state.rank}")
    if n_t < 1 or n_t > min(n_steps, n_mu):
        raise BasisError(
            f"requested n_t={n_t} exceeds the temporal ceiling min(N_t={n_steps}, n_mu={n_mu})"
        )
    if state.v.shape[0] != n_mu * n_steps:
        raise BasisError(
            f"stream saw {state.v.shape[0]} columns, expected n_mu*N_t = {n_mu * n_steps}"
        )
    temporal = []
    for i in range(n_s):
        t_i = temporal_snapshots(state.v, i, n_steps, n_mu)
        w_i, sigma_i, _ = linalg.thin_svd(t_i)
        rank_i = int(np.sum(sigma_i > max(t_i.shape) * np.finfo(float).eps * sigma_i[0]))
        if n_t > rank_i:
            raise BasisError(
                f"temporal snapshots of mode {i} have rank {rank_i}, cannot supply n_t={n_t}"
            )
        temporal.append(w_i[:, :n_t])
    return BasisSet(phi_s=state.phi[:, :n_s].copy(), temporal=tuple(temporal), n_mu=n_mu)


def basis_set_from_pod(
    u: np.ndarray, n_s: int, n_t: int, n_steps: int, n_mu: int
) -> BasisSet:
    """Batch-POD twin of :func:`build_basis_set`, used as its oracle."""
    phi_s, _, v = batch_pod(u, n_s)
    temporal = []
    for i in range(n_s):
        t_i = temporal_snapshots(v, i, n_steps, n_mu)
        w_i, _, _ = linalg.thin_svd(t_i)
        temporal.append(w_i[:, :n_t])
    return BasisSet(phi_s=phi_s, temporal=tuple(temporal), n_mu=n_mu)
