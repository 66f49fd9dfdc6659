"""Dense linear-algebra kernels shared by every other module.

Thin wrappers around LAPACK factorizations plus a matrix-free power
iteration for spectral norms.  All factorizations apply a deterministic
sign convention (largest-magnitude entry of each singular/basis vector
made non-negative) so results are reproducible and comparable across
runs.
"""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
import scipy.linalg


class SingularMatrixError(Exception):
    """Raised when a direct solve hits a pivot too small to trust."""


class ConvergenceError(Exception):
    """Raised when an iterative estimate fails to settle within its cap."""


class AdjointConsistencyError(Exception):
    """Raised when a claimed adjoint map fails the random inner-product probe."""


def _fix_svd_signs(w: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Flip paired columns so each left vector's largest-magnitude entry is >= 0.
    for j in range(w.shape[1]):
        i = int(np.argmax(np.abs(w[:, j])))
        if w[i, j] < 0.0:
            w[:, j] = -w[:, j]
            v[:, j] = -v[:, j]
    return w, v


def thin_svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``m = w @ diag(sigma) @ v.T`` with deterministic signs.

    Returns ``(w, sigma, v)`` where ``w`` is rows x ell, ``v`` is cols x ell,
    ell = min(rows, cols), and ``sigma`` is non-increasing and non-negative.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or min(m.shape) < 1:
        raise ValueError(f"need a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        w, sigma, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    w, v = _fix_svd_signs(w, vt.T.copy())
    return w, sigma, v


def qr(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR factorization with the diagonal of R made non-negative.

    Rank-deficient input still yields a valid factorization (zero diagonal
    entries in R are left untouched).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ValueError(f"need rows >= cols, got shape {m.shape}")
    q, r = np.linalg.qr(m, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs, signs[:, None] * r


def solve_dense(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Raises :class:`SingularMatrixError` naming the offending pivot when a
    diagonal pivot of U falls below ``1e-14 * ||a||_F``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    with warnings.catch_warnings():
        # the pivot check below raises our own error for singular input
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a)
    pivots = np.abs(np.diag(lu))
    floor = 1e-14 * np.linalg.norm(a)
    bad = np.nonzero(pivots <= floor)[0]
    if bad.size:
        raise SingularMatrixError(
            f"matrix numerically singular: pivot {bad[0]} is "
            f"{pivots[bad[0]]:.3e} (floor {floor:.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), b)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product: block (i, j) of the result equals ``a[i, j] * b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("kron factors must be finite")
    return np.kron(a, b)


def largest_singular_value(
    apply: Callable[[np.ndarray], np.ndarray],
    apply_adjoint: Callable[[np.ndarray], np.ndarray],
    dim_in: int,
    dim_out: int,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    seed: int = 0,
) -> float:
    """Estimate the largest singular value of a linear map by power iteration.

    ``apply`` maps R^dim_in -> R^dim_out and ``apply_adjoint`` must be its
    true transpose; this is checked on random probe vectors before iterating.
    The iteration runs on the normal operator A^T A and stops once the
    estimate is stable to ``tol`` (relative) over consecutive sweeps.
    Deterministic for a fixed ``seed``.
    """
    rng = np.random.default_rng(seed)

    for _ in range(3):
        v = rng.standard_normal(dim_in)
        w = rng.standard_normal(dim_out)
        v /= np.linalg.norm(v)
        w /= np.linalg.norm(w)
        lhs = float(np.dot(apply(v), w))
        rhs = float(np.dot(v, apply_adjoint(w)))
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(lhs), abs(rhs)):
            raise AdjointConsistencyError(
                f"<Av, w> = {lhs:.16e} but <v, A^T w> = {rhs:.16e}"
            )

    v = rng.standard_normal(dim_in)
    v /= np.linalg.norm(v)
    sigma = 0.0
    stable = 0
    gap = np.inf
    for _ in range(max_iter):
        t = apply_adjoint(apply(v))
        lam = np.linalg.norm(t)
        if lam == 0.0:
            # Either a zero map or an unlucky start in the null space.
            v = rng.standard_normal(dim_in)
            v /= np.linalg.norm(v)
            t = apply_adjoint(apply(v))
            lam = np.linalg.norm(t)
            if lam == 0.0:
                return 0.0
        new_sigma = float(np.sqrt(lam))
        v = t / lam
        gap = abs(new_sigma - sigma)
        if gap <= tol * max(new_sigma, np.finfo(float).tiny):
            stable += 1
            if stable >= 2:
                return new_sigma
        else:
            stable = 0
        sigma = new_sigma
    raise ConvergenceError(
        f"power iteration failed to converge in {max_iter} iterations "
        f"(last estimate {sigma:.6e}, last gap {gap:.3e})"
    )
