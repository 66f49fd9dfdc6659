"""Oracle suites: every reduced-path result re-derived an independent way.

Each suite pits an optimized code path against a brute-force or
first-principles computation (explicit Kronecker assembly, batch SVD,
all-at-once sparse solves, dense norms) and reports the worst residual it
measured.  The CLI `verify` command runs them all; the acceptance tests
call them individually.
"""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import linalg, persist
from .basis import BasisSet, build_basis_set, ingest_simulation, isvd_init
from .bounds import operator_norm, residual_error_bound, rom_error_bound, space_time_error_bound
from .problems import ProblemSpec, make_system
from .spatial import build_spatial_rom, reconstruct_states, srom_march
from .spacetime import (
    build_st_init,
    build_st_input,
    build_st_matrix,
    build_st_rom,
    explicit_st_basis,
    reconstruct_states as st_reconstruct,
    solve_st_rom,
)
from .system import LinearDynamicalSystem, TimeGrid, assemble_st, fom_march, snapshot_matrix


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    worst: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: worst residual {self.worst:.3e} vs {self.threshold:.1e}{extra}"


def _random_orthonormal(rng, rows, cols):
    q, _ = linalg.qr(rng.standard_normal((rows, cols)))
    return q


def random_basis_set(rng, n_states, n_steps, n_s, n_t) -> BasisSet:
    return BasisSet(
        phi_s=_random_orthonormal(rng, n_states, n_s),
        temporal=tuple(_random_orthonormal(rng, n_steps, n_t) for _ in range(n_s)),
        n_mu=max(n_t, 1),
    )


def random_stable_system(rng, n_states, n_inputs=1) -> LinearDynamicalSystem:
    a = rng.standard_normal((n_states, n_states))
    a -= (np.abs(a).sum(axis=1).max() + 0.5) * np.eye(n_states)
    fs = {}

    def signal(k):
        if k not in fs:
            fs[k] = np.asarray(sig_rng.standard_normal(n_inputs))
        return fs[k]

    sig_rng = np.random.default_rng(rng.integers(2**63))
    return LinearDynamicalSystem(
        a=sp.csr_array(a),
        b=sp.csr_array(rng.standard_normal((n_states, n_inputs))),
        c=rng.standard_normal((n_states, 1)),
        x0=rng.standard_normal(n_states),
        input_signal=signal,
    )


def suite_kron_identities(seed: int = 0, trials: int = 100) -> SuiteResult:
    """Inverse, transpose, mixed-product, and both distributive identities."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m, n, k, l = rng.integers(2, 5, size=4)
        a = rng.standard_normal((m, m)) + 2.0 * np.eye(m)
        b = rng.standard_normal((k, k)) + 2.0 * np.eye(k)
        c = rng.standard_normal((m, n))
        d = rng.standard_normal((k, l))
        e = rng.standard_normal((m, n))
        ab = linalg.kron(a, b)
        worst = max(
            worst,
            np.max(np.abs(np.linalg.inv(ab) - linalg.kron(np.linalg.inv(a), np.linalg.inv(b)))),
            np.max(np.abs(ab.T - linalg.kron(a.T, b.T))),
            np.max(np.abs(ab @ linalg.kron(c, d) - linalg.kron(a @ c, b @ d))),
            np.max(np.abs(linalg.kron(c + e, b) - (linalg.kron(c, b) + linalg.kron(e, b)))),
            np.max(np.abs(linalg.kron(b, c + e) - (linalg.kron(b, c) + linalg.kron(b, e)))),
        )
    return SuiteResult("kron-identities", worst <= 1e-12, worst, 1e-12, f"{trials} trials")


def suite_isvd_vs_batch(seed: int = 0, rows: int = 200, cols: int = 40) -> SuiteResult:
    """Stream a random matrix with zero tolerances; singular values must match batch."""
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((rows, cols))
    start = time.perf_counter()
    state = isvd_init(m[:, 0], tol_svd=0.0)
    state = ingest_simulation(state, m[:, 1:])
    elapsed = time.perf_counter() - start
    _, sigma, _ = linalg.thin_svd(m)
    worst = float(np.max(np.abs(state.sigma - sigma) / sigma))
    passed = worst <= 1e-8 and elapsed < 2.0
    return SuiteResult(
        "isvd-vs-batch", passed, worst, 1e-8, f"{rows}x{cols}, {elapsed:.3f}s"
    )


def suite_block_assembly(
    seed: int = 0,
    trials: int = 20,
    n_states: int = 12,
    n_steps: int = 8,
    n_s: int = 3,
    n_t: int = 2,
    perturb: float = 0.0,
) -> SuiteResult:
    """Block-structured reduced operators vs explicit Kronecker-basis projection.

    ``perturb`` shifts one entry of the block-assembled matrix before the
    comparison; the suite must then fail (sensitivity check).
    """
    worst = 0.0
    for trial in range(trials):
        rng = np.random.default_rng(seed + trial)
        sys_ = random_stable_system(rng, n_states, n_inputs=2)
        grid = TimeGrid(rng.uniform(0.01, 0.1, n_steps))
        basis = random_basis_set(rng, n_states, n_steps, n_s, n_t)
        srom = build_spatial_rom(sys_, basis, ref_mode="zero")

        phi_st = explicit_st_basis(basis)
        a_st, f_st, x0_st = assemble_st(sys_, grid)
        a_ref = phi_st.T @ (a_st @ phi_st)
        a_blk = build_st_matrix(srom, basis, grid)
        if perturb:
            a_blk = a_blk.copy()
            a_blk[0, 0] += perturb
        worst = max(worst, float(np.max(np.abs(a_ref - a_blk))))
        f_blk = build_st_input(srom, basis, grid, sys_.input_signal)
        worst = max(worst, float(np.max(np.abs(phi_st.T @ f_st - f_blk))))
        i_blk = build_st_init(srom, basis)
        worst = max(worst, float(np.max(np.abs(phi_st.T @ x0_st - i_blk))))
    return SuiteResult("block-assembly", worst <= 1e-11, worst, 1e-11, f"{trials} seeds")


def _fom_vs_st_case(spec: ProblemSpec, param: dict, dt: float, n_steps: int) -> float:
    sys_ = make_system(spec, param)
    grid = TimeGrid.uniform(dt, n_steps)
    marched = fom_march(sys_, grid).states
    a_st, f_st, x0_st = assemble_st(sys_, grid)
    direct = spla.spsolve(sp.csc_matrix(a_st), f_st + x0_st)
    return float(np.max(np.abs(direct.reshape(n_steps, -1).T - marched)))


def suite_fom_vs_spacetime(seed: int = 0) -> SuiteResult:
    """Time marching vs the all-at-once space-time solve, every generator."""
    cases = [
        (ProblemSpec(kind="heat1d", nx=50), {"kappa": 1.3}, 0.01, 40),
        (ProblemSpec(kind="advdiff2d", nx=8, ny=8), {"kappa": 0.8, "vx": 1.5, "vy": -0.7}, 0.02, 50),
        (ProblemSpec(kind="transport1d", nx=16, n_dir=4), {"sigma_t": 1.2, "sigma_s": 0.6}, 0.05, 50),
    ]
    worst = 0.0
    for spec, param, dt, n_steps in cases:
        worst = max(worst, _fom_vs_st_case(spec, param, dt, n_steps))
    return SuiteResult("fom-vs-spacetime", worst <= 1e-9, worst, 1e-9, "3 generators")


def suite_bound_dominance(seed: int = 0, configs: int = 20) -> SuiteResult:
    """All three bounds must dominate the measured error on random reduced runs."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst_margin = np.inf
    for i in range(configs):
        if i % 2 == 0:
            spec = ProblemSpec(kind="heat1d", nx=int(rng.integers(8, 25)))
            param = {"kappa": float(rng.uniform(0.3, 3.0))}
        else:
            spec = ProblemSpec(
                kind="transport1d",
                nx=int(rng.integers(6, 13)),
                n_dir=int(rng.choice([2, 4])),
            )
            sigma_t = float(rng.uniform(0.5, 2.0))
            param = {"sigma_t": sigma_t, "sigma_s": float(rng.uniform(0.0, sigma_t))}
        sys_ = make_system(spec, param)
        a_norm = operator_norm(sys_.a, seed=seed + i)
        n_steps = int(rng.integers(8, 17))
        grid = TimeGrid.uniform(0.5 / a_norm, n_steps)

        fom = fom_march(sys_, grid)
        state = isvd_init(fom.states[:, 0], tol_svd=0.0)
        state = ingest_simulation(state, fom.states[:, 1:])
        n_s = min(int(rng.integers(2, 5)), state.rank)
        basis = build_basis_set(state, n_s, 1, n_steps, 1)

        srom = build_spatial_rom(sys_, basis, ref_mode="zero")
        srom_states = reconstruct_states(
            srom, basis, srom_march(srom, grid, sys_.input_signal)
        )
        st_rom = build_st_rom(srom, basis, grid, sys_.input_signal, sys_.constant_input)
        strom_states = st_reconstruct(basis, solve_st_rom(st_rom))

        reports = [
            residual_error_bound(sys_, grid, srom_states, fom_states=fom.states, seed=seed),
            rom_error_bound(sys_, grid, srom_states, fom_states=fom.states, seed=seed),
            space_time_error_bound(
                sys_, grid, strom_states.T.ravel(), fom_states=fom.states, seed=seed
            ),
        ]
        for rep in reports:
            if not rep.valid:
                failures += 1
            with np.errstate(invalid="ignore", divide="ignore"):
                margin = np.min(rep.step_bounds / np.maximum(rep.step_errors, 1e-300))
            worst_margin = min(worst_margin, float(margin))
    passed = failures == 0
    return SuiteResult(
        "bound-dominance",
        passed,
        worst_margin,
        1.0,
        f"{configs} configs, {failures} violations; worst bound/error margin",
    )


def suite_persist_roundtrip(seed: int = 0, shapes: int = 50) -> SuiteResult:
    """Bit-identical round-trips plus rejection of corrupted headers/payloads."""
    rng = np.random.default_rng(seed)
    failures = []
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.strommat")
        for _ in range(shapes):
            rows, cols = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            m = rng.standard_normal((rows, cols))
            persist.write_matrix(path, m)
            back = persist.read_matrix(path)
            if back.shape != m.shape or back.tobytes() != m.tobytes():
                failures.append(f"round-trip mismatch at {rows}x{cols}")

        m = rng.standard_normal((5, 3))
        persist.write_matrix(path, m)
        blob = open(path, "rb").read()

        def expect_reject(label, data):
            with open(path, "wb") as fh:
                fh.write(data)
            try:
                persist.read_matrix(path)
                failures.append(f"{label} not detected")
            except persist.MatrixFileError:
                pass

        expect_reject("bad magic", b"XTROMMAT" + blob[8:])
        expect_reject("bad version", blob[:8] + b"\x09\x00\x00\x00" + blob[12:])
        expect_reject("truncated payload", blob[:-8])
        expect_reject("padded payload", blob + b"\x00" * 8)
        expect_reject("short header", blob[:12])
        nan_bytes = np.array([np.nan]).tobytes()
        expect_reject("non-finite payload", blob[:-8] + nan_bytes)
    worst = float(len(failures))
    return SuiteResult(
        "persist-roundtrip", not failures, worst, 0.0, "; ".join(failures) or f"{shapes} shapes"
    )


def run_all(seed: int = 0) -> list[SuiteResult]:
    return [
        suite_kron_identities(seed),
        suite_isvd_vs_batch(seed),
        suite_block_assembly(seed),
        suite_fom_vs_spacetime(seed),
        suite_bound_dominance(seed),
        suite_persist_roundtrip(seed),
    ]
