import numpy as np
import pytest
from dataclasses import replace

from strom import basis, linalg, spatial, system
from strom.problems import ProblemSpec, make_heat1d
from strom.system import TimeGrid, fom_march
from strom.verify import random_basis_set, random_stable_system


def _full_basis(n, n_steps=1, n_t=1):
    return basis.BasisSet(
        phi_s=np.eye(n), temporal=tuple(np.ones((n_steps, n_t)) for _ in range(n)), n_mu=1
    )


def _trained_basis(sys_, grid, n_s, n_t=1, n_mu=1):
    states = fom_march(sys_, grid).states
    st = basis.isvd_init(states[:, 0], tol_svd=0.0)
    st = basis.ingest_simulation(st, states[:, 1:])
    return basis.build_basis_set(st, n_s, n_t, grid.n_steps, n_mu)


class TestBuildSpatialRom:
    def test_square_basis_is_similarity(self):
        rng = np.random.default_rng(0)
        sys_ = random_stable_system(rng, 6)
        q, _ = linalg.qr(rng.standard_normal((6, 6)))
        bs = basis.BasisSet(phi_s=q, temporal=tuple(np.ones((1, 1)),) * 6, n_mu=1)
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="zero")
        a = sys_.a.toarray()
        np.testing.assert_allclose(rom.a_hat, q.T @ a @ q, atol=1e-12)
        np.testing.assert_allclose(
            np.sort(np.linalg.eigvals(rom.a_hat).real),
            np.sort(np.linalg.eigvals(a).real),
            atol=1e-8,
        )

    def test_initial_state_reference_zeroes_x0hat(self):
        rng = np.random.default_rng(1)
        sys_ = random_stable_system(rng, 8)
        bs = random_basis_set(rng, 8, 4, 3, 2)
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="initial_state")
        np.testing.assert_array_equal(rom.x0_hat, np.zeros(3))
        np.testing.assert_array_equal(rom.x_ref, sys_.x0)

    def test_triple_product_extended_precision(self):
        rng = np.random.default_rng(2)
        sys_ = random_stable_system(rng, 12)
        bs = random_basis_set(rng, 12, 4, 3, 2)
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="zero")
        phi_ld = bs.phi_s.astype(np.longdouble)
        a_ld = sys_.a.toarray().astype(np.longdouble)
        expected = (phi_ld.T @ a_ld @ phi_ld).astype(float)
        assert np.max(np.abs(rom.a_hat - expected)) <= 1e-12

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(3)
        sys_ = random_stable_system(rng, 5)
        bs = random_basis_set(rng, 6, 4, 2, 1)
        with pytest.raises(ValueError):
            spatial.build_spatial_rom(sys_, bs)

    def test_bad_ref_mode(self):
        rng = np.random.default_rng(4)
        sys_ = random_stable_system(rng, 5)
        bs = random_basis_set(rng, 5, 4, 2, 1)
        with pytest.raises(ValueError):
            spatial.build_spatial_rom(sys_, bs, ref_mode="average")


class TestMarch:
    def test_frozen_dynamics(self):
        rom = spatial.SpatialRom(
            a_hat=np.zeros((2, 2)),
            b_hat=np.zeros((2, 1)),
            c_hat=np.zeros((2, 1)),
            x_ref=np.zeros(4),
            x_ref_hat=np.zeros(2),
            x0_hat=np.array([1.0, -1.0]),
            y_ref=np.zeros(1),
            ref_mode="zero",
        )
        traj = spatial.srom_march(rom, TimeGrid.uniform(0.1, 5), lambda k: np.zeros(1))
        for k in range(5):
            np.testing.assert_allclose(traj[:, k], [1.0, -1.0])

    def test_scalar_recursion(self):
        a, b, f, dt = -0.7, 0.4, 1.3, 0.2
        rom = spatial.SpatialRom(
            a_hat=np.array([[a]]),
            b_hat=np.array([[b]]),
            c_hat=np.ones((1, 1)),
            x_ref=np.zeros(1),
            x_ref_hat=np.zeros(1),
            x0_hat=np.array([0.5]),
            y_ref=np.zeros(1),
            ref_mode="zero",
        )
        traj = spatial.srom_march(rom, TimeGrid.uniform(dt, 4), lambda k: np.array([f]))
        x = 0.5
        for k in range(4):
            x = (x + dt * b * f) / (1.0 - dt * a)
            assert traj[0, k] == pytest.approx(x, rel=1e-14)

    def test_identity_basis_matches_fom(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=7), {"kappa": 1.0})
        grid = TimeGrid.uniform(0.02, 9)
        bs = _full_basis(7, grid.n_steps)
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="zero")
        traj = spatial.srom_march(rom, grid, sys_.input_signal)
        fom = fom_march(sys_, grid).states
        rec = spatial.reconstruct_states(rom, bs, traj)
        assert np.max(np.abs(rec - fom)) <= 1e-9 * max(1.0, np.max(np.abs(fom)))


class TestOutput:
    def test_zero_case(self):
        rng = np.random.default_rng(5)
        sys_ = random_stable_system(rng, 6)
        bs = random_basis_set(rng, 6, 4, 2, 1)
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="zero")
        np.testing.assert_array_equal(spatial.srom_output(rom, np.zeros(2)), np.zeros(1))

    def test_full_basis_output_matches_fom(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=6), {"kappa": 0.9})
        grid = TimeGrid.uniform(0.03, 8)
        bs = _full_basis(6, grid.n_steps)
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="zero")
        traj = spatial.srom_march(rom, grid, sys_.input_signal)
        fom = fom_march(sys_, grid)
        np.testing.assert_allclose(spatial.srom_output(rom, traj), fom.outputs, atol=1e-9)

    def test_selector_output(self):
        rng = np.random.default_rng(6)
        sys_ = random_stable_system(rng, 5)
        selector = np.zeros((5, 1))
        selector[3, 0] = 1.0
        sys_ = replace(sys_, c=selector)
        bs = _full_basis(5)
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="zero")
        x_hat = rng.standard_normal(5)
        got = spatial.srom_output(rom, x_hat)
        np.testing.assert_allclose(got, [(bs.phi_s @ x_hat)[3]], atol=1e-14)


class TestInvariants:
    def test_projection_error_monotone_in_ns(self):
        grid = TimeGrid.uniform(0.02, 12)
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=10), {"kappa": 1.2})
        u = fom_march(sys_, grid).states
        errs = []
        for n_s in (1, 2, 3, 4):
            phi, _, _ = basis.batch_pod(u, n_s)
            errs.append(np.linalg.norm(u - phi @ (phi.T @ u)))
        assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errs, errs[1:]))

    def test_galerkin_residual_orthogonal_to_basis(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=10), {"kappa": 1.0})
        grid = TimeGrid.uniform(0.02, 10)
        bs = _trained_basis(sys_, grid, n_s=3)
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="zero")
        traj = spatial.srom_march(rom, grid, sys_.input_signal)
        rec = spatial.reconstruct_states(rom, bs, traj)
        x_prev = sys_.x0
        for k in range(grid.n_steps):
            r = system.step_residual(
                sys_, float(grid.dt[k]), rec[:, k], x_prev, sys_.input_signal(k + 1)
            )
            assert np.max(np.abs(bs.phi_s.T @ r)) <= 1e-9
            x_prev = rec[:, k]

    def test_exactness_when_span_contains_trajectory(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=9), {"kappa": 1.1})
        grid = TimeGrid.uniform(0.02, 14)
        fom = fom_march(sys_, grid).states
        bs = _trained_basis(sys_, grid, n_s=min(9, np.linalg.matrix_rank(fom)))
        rom = spatial.build_spatial_rom(sys_, bs, ref_mode="initial_state")
        traj = spatial.srom_march(rom, grid, sys_.input_signal)
        rec = spatial.reconstruct_states(rom, bs, traj)
        rel = np.linalg.norm(rec - fom, axis=0) / np.linalg.norm(fom, axis=0)
        assert np.max(rel) <= 1e-9
