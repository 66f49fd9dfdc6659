import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from dataclasses import replace

from strom import problems, system
from strom.problems import ProblemSpec


class TestHeat1d:
    def test_stencil_values(self):
        sys_ = problems.make_heat1d(ProblemSpec(kind="heat1d", nx=3), {"kappa": 1.0})
        a = sys_.a.toarray()
        np.testing.assert_allclose(np.diag(a), [-32.0, -32.0, -32.0])
        np.testing.assert_allclose(np.diag(a, 1), [16.0, 16.0])
        np.testing.assert_allclose(np.diag(a, -1), [16.0, 16.0])

    def test_rejects_nonpositive_kappa(self):
        with pytest.raises(ValueError):
            problems.make_heat1d(ProblemSpec(kind="heat1d", nx=4), {"kappa": 0.0})

    def test_eigenvalues_negative(self):
        sys_ = problems.make_heat1d(ProblemSpec(kind="heat1d", nx=64), {"kappa": 2.0})
        a = sys_.a.toarray()
        # Gershgorin: every disc is centered at -2s with radius <= 2s
        s = 2.0 * 65.0**2
        assert np.all(np.diag(a) == -2.0 * s)
        eigs = np.linalg.eigvalsh(a)
        assert np.all(eigs < 0.0)

    def test_output_is_mean(self):
        sys_ = problems.make_heat1d(ProblemSpec(kind="heat1d", nx=5), {"kappa": 1.0})
        x = np.arange(1.0, 6.0)
        np.testing.assert_allclose(sys_.c.T @ x, [3.0])


class TestAdvDiff2d:
    def test_zero_velocity_is_superposed_heat_stencils(self):
        spec = ProblemSpec(kind="advdiff2d", nx=4, ny=3)
        sys_ = problems.make_advdiff2d(spec, {"kappa": 1.0, "vx": 0.0, "vy": 0.0})
        a = sys_.a.toarray()
        hx, hy = 1 / 5, 1 / 4
        i = 1 * 4 + 1  # interior node (ix=1, iy=1)
        assert a[i, i] == pytest.approx(-2 / hx**2 - 2 / hy**2)
        assert a[i, i - 1] == a[i, i + 1] == pytest.approx(1 / hx**2)
        assert a[i, i - 4] == a[i, i + 4] == pytest.approx(1 / hy**2)

    def test_upwind_signs_follow_velocity(self):
        spec = ProblemSpec(kind="advdiff2d", nx=3, ny=3)
        kappa = 1e-12
        hx = hy = 0.25
        center = 1 * 3 + 1
        pos = problems.make_advdiff2d(spec, {"kappa": kappa, "vx": 2.0, "vy": 1.0})
        a = pos.a.toarray()
        assert a[center, center - 1] == pytest.approx(2.0 / hx, rel=1e-6)  # west feeds in
        assert a[center, center - 3] == pytest.approx(1.0 / hy, rel=1e-6)  # south feeds in
        assert a[center, center + 1] == pytest.approx(kappa / hx**2)
        neg = problems.make_advdiff2d(spec, {"kappa": kappa, "vx": -2.0, "vy": -1.0})
        a = neg.a.toarray()
        assert a[center, center + 1] == pytest.approx(2.0 / hx, rel=1e-6)  # east feeds in
        assert a[center, center + 3] == pytest.approx(1.0 / hy, rel=1e-6)  # north feeds in

    def test_symmetric_part_negative_definite(self):
        spec = ProblemSpec(kind="advdiff2d", nx=8, ny=8)
        sys_ = problems.make_advdiff2d(spec, {"kappa": 0.5, "vx": 1.0, "vy": -0.5})
        a = sys_.a.toarray()
        eigs = np.linalg.eigvalsh(0.5 * (a + a.T))
        assert np.all(eigs < 0.0)

    def test_rejects_bad_coefficients(self):
        spec = ProblemSpec(kind="advdiff2d", nx=3, ny=3)
        with pytest.raises(ValueError):
            problems.make_advdiff2d(spec, {"kappa": -1.0})
        with pytest.raises(ValueError):
            problems.make_advdiff2d(spec, {"kappa": 1.0, "vx": np.inf})


class TestTransport1d:
    def test_two_point_quadrature(self):
        mu, w = problems.gauss_legendre_directions(2)
        np.testing.assert_allclose(np.sort(mu), [-1 / np.sqrt(3), 1 / np.sqrt(3)])
        np.testing.assert_allclose(w, [0.5, 0.5])

    def test_weights_normalized(self):
        for n in (2, 4, 8):
            _, w = problems.gauss_legendre_directions(n)
            assert w.sum() == pytest.approx(1.0)

    def test_rejects_odd_direction_count(self):
        with pytest.raises(ValueError):
            problems.gauss_legendre_directions(3)
        with pytest.raises(ValueError):
            problems.make_transport1d(
                ProblemSpec(kind="transport1d", nx=4, n_dir=3), {}
            )

    def test_rejects_supercritical_scattering(self):
        spec = ProblemSpec(kind="transport1d", nx=4, n_dir=2)
        with pytest.raises(ValueError):
            problems.make_transport1d(spec, {"sigma_t": 0.5, "sigma_s": 0.6})

    def test_no_scattering_decouples_directions(self):
        spec = ProblemSpec(kind="transport1d", nx=5, n_dir=4)
        sys_ = problems.make_transport1d(spec, {"sigma_t": 1.0, "sigma_s": 0.0})
        a = sys_.a.toarray()
        nz = 5
        for l1 in range(4):
            for l2 in range(4):
                block = a[l1 * nz : (l1 + 1) * nz, l2 * nz : (l2 + 1) * nz]
                if l1 != l2:
                    assert np.max(np.abs(block)) == 0.0

    def test_steady_state_matches_dense_solve(self):
        spec = ProblemSpec(kind="transport1d", nx=10, n_dir=4)
        param = {"sigma_t": 1.0, "sigma_s": 0.5}
        sys_ = problems.make_transport1d(spec, param)
        h, scatter = problems.transport_collision_operators(spec, param)
        q = sys_.b.toarray()[:, 0] / spec.speed  # raw source vector
        steady = spla.spsolve(sp.csc_matrix(h - scatter), q)
        marched = system.fom_march(sys_, system.TimeGrid.uniform(0.5, 120)).states[:, -1]
        assert np.max(np.abs(marched - steady)) <= 1e-6

    def test_pure_streaming_decays(self):
        spec = ProblemSpec(kind="transport1d", nx=8, n_dir=2, source=0.0)
        sys_ = problems.make_transport1d(spec, {"sigma_t": 0.0, "sigma_s": 0.0})
        rng = np.random.default_rng(0)
        sys_ = replace(sys_, x0=rng.uniform(0.5, 1.0, sys_.n_states))
        res = system.fom_march(sys_, system.TimeGrid.uniform(0.1, 30))
        norms = np.concatenate([[np.linalg.norm(sys_.x0)], np.linalg.norm(res.states, axis=0)])
        assert np.all(np.diff(norms) <= 1e-12)


class TestGeneratorContracts:
    @pytest.mark.parametrize(
        "spec,param",
        [
            (ProblemSpec(kind="heat1d", nx=40), {"kappa": 1.7}),
            (ProblemSpec(kind="advdiff2d", nx=7, ny=6), {"kappa": 0.9, "vx": 1.0, "vy": 0.3}),
            (ProblemSpec(kind="transport1d", nx=12, n_dir=4), {"sigma_t": 1.0, "sigma_s": 1.0}),
        ],
    )
    def test_stability(self, spec, param):
        sys_ = problems.make_system(spec, param)
        eigs = np.linalg.eigvals(sys_.a.toarray())
        assert np.all(eigs.real < 0.0)

    def test_determinism(self):
        spec = ProblemSpec(kind="transport1d", nx=9, n_dir=4)
        param = {"sigma_t": 1.3, "sigma_s": 0.4}
        s1 = problems.make_system(spec, param)
        s2 = problems.make_system(spec, param)
        assert s1.a.toarray().tobytes() == s2.a.toarray().tobytes()
        assert s1.b.toarray().tobytes() == s2.b.toarray().tobytes()
        assert s1.c.tobytes() == s2.c.tobytes()

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ValueError, match="does not take"):
            problems.make_system(ProblemSpec(kind="heat1d", nx=4), {"sigma_t": 1.0})

    def test_mesh_count_floor(self):
        with pytest.raises(ValueError):
            ProblemSpec(kind="heat1d", nx=1)
