import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from strom import system
from strom.problems import ProblemSpec, make_heat1d
from strom.system import LinearDynamicalSystem, TimeGrid


def _simple_system(a, b=None, x0=None, inputs=None, n_in=1):
    a = sp.csr_array(np.atleast_2d(np.asarray(a, dtype=float)))
    n = a.shape[0]
    b = sp.csr_array(np.zeros((n, n_in)) if b is None else np.atleast_2d(b))
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    signal = inputs if inputs is not None else (lambda k: np.zeros(b.shape[1]))
    return LinearDynamicalSystem(a, b, np.ones((n, 1)), x0, signal)


class TestTimeGrid:
    def test_uniform(self):
        grid = TimeGrid.uniform(0.1, 4)
        assert grid.n_steps == 4
        assert grid.total_time == pytest.approx(0.4)
        np.testing.assert_allclose(grid.times, [0.1, 0.2, 0.3, 0.4])
        assert grid.is_uniform

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            TimeGrid(np.array([0.1, 0.0]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            TimeGrid(np.array([]))


class TestBackwardEulerStep:
    def test_frozen_dynamics(self):
        sys_ = _simple_system(np.zeros((3, 3)))
        x_prev = np.array([1.0, -2.0, 0.5])
        out = system.backward_euler_step(sys_, 0.3, x_prev, np.zeros(1))
        np.testing.assert_allclose(out, x_prev)

    def test_scalar_arithmetic(self):
        # (1 - 1*(-1)) x = 2  =>  x = 1
        sys_ = _simple_system([[-1.0]])
        out = system.backward_euler_step(sys_, 1.0, np.array([2.0]), np.zeros(1))
        np.testing.assert_allclose(out, [1.0])

    def test_matches_dense_lu(self):
        rng = np.random.default_rng(0)
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=3), {"kappa": 1.0})
        x_prev = rng.standard_normal(3)
        f = rng.standard_normal(1)
        dt = 0.05
        out = system.backward_euler_step(sys_, dt, x_prev, f)
        dense = np.eye(3) - dt * sys_.a.toarray()
        expected = np.linalg.solve(dense, x_prev + dt * (sys_.b.toarray() @ f))
        assert np.linalg.norm(out - expected) <= 1e-10 * np.linalg.norm(expected)


class TestFomMarch:
    def test_single_step_is_one_solve(self):
        sys_ = _simple_system([[-2.0]], b=[[1.0]], inputs=lambda k: np.array([1.0]))
        grid = TimeGrid.uniform(0.5, 1)
        res = system.fom_march(sys_, grid)
        one = system.backward_euler_step(sys_, 0.5, sys_.x0, np.array([1.0]))
        np.testing.assert_allclose(res.states[:, 0], one)

    def test_constant_solution(self):
        x0 = np.array([2.0, -1.0])
        sys_ = _simple_system(np.zeros((2, 2)), x0=x0)
        res = system.fom_march(sys_, TimeGrid.uniform(0.2, 6))
        for k in range(6):
            np.testing.assert_allclose(res.states[:, k], x0)

    def test_outputs_and_wall_time(self):
        sys_ = _simple_system(np.zeros((2, 2)), x0=np.array([1.0, 3.0]))
        res = system.fom_march(sys_, TimeGrid.uniform(0.1, 3))
        np.testing.assert_allclose(res.outputs[0], [4.0, 4.0, 4.0])
        assert res.wall_time >= 0.0

    def test_heat1d_vs_explicit_spacetime(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=32), {"kappa": 1.0})
        grid = TimeGrid.uniform(0.01, 16)
        res = system.fom_march(sys_, grid)
        a_st, f_st, x0_st = system.assemble_st(sys_, grid)
        direct = spla.spsolve(sp.csc_matrix(a_st), f_st + x0_st)
        assert np.max(np.abs(direct.reshape(16, 32).T - res.states)) <= 1e-9


class TestAssembleSt:
    def test_single_block(self):
        sys_ = _simple_system([[-1.0]], b=[[2.0]], inputs=lambda k: np.array([3.0]))
        a_st, f_st, x0_st = system.assemble_st(sys_, TimeGrid.uniform(0.5, 1))
        np.testing.assert_allclose(a_st.toarray(), [[1.5]])
        np.testing.assert_allclose(f_st, [3.0])  # dt * B * f
        np.testing.assert_allclose(x0_st, [0.0])

    def test_zero_a_structure(self):
        sys_ = _simple_system(np.zeros((2, 2)))
        a_st, _, _ = system.assemble_st(sys_, TimeGrid.uniform(0.3, 2))
        expected = np.block(
            [[np.eye(2), np.zeros((2, 2))], [-np.eye(2), np.eye(2)]]
        )
        np.testing.assert_array_equal(a_st.toarray(), expected)

    def test_solve_matches_march(self):
        rng = np.random.default_rng(1)
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=8), {"kappa": 0.7})
        grid = TimeGrid(rng.uniform(0.01, 0.05, 5))
        a_st, f_st, x0_st = system.assemble_st(sys_, grid)
        direct = spla.spsolve(sp.csc_matrix(a_st), f_st + x0_st)
        res = system.fom_march(sys_, grid)
        assert np.max(np.abs(direct.reshape(5, 8).T - res.states)) <= 1e-9

    def test_cap_refusal(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=200), {"kappa": 1.0})
        with pytest.raises(system.CapExceededError, match="verification"):
            system.assemble_st(sys_, TimeGrid.uniform(0.01, 200))


class TestStApplyInverse:
    def test_zero_a_bidiagonal_substitution(self):
        sys_ = _simple_system(np.zeros((2, 2)))
        grid = TimeGrid.uniform(0.4, 2)
        b1 = np.array([1.0, 2.0])
        b2 = np.array([-1.0, 3.0])
        out = system.st_apply_inverse(sys_, grid, np.concatenate([b1, b2]))
        np.testing.assert_allclose(out, np.concatenate([b1, b1 + b2]))

    def test_single_block_is_one_solve(self):
        sys_ = _simple_system([[-4.0]])
        grid = TimeGrid.uniform(0.25, 1)
        out = system.st_apply_inverse(sys_, grid, np.array([2.0]))
        np.testing.assert_allclose(out, [1.0])  # (1 + 0.25*4) x = 2

    def test_adjoint_consistency(self):
        rng = np.random.default_rng(2)
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=6), {"kappa": 1.0})
        grid = TimeGrid(rng.uniform(0.01, 0.08, 4))
        v = rng.standard_normal(24)
        w = rng.standard_normal(24)
        lhs = np.dot(system.st_apply_inverse(sys_, grid, v), w)
        rhs = np.dot(v, system.st_apply_inverse_adjoint(sys_, grid, w))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_matches_dense_inverse(self):
        rng = np.random.default_rng(3)
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=5), {"kappa": 0.9})
        grid = TimeGrid(rng.uniform(0.02, 0.06, 3))
        a_st, _, _ = system.assemble_st(sys_, grid)
        v = rng.standard_normal(15)
        np.testing.assert_allclose(
            system.st_apply_inverse(sys_, grid, v),
            np.linalg.solve(a_st.toarray(), v),
            atol=1e-9,
        )
        np.testing.assert_allclose(
            system.st_apply_inverse_adjoint(sys_, grid, v),
            np.linalg.solve(a_st.toarray().T, v),
            atol=1e-9,
        )


class TestResiduals:
    def test_fom_iterates_have_zero_step_residual(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=12), {"kappa": 1.2})
        grid = TimeGrid.uniform(0.02, 8)
        res = system.fom_march(sys_, grid)
        x_prev = sys_.x0
        for k in range(8):
            r = system.step_residual(
                sys_, 0.02, res.states[:, k], x_prev, sys_.input_signal(k + 1)
            )
            assert np.linalg.norm(r) <= 1e-9 * max(1.0, np.linalg.norm(res.states[:, k]))
            x_prev = res.states[:, k]

    def test_frozen_zero_residual(self):
        sys_ = _simple_system(np.zeros((3, 3)))
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(
            system.step_residual(sys_, 0.1, x, x, np.zeros(1)), np.zeros(3)
        )

    def test_extended_precision_recompute(self):
        rng = np.random.default_rng(4)
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=10), {"kappa": 1.0})
        dt = 0.03
        x_k = rng.standard_normal(10)
        x_prev = rng.standard_normal(10)
        f = rng.standard_normal(1)
        got = system.step_residual(sys_, dt, x_k, x_prev, f)
        a_ld = sys_.a.toarray().astype(np.longdouble)
        b_ld = sys_.b.toarray().astype(np.longdouble)
        expected = (
            x_k.astype(np.longdouble)
            - x_prev.astype(np.longdouble)
            - dt * (a_ld @ x_k.astype(np.longdouble))
            - dt * (b_ld @ f.astype(np.longdouble))
        )
        np.testing.assert_allclose(got, expected.astype(float), atol=1e-12)

    def test_st_residual_zero_on_exact_solution(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=9), {"kappa": 0.8})
        grid = TimeGrid.uniform(0.04, 6)
        states = system.fom_march(sys_, grid).states
        r = system.st_residual(sys_, grid, states.T.ravel())
        assert np.max(np.abs(r)) <= 1e-9

    def test_st_residual_single_step_equals_step_residual(self):
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=7), {"kappa": 1.0})
        grid = TimeGrid.uniform(0.05, 1)
        x = np.random.default_rng(5).standard_normal(7)
        np.testing.assert_allclose(
            system.st_residual(sys_, grid, x),
            system.step_residual(sys_, 0.05, x, sys_.x0, sys_.input_signal(1)),
        )

    def test_st_residual_matches_explicit_assembly(self):
        rng = np.random.default_rng(6)
        sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=6), {"kappa": 1.1})
        grid = TimeGrid(rng.uniform(0.01, 0.09, 4))
        xst = rng.standard_normal(24)
        a_st, f_st, x0_st = system.assemble_st(sys_, grid)
        expected = a_st @ xst - f_st - x0_st
        np.testing.assert_allclose(
            system.st_residual(sys_, grid, xst), expected, atol=1e-11
        )


def test_st_inverse_of_rhs_reproduces_march():
    sys_ = make_heat1d(ProblemSpec(kind="heat1d", nx=14), {"kappa": 1.0})
    grid = TimeGrid.uniform(0.02, 10)
    _, f_st, x0_st = system.assemble_st(sys_, grid)
    states = system.fom_march(sys_, grid).states
    recovered = system.st_apply_inverse(sys_, grid, f_st + x0_st)
    assert np.max(np.abs(recovered.reshape(10, 14).T - states)) <= 1e-10
