import numpy as np
import pytest

from nsmpc.exceptions import ConfigError, SingularMatrixError
from nsmpc.linalg import (
    LinearSolverConfig,
    gmres_solve,
    jacobian_x1,
    jacobian_z,
    jacobians,
    lu_solve,
)
from nsmpc.plant import X_INIT
from nsmpc.problem import residual
from nsmpc.prox import ScaledL1
from nsmpc.testing import lti_lq_problem, random_lti_lq


def scaled_error(A, B):
    return np.max(np.abs(A - B)) / max(np.max(np.abs(B)), 1.0)


def smooth_point(spec, rng, gamma=0.5, scale=0.3):
    """Random (z, x1) whose prox and FB rows all sit away from their kinks."""
    while True:
        z = rng.normal(size=spec.size) * scale
        x1 = X_INIT + rng.normal(size=5) * 0.1
        Jp = jacobian_z(spec, z, x1, gamma)
        Jf = jacobian_z(spec, z, x1, gamma, mode="finite_difference")
        # FD of a kinked row would differ by O(1); retry rather than hide it
        if scaled_error(Jp, Jf) < 1e-2:
            return z, x1


class TestJacobianZ:
    def test_constant_for_affine_residual(self, rng):
        for _ in range(5):
            spec, _ = random_lti_lq(rng)
            x1 = rng.normal(size=spec.n)
            J0 = jacobian_z(spec, np.zeros(spec.size), x1, 0.5)
            for _ in range(5):
                J = jacobian_z(spec, rng.normal(size=spec.size) * 3, x1, 0.5)
                np.testing.assert_allclose(J, J0, atol=1e-10)

    def test_analytic_matches_fd_on_example(self, plant, rng):
        for _ in range(3):
            z, x1 = smooth_point(plant, rng)
            Ja = jacobian_z(plant, z, x1, 0.5)
            Jf = jacobian_z(plant, z, x1, 0.5, mode="finite_difference")
            assert scaled_error(Ja, Jf) <= 1e-4

    def test_smoothed_analytic_matches_fd(self, plant, rng):
        z = rng.normal(size=plant.size) * 0.3
        Ja = jacobian_z(plant, z, X_INIT, 0.5, smoothing=0.5)
        Jf = jacobian_z(plant, z, X_INIT, 0.5, smoothing=0.5, mode="finite_difference")
        assert scaled_error(Ja, Jf) <= 1e-4

    def test_dead_zone_rows_are_identity(self):
        # |u - gamma J| stays below gamma * w, so the prox row is u itself
        spec = lti_lq_problem(np.eye(2), np.eye(2), np.eye(2), np.eye(2), np.eye(2), 1, regularizer=ScaledL1(10.0))
        J = jacobian_z(spec, np.zeros(2), np.array([0.1, -0.2]), 0.5)
        np.testing.assert_allclose(J, np.eye(2), atol=1e-14)

    def test_matches_residual_slope_in_random_direction(self, rng):
        spec, _ = random_lti_lq(rng, n=3, m=2, horizon=4)
        z = rng.normal(size=spec.size)
        x1 = rng.normal(size=3)
        v = rng.normal(size=spec.size)
        J = jacobian_z(spec, z, x1, 0.3)
        slope = residual(spec, z + v, x1, 0.3) - residual(spec, z, x1, 0.3)
        np.testing.assert_allclose(J @ v, slope, atol=1e-10)


class TestJacobianX1:
    def test_fb_rows_do_not_depend_on_x1(self, plant, rng):
        z = rng.normal(size=plant.size) * 0.3
        Jx = jacobian_x1(plant, z, X_INIT, 0.5)
        fb_rows = np.concatenate([np.arange(k * 6 + 2, k * 6 + 6) for k in range(plant.horizon)])
        np.testing.assert_array_equal(Jx[fb_rows], 0.0)

    def test_zero_when_costs_ignore_state(self):
        spec = lti_lq_problem([[0.9]], [[1.0]], [[0.0]], [[1.0]], [[0.0]], 3)
        np.testing.assert_array_equal(jacobian_x1(spec, np.ones(3), [2.0], 0.5), 0.0)

    def test_matches_fd(self, plant, rng):
        z, x1 = smooth_point(plant, rng)
        Ja = jacobian_x1(plant, z, x1, 0.5)
        Jf = jacobian_x1(plant, z, x1, 0.5, mode="finite_difference")
        assert scaled_error(Ja, Jf) <= 1e-4

    def test_jacobians_returns_both(self, rng):
        spec, _ = random_lti_lq(rng, n=2, m=1, horizon=3)
        z = rng.normal(size=spec.size)
        Jz, Jx = jacobians(spec, z, [1.0, 0.0], 0.5)
        assert Jz.shape == (3, 3) and Jx.shape == (3, 2)


class TestLuSolve:
    def test_identity(self):
        np.testing.assert_array_equal(lu_solve(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_random_system(self, rng):
        A = rng.normal(size=(50, 50)) + 10 * np.eye(50)
        x = rng.normal(size=50)
        np.testing.assert_allclose(lu_solve(A, A @ x), x, rtol=1e-10)

    def test_singular_reports_pivot(self):
        A = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(SingularMatrixError) as exc:
            lu_solve(A, [1.0, 1.0])
        assert exc.value.pivot == 1

    def test_damping_shifts_the_diagonal(self):
        np.testing.assert_allclose(lu_solve(np.zeros((2, 2)), [2.0, 4.0], damping=2.0), [1.0, 2.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            lu_solve(np.eye(3), np.ones(2))


class TestGmres:
    def test_identity_one_iteration(self):
        b = np.arange(1.0, 6.0)
        x, rep = gmres_solve(lambda v: v, b)
        np.testing.assert_allclose(x, b)
        assert rep.iterations == 1 and rep.converged

    def test_diagonal_finite_termination(self):
        D = np.arange(1.0, 21.0)
        x, rep = gmres_solve(lambda v: D * v, np.ones(20), LinearSolverConfig(method="gmres", gmres_tol=1e-12))
        assert rep.converged and rep.iterations <= 20
        np.testing.assert_allclose(x, 1.0 / D, rtol=1e-10)

    def test_zero_rhs(self):
        x, rep = gmres_solve(lambda v: 2 * v, np.zeros(4))
        np.testing.assert_array_equal(x, 0.0)
        assert rep.iterations == 0

    def test_agrees_with_lu(self, rng):
        A = rng.normal(size=(40, 40)) + 8 * np.eye(40)
        b = rng.normal(size=40)
        cfg = LinearSolverConfig(method="gmres", gmres_tol=1e-10, gmres_restart=10, gmres_max_iter=500)
        x, rep = gmres_solve(lambda v: A @ v, b, cfg)
        ref = lu_solve(A, b)
        assert rep.converged
        assert np.linalg.norm(x - ref) / np.linalg.norm(ref) <= 1e-6

    def test_non_convergence_is_reported(self, rng):
        A = rng.normal(size=(30, 30))
        cfg = LinearSolverConfig(method="gmres", gmres_tol=1e-12, gmres_restart=2, gmres_max_iter=4)
        _, rep = gmres_solve(lambda v: A @ v, rng.normal(size=30), cfg)
        assert not rep.converged and rep.iterations == 4

    def test_breakdown_on_singular_operator(self):
        # b has a component outside the range of the projector
        P = np.diag([1.0, 0.0])
        _, rep = gmres_solve(lambda v: P @ v, np.array([1.0, 1.0]))
        assert rep.breakdown and not rep.converged

    def test_matrix_free_directional_difference(self, rng):
        spec, _ = random_lti_lq(rng, n=2, m=2, horizon=3)
        z = rng.normal(size=spec.size)
        x1 = rng.normal(size=2)
        F0 = residual(spec, z, x1, 0.5)
        h = 1e-6

        def apply(v):
            return (residual(spec, z + h * v, x1, 0.5) - F0) / h

        d, rep = gmres_solve(apply, -F0, LinearSolverConfig(method="gmres", gmres_tol=1e-10))
        assert rep.converged
        np.testing.assert_allclose(residual(spec, z + d, x1, 0.5), 0.0, atol=1e-7)


class TestSolverConfig:
    @pytest.mark.parametrize("kwargs", [
        {"method": "qr"}, {"gmres_restart": 0}, {"gmres_tol": 0.0}, {"fd_step": -1.0}, {"damping": -0.1},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            LinearSolverConfig(**kwargs)
