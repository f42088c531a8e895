"""The five-state, two-input benchmark plant with input bounds and l1 input cost."""
import numpy as np

from .problem import ProblemSpec
from .prox import ScaledL1

B_MATRIX = np.array([[0.0, 0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0, 0.0]]).T
X_INIT = np.array([6.0, -8.0, 3.0, -2.0, 5.0])


def drift(x):
    x1, x2, x3, x4, x5 = x
    return np.array([
        x3,
        x4,
        -0.1 * x1 - 0.1 * np.cosh(0.1 * x2) * x3,
        -0.2 * x2 - 0.2 * np.cosh(0.1 * x1) * x4 + 0.1 * x4,
        -0.3 * x5 + np.tanh(x3) + np.tanh(x4),
    ])


def drift_jacobian(x):
    x1, x2, x3, x4, _ = x
    J = np.zeros((5, 5))
    J[0, 2] = 1.0
    J[1, 3] = 1.0
    J[2, 0] = -0.1
    J[2, 1] = -0.01 * np.sinh(0.1 * x2) * x3
    J[2, 2] = -0.1 * np.cosh(0.1 * x2)
    J[3, 0] = -0.02 * np.sinh(0.1 * x1) * x4
    J[3, 1] = -0.2
    J[3, 3] = -0.2 * np.cosh(0.1 * x1) + 0.1
    J[4, 2] = 1.0 / np.cosh(x3) ** 2
    J[4, 3] = 1.0 / np.cosh(x4) ** 2
    J[4, 4] = -0.3
    return J


def drift_weighted_hessian(x, p):
    """``sum_j p_j * Hessian(drift_j)(x)``."""
    x1, x2, x3, x4, _ = x
    H = np.zeros((5, 5))
    # component 3: -0.1 cosh(0.1 x2) x3
    H[1, 1] += p[2] * -0.001 * np.cosh(0.1 * x2) * x3
    H[1, 2] += p[2] * -0.01 * np.sinh(0.1 * x2)
    H[2, 1] += p[2] * -0.01 * np.sinh(0.1 * x2)
    # component 4: -0.2 cosh(0.1 x1) x4
    H[0, 0] += p[3] * -0.002 * np.cosh(0.1 * x1) * x4
    H[0, 3] += p[3] * -0.02 * np.sinh(0.1 * x1)
    H[3, 0] += p[3] * -0.02 * np.sinh(0.1 * x1)
    # component 5: tanh(x3) + tanh(x4)
    H[2, 2] += p[4] * -2.0 * np.tanh(x3) / np.cosh(x3) ** 2
    H[3, 3] += p[4] * -2.0 * np.tanh(x4) / np.cosh(x4) ** 2
    return H


def example_plant(dt=0.05, horizon=60, weight=4.0, bound=1.0):
    """Build the benchmark :class:`ProblemSpec`.

    Dynamics ``x + dt * drift(x) + dt * B u``, stage cost
    ``x'x / 2 + u'u``, terminal cost ``x'x / 10``, box bounds
    ``|u_i| <= bound`` written as four inequalities and ``weight * ||u||_1``.
    """
    n, m = 5, 2
    I5 = np.eye(n)
    Bd = dt * B_MATRIX
    G = np.vstack([np.eye(m), -np.eye(m)])

    def dynamics(x, u):
        return x + dt * drift(x) + Bd @ u

    def hessian(x, u, mu, nu, p):
        return I5 + dt * drift_weighted_hessian(x, p), np.zeros((n, m)), 2.0 * np.eye(m)

    return ProblemSpec(
        n=n,
        m=m,
        horizon=horizon,
        dynamics=dynamics,
        dynamics_jac_x=lambda x, u: I5 + dt * drift_jacobian(x),
        dynamics_jac_u=lambda x, u: Bd,
        stage_cost=lambda x, u: 0.5 * x @ x + u @ u,
        stage_cost_grad_x=lambda x, u: np.array(x, dtype=float),
        stage_cost_grad_u=lambda x, u: 2.0 * np.asarray(u, dtype=float),
        terminal_cost=lambda x: 0.1 * x @ x,
        terminal_cost_grad=lambda x: 0.2 * np.asarray(x, dtype=float),
        terminal_cost_hess=lambda x: 0.2 * I5,
        n_ineq=2 * m,
        ineq=lambda u: np.concatenate([u - bound, -u - bound]),
        ineq_jac=lambda u: G,
        regularizer=ScaledL1(weight),
        hamiltonian_hessian=hessian,
    )
