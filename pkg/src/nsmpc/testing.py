"""Reference problems and independent oracles used by the test suite and ``nsmpc check``."""
import numpy as np

from .problem import ProblemSpec
from .prox import Zero


def lti_lq_problem(A, B, Q, R, Qf, horizon, regularizer=None):
    """``x+ = A x + B u`` with cost ``x'Qx/2 + u'Ru/2`` per stage and ``x'Qf x/2`` at the end."""
    A, B, Q, R, Qf = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R, Qf))
    n, m = B.shape
    Z_nm = np.zeros((n, m))
    return ProblemSpec(
        n=n,
        m=m,
        horizon=horizon,
        dynamics=lambda x, u: A @ x + B @ u,
        dynamics_jac_x=lambda x, u: A,
        dynamics_jac_u=lambda x, u: B,
        stage_cost=lambda x, u: 0.5 * x @ Q @ x + 0.5 * u @ R @ u,
        stage_cost_grad_x=lambda x, u: Q @ x,
        stage_cost_grad_u=lambda x, u: R @ u,
        terminal_cost=lambda x: 0.5 * x @ Qf @ x,
        terminal_cost_grad=lambda x: Qf @ x,
        terminal_cost_hess=lambda x: Qf,
        hamiltonian_hessian=lambda x, u, mu, nu, p: (Q, Z_nm, R),
        regularizer=Zero() if regularizer is None else regularizer,
    )


def random_lti_lq(rng, n=None, m=None, horizon=None):
    """Random small, well-posed LTI-LQ instance and matrices ``(spec, (A, B, Q, R, Qf))``."""
    n = int(rng.integers(1, 4)) if n is None else n
    m = int(rng.integers(1, 3)) if m is None else m
    horizon = int(rng.integers(1, 6)) if horizon is None else horizon
    A = rng.normal(size=(n, n)) * 0.5 + np.eye(n) * 0.5
    B = rng.normal(size=(n, m))
    Mq = rng.normal(size=(n, n))
    Mr = rng.normal(size=(m, m))
    Mf = rng.normal(size=(n, n))
    Q = Mq @ Mq.T + 0.1 * np.eye(n)
    R = Mr @ Mr.T + 0.5 * np.eye(m)
    Qf = Mf @ Mf.T + 0.1 * np.eye(n)
    return lti_lq_problem(A, B, Q, R, Qf, horizon), (A, B, Q, R, Qf)


def dense_lq_solution(A, B, Q, R, Qf, horizon, x1):
    """Optimal inputs ``(T, m)`` of the LQ problem by condensing it into one dense linear system.

    States are eliminated through ``x^{k} = A^{k-1} x1 + sum_j A^{k-1-j} B u^j``;
    the resulting quadratic in the stacked inputs is minimized directly.
    """
    A, B, Q, R, Qf = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R, Qf))
    n, m = B.shape
    T = horizon
    # Phi[k] maps x1 to x^{k+1}; Gam[k] maps stacked u to x^{k+1} (k = 0..T)
    Phi = np.zeros(((T + 1) * n, n))
    Gam = np.zeros(((T + 1) * n, T * m))
    Phi[:n] = np.eye(n)
    for k in range(1, T + 1):
        Phi[k * n : (k + 1) * n] = A @ Phi[(k - 1) * n : k * n]
        Gam[k * n : (k + 1) * n] = A @ Gam[(k - 1) * n : k * n]
        Gam[k * n : (k + 1) * n, (k - 1) * m : k * m] += B
    Qbar = np.zeros(((T + 1) * n, (T + 1) * n))
    for k in range(T):
        Qbar[k * n : (k + 1) * n, k * n : (k + 1) * n] = Q
    Qbar[T * n :, T * n :] = Qf
    Rbar = np.kron(np.eye(T), R)
    H = Gam.T @ Qbar @ Gam + Rbar
    g = Gam.T @ Qbar @ Phi @ np.asarray(x1, dtype=float)
    return np.linalg.solve(H, -g).reshape(T, m)


def central_difference(fun, x, h=1e-6):
    """Jacobian of ``fun`` at ``x`` by central differences (columns per input entry)."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(fun(x))
    out = np.empty((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[:, j] = (np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * h)
    return out
