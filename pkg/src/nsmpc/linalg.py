"""Generalized Jacobians of the residual and the linear solvers used per sampling instant."""
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from ._validation import check_int, check_positive, check_vector
from .complementarity import psi_partials
from .exceptions import ConfigError, JacobianError, SingularMatrixError
from .problem import (
    _blocks,
    hamiltonian_hessian,
    residual,
    terminal_hessian,
    trajectory,
)

DENSE_LU = "dense_lu"
GMRES = "gmres"
ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class LinearSolverConfig:
    method: str = DENSE_LU
    gmres_restart: int = 30
    gmres_tol: float = 1e-8
    gmres_max_iter: int = 200
    fd_step: float = 1e-6
    matrix_free: bool = True
    damping: float = 0.0

    def __post_init__(self):
        if self.method not in (DENSE_LU, GMRES):
            raise ConfigError(f"unknown linear solver method {self.method!r}", field="method")
        check_int(self.gmres_restart, "gmres_restart", minimum=1)
        check_int(self.gmres_max_iter, "gmres_max_iter", minimum=1)
        check_positive(self.fd_step, "fd_step")
        check_positive(self.damping, "damping", strict=False)
        if not 0 < self.gmres_tol < 1:
            raise ConfigError(f"gmres_tol must lie in (0, 1), got {self.gmres_tol}", field="gmres_tol")


def _check_finite(mat, what):
    bad = np.argwhere(~np.isfinite(mat))
    if bad.size:
        row, col = (int(i) for i in bad[0])
        raise JacobianError(f"{what} has a non-finite entry at ({row}, {col})", row=row, col=col)
    return mat


def _analytic(spec, z, x1, gamma, smoothing):
    """Return ``(dF/dz, dF/dx1)`` from forward state and backward costate sensitivities."""
    T, n, m, ni, ne = spec.horizon, spec.n, spec.m, spec.n_ineq, spec.n_eq
    s = spec.stage_size
    z = check_vector(z, size=spec.size, name="z")
    U, MU, NU = _blocks(spec, z)
    X, P = trajectory(spec, z, x1)

    # sensitivity columns: T*m input entries followed by n entries of x1
    ncol = T * m + n
    A = [np.asarray(spec.dynamics_jac_x(X[k], U[k]), float) for k in range(T)]
    B = [np.asarray(spec.dynamics_jac_u(X[k], U[k]), float) for k in range(T)]
    hess = [hamiltonian_hessian(spec, X[k], U[k], MU[k], NU[k], P[k]) for k in range(T)]

    Sx = np.zeros((T + 1, n, ncol))
    Sx[0][:, T * m :] = np.eye(n)
    for k in range(T):
        Sx[k + 1] = A[k] @ Sx[k]
        Sx[k + 1][:, k * m : (k + 1) * m] += B[k]

    # Sp[k] = d p^{k+2} (0-based stage k uses p^{k+2} as its "next" costate)
    Sp = np.zeros((T, n, ncol))
    Sp[T - 1] = terminal_hessian(spec, X[T]) @ Sx[T]
    for k in range(T - 1, 0, -1):
        hxx, hxu, _ = hess[k]
        Sp[k - 1] = hxx @ Sx[k] + A[k].T @ Sp[k]
        Sp[k - 1][:, k * m : (k + 1) * m] += hxu

    Jz = np.zeros((spec.size, spec.size))
    Jx = np.zeros((spec.size, n))
    ucols = (np.arange(T)[:, None] * s + np.arange(m)[None, :]).ravel()
    for k in range(T):
        _, hxu, huu = hess[k]
        dJ = hxu.T @ Sx[k] + B[k].T @ Sp[k]
        dJ[:, k * m : (k + 1) * m] += huu
        u, mu, nu = U[k], MU[k], NU[k]
        Gu = np.asarray(spec.ineq_jac(u), float).reshape(ni, m)
        Hu = np.asarray(spec.eq_jac(u), float).reshape(ne, m)
        r0 = k * s
        mu_cols = slice(r0 + m, r0 + m + ni)
        nu_cols = slice(r0 + m + ni, r0 + s)
        u_cols = slice(r0, r0 + m)
        rows = slice(r0, r0 + m)
        if smoothing is None:
            Jk = B[k].T @ P[k] + spec.stage_cost_grad_u(X[k], u) + Gu.T @ mu + Hu.T @ nu
            D = spec.regularizer.prox_derivative(u - gamma * Jk, gamma)
            scale = gamma * D[:, None]
            Jz[rows][:, ucols] = scale * dJ[:, : T * m]
            Jz[rows, u_cols] += np.diag(1.0 - D)
            Jz[rows, mu_cols] = scale * Gu.T
            Jz[rows, nu_cols] = scale * Hu.T
            Jx[rows] = scale * dJ[:, T * m :]
        else:
            w = spec.regularizer.weight
            curvature = w / smoothing * (1.0 - np.tanh(u / smoothing) ** 2)
            Jz[rows][:, ucols] = dJ[:, : T * m]
            Jz[rows, u_cols] += np.diag(curvature)
            Jz[rows, mu_cols] = Gu.T
            Jz[rows, nu_cols] = Hu.T
            Jx[rows] = dJ[:, T * m :]
        if ni:
            da, db = psi_partials(-np.asarray(spec.ineq(u), float), mu)
            prow = slice(r0 + m, r0 + m + ni)
            Jz[prow, u_cols] = -da[:, None] * Gu
            Jz[prow, mu_cols] = np.diag(db)
        if ne:
            Jz[r0 + m + ni : r0 + s, u_cols] = Hu
    return _check_finite(Jz, "dF/dz"), _check_finite(Jx, "dF/dx1")


def _fd_jacobian_z(spec, z, x1, gamma, smoothing, step):
    z = check_vector(z, size=spec.size, name="z")
    F0 = residual(spec, z, x1, gamma, smoothing)
    J = np.empty((F0.size, z.size))
    for j in range(z.size):
        h = step * (1.0 + abs(z[j]))
        zp = z.copy()
        zp[j] += h
        J[:, j] = (residual(spec, zp, x1, gamma, smoothing) - F0) / h
    return _check_finite(J, "dF/dz")


def _fd_jacobian_x1(spec, z, x1, gamma, smoothing, step):
    x1 = check_vector(x1, size=spec.n, name="x1")
    F0 = residual(spec, z, x1, gamma, smoothing)
    J = np.empty((F0.size, spec.n))
    for j in range(spec.n):
        h = step * (1.0 + abs(x1[j]))
        xp = x1.copy()
        xp[j] += h
        J[:, j] = (residual(spec, z, xp, gamma, smoothing) - F0) / h
    return _check_finite(J, "dF/dx1")


def jacobians(spec, z, x1, gamma, smoothing=None, mode=ANALYTIC, fd_step=1e-6):
    """Both ``dF/dz`` and ``dF/dx1`` in one pass."""
    if mode == ANALYTIC:
        return _analytic(spec, z, x1, gamma, smoothing)
    if mode == FINITE_DIFFERENCE:
        return (
            _fd_jacobian_z(spec, z, x1, gamma, smoothing, fd_step),
            _fd_jacobian_x1(spec, z, x1, gamma, smoothing, fd_step),
        )
    raise ValueError(f"unknown Jacobian mode {mode!r}")


def jacobian_z(spec, z, x1, gamma, mode=ANALYTIC, smoothing=None, fd_step=1e-6):
    if mode == FINITE_DIFFERENCE:
        return _fd_jacobian_z(spec, z, x1, gamma, smoothing, fd_step)
    return jacobians(spec, z, x1, gamma, smoothing, mode)[0]


def jacobian_x1(spec, z, x1, gamma, mode=ANALYTIC, smoothing=None, fd_step=1e-6):
    if mode == FINITE_DIFFERENCE:
        return _fd_jacobian_x1(spec, z, x1, gamma, smoothing, fd_step)
    return jacobians(spec, z, x1, gamma, smoothing, mode)[1]


def lu_solve(A, b, damping=0.0):
    """Solve ``(A + damping I) x = b`` by LU with partial pivoting.

    Raises :class:`SingularMatrixError` with the offending pivot index when a
    pivot is zero relative to the matrix scale.
    """
    A = np.asarray(A, dtype=float)
    b = check_vector(b, size=A.shape[0], name="b")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("A has non-finite entries")
    if damping:
        A = A + damping * np.eye(A.shape[0])
    with warnings.catch_warnings():
        # exact zero pivots are reported below with their index
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    tol = A.shape[0] * np.finfo(float).eps * max(np.abs(A).max(), 1.0)
    small = np.flatnonzero(pivots <= tol)
    if small.size:
        raise SingularMatrixError(f"matrix is singular to working precision at pivot {small[0]}", pivot=int(small[0]))
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


class GmresReport(NamedTuple):
    iterations: int
    residual_norm: float
    converged: bool
    breakdown: bool


def gmres_solve(apply, b, cfg=None, x0=None):
    """Restarted GMRES for ``apply(x) = b`` with a relative residual target.

    ``apply`` only needs to be a callable; it may be a directional finite
    difference of a nonlinear map. Returns ``(x, GmresReport)``.
    """
    cfg = cfg or LinearSolverConfig(method=GMRES)
    b = check_vector(b, name="b")
    N = b.shape[0]
    x = np.zeros(N) if x0 is None else check_vector(x0, size=N, name="x0").copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(N), GmresReport(0, 0.0, True, False)
    target = cfg.gmres_tol * bnorm
    restart = min(cfg.gmres_restart, N)
    total = 0
    r = b - apply(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    while total < cfg.gmres_max_iter:
        if beta <= target:
            return x, GmresReport(total, beta / bnorm, True, False)
        V = np.zeros((restart + 1, N))
        H = np.zeros((restart + 1, restart))
        cs = np.zeros(restart)
        sn = np.zeros(restart)
        g = np.zeros(restart + 1)
        g[0] = beta
        V[0] = r / beta
        breakdown = False
        j = -1
        for j in range(restart):
            w = np.asarray(apply(V[j]), dtype=float)
            # modified Gram-Schmidt, one reorthogonalization pass
            for _ in range(2):
                coeffs = V[: j + 1] @ w
                w = w - coeffs @ V[: j + 1]
                H[: j + 1, j] += coeffs
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            h_next = H[j + 1, j]
            denom = np.hypot(H[j, j], h_next)
            if denom == 0.0:
                breakdown = True
                j -= 1
                break
            cs[j], sn[j] = H[j, j] / denom, h_next / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] *= cs[j]
            total += 1
            if h_next <= 1e-14 * denom:
                if abs(g[j + 1]) > target:
                    breakdown = True
                else:
                    V[j + 1] = 0.0
                break
            V[j + 1] = w / h_next
            if abs(g[j + 1]) <= target or total >= cfg.gmres_max_iter:
                break
        k = j + 1
        if k > 0:
            y = scipy.linalg.solve_triangular(H[:k, :k], g[:k])
            x = x + y @ V[:k]
        r = b - apply(x)
        beta = np.linalg.norm(r)
        if breakdown:
            return x, GmresReport(total, beta / bnorm, beta <= target, True)
    return x, GmresReport(total, beta / bnorm, beta <= target, False)
