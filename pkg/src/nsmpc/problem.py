"""Optimal control problem definition and the nonsmooth KKT residual.

The decision vector is stored stage by stage: block ``k`` holds
``[u^k; mu^k; nu^k]``, so ``z.reshape(T, m + n_ineq + n_eq)`` gives one row
per stage. Stage indices in the public functions are 1-based.
"""
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._validation import check_vector
from .complementarity import psi
from .exceptions import CapabilityError, DimensionError, DivergenceError
from .prox import Regularizer, ScaledL1, Zero

_HESS_FD_STEP = 1e-5


def _empty_vec(u):
    return np.zeros(0)


def _empty_jac(u):
    return np.zeros((0, np.size(u)))


@dataclass(frozen=True)
class ProblemSpec:
    """Discrete-time optimal control problem with a prox-friendly input regularizer.

    Callbacks must be pure. First derivatives are always analytic callbacks.
    ``hamiltonian_hessian(x, u, mu, nu, p) -> (Hxx, Hxu, Huu)`` and
    ``terminal_cost_hess(x)`` are optional; when absent the Jacobian code
    differentiates the first-order callbacks by central differences.
    """

    n: int
    m: int
    horizon: int
    dynamics: Callable
    dynamics_jac_x: Callable
    dynamics_jac_u: Callable
    stage_cost: Callable
    stage_cost_grad_x: Callable
    stage_cost_grad_u: Callable
    terminal_cost: Callable
    terminal_cost_grad: Callable
    n_ineq: int = 0
    n_eq: int = 0
    ineq: Callable = _empty_vec
    ineq_jac: Callable = _empty_jac
    eq: Callable = _empty_vec
    eq_jac: Callable = _empty_jac
    regularizer: Regularizer = field(default_factory=Zero)
    hamiltonian_hessian: Optional[Callable] = None
    terminal_cost_hess: Optional[Callable] = None

    def __post_init__(self):
        for name in ("n", "m", "horizon"):
            if int(getattr(self, name)) < 1:
                raise DimensionError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("n_ineq", "n_eq"):
            if int(getattr(self, name)) < 0:
                raise DimensionError(f"{name} must be >= 0, got {getattr(self, name)}")
        self._probe()

    def _probe(self):
        n, m = self.n, self.m
        x, u = np.zeros(n), np.zeros(m)
        checks = [
            ("dynamics", self.dynamics(x, u), (n,)),
            ("dynamics_jac_x", self.dynamics_jac_x(x, u), (n, n)),
            ("dynamics_jac_u", self.dynamics_jac_u(x, u), (n, m)),
            ("stage_cost", self.stage_cost(x, u), ()),
            ("stage_cost_grad_x", self.stage_cost_grad_x(x, u), (n,)),
            ("stage_cost_grad_u", self.stage_cost_grad_u(x, u), (m,)),
            ("terminal_cost", self.terminal_cost(x), ()),
            ("terminal_cost_grad", self.terminal_cost_grad(x), (n,)),
            ("ineq", self.ineq(u), (self.n_ineq,)),
            ("ineq_jac", self.ineq_jac(u), (self.n_ineq, m)),
            ("eq", self.eq(u), (self.n_eq,)),
            ("eq_jac", self.eq_jac(u), (self.n_eq, m)),
        ]
        if self.terminal_cost_hess is not None:
            checks.append(("terminal_cost_hess", self.terminal_cost_hess(x), (n, n)))
        if self.hamiltonian_hessian is not None:
            hxx, hxu, huu = self.hamiltonian_hessian(
                x, u, np.zeros(self.n_ineq), np.zeros(self.n_eq), np.zeros(n)
            )
            checks += [("hamiltonian_hessian[xx]", hxx, (n, n)),
                       ("hamiltonian_hessian[xu]", hxu, (n, m)),
                       ("hamiltonian_hessian[uu]", huu, (m, m))]
        for name, value, shape in checks:
            got = np.shape(value)
            if shape == () and got in ((), (1,)):
                continue
            if got != shape:
                raise DimensionError(f"{name} returned shape {got}, expected {shape}")

    @property
    def stage_size(self):
        return self.m + self.n_ineq + self.n_eq

    @property
    def size(self):
        """Length of the decision vector."""
        return self.horizon * self.stage_size


class DecisionVector:
    """Stage-blocked view over the flat decision vector ``z``.

    Accessors take 1-based stage indices and return views into ``data``.
    """

    def __init__(self, spec, data=None):
        self.spec = spec
        if data is None:
            data = np.zeros(spec.size)
        self.data = check_vector(data, size=spec.size, name="z")

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __len__(self):
        return self.data.shape[0]

    @property
    def blocks(self):
        return self.data.reshape(self.spec.horizon, self.spec.stage_size)

    def u(self, k):
        return self.blocks[k - 1, : self.spec.m]

    def mu(self, k):
        m = self.spec.m
        return self.blocks[k - 1, m : m + self.spec.n_ineq]

    def nu(self, k):
        s = self.spec
        return self.blocks[k - 1, s.m + s.n_ineq :]

    def inputs(self):
        """All inputs as a ``(T, m)`` view."""
        return self.blocks[:, : self.spec.m]

    def to_grouped(self):
        """Return the ``[u^{1:T}; mu^{1:T}; nu^{1:T}]`` ordering."""
        s = self.spec
        b = self.blocks
        return np.concatenate(
            [b[:, : s.m].ravel(), b[:, s.m : s.m + s.n_ineq].ravel(), b[:, s.m + s.n_ineq :].ravel()]
        )

    @classmethod
    def from_grouped(cls, spec, grouped):
        grouped = check_vector(grouped, size=spec.size, name="z")
        T, m, ni = spec.horizon, spec.m, spec.n_ineq
        u = grouped[: T * m].reshape(T, m)
        mu = grouped[T * m : T * (m + ni)].reshape(T, ni)
        nu = grouped[T * (m + ni) :].reshape(T, spec.n_eq)
        return cls(spec, np.hstack([u, mu, nu]).ravel())

    @classmethod
    def from_parts(cls, spec, u, mu=None, nu=None):
        T = spec.horizon
        u = np.asarray(u, dtype=float).reshape(T, spec.m)
        mu = np.zeros((T, spec.n_ineq)) if mu is None else np.asarray(mu, dtype=float).reshape(T, spec.n_ineq)
        nu = np.zeros((T, spec.n_eq)) if nu is None else np.asarray(nu, dtype=float).reshape(T, spec.n_eq)
        return cls(spec, np.hstack([u, mu, nu]).ravel())


def _blocks(spec, z):
    z = check_vector(z, size=spec.size, name="z")
    b = z.reshape(spec.horizon, spec.stage_size)
    m, ni = spec.m, spec.n_ineq
    return b[:, :m], b[:, m : m + ni], b[:, m + ni :]


class TrajectoryPair(NamedTuple):
    """``states[k-1] = x^k`` for k = 1..T+1 and ``costates[k-1] = p^{k+1}`` for k = 1..T."""

    states: np.ndarray
    costates: np.ndarray


def rollout(spec, x1, z):
    """Simulate ``x^{k+1} = f(x^k, u^k)``; returns ``x^{2:T+1}`` as a ``(T, n)`` array."""
    x = check_vector(x1, size=spec.n, name="x1")
    U, _, _ = _blocks(spec, z)
    out = np.empty((spec.horizon, spec.n))
    for k in range(spec.horizon):
        x = out[k] = spec.dynamics(x, U[k])
    bad = np.flatnonzero(~np.isfinite(out).all(axis=1))
    if bad.size:
        raise DivergenceError(f"rollout produced a non-finite state at step {bad[0] + 1}", step=int(bad[0]) + 1)
    return out


def costates(spec, traj_states, z):
    """Backward costate recursion; returns ``p^{2:T+1}`` as a ``(T, n)`` array."""
    X = np.asarray(traj_states, dtype=float)
    T = spec.horizon
    if X.shape != (T + 1, spec.n):
        raise DimensionError(f"states must have shape {(T + 1, spec.n)}, got {X.shape}")
    U, _, _ = _blocks(spec, z)
    P = np.empty((T, spec.n))
    p = np.asarray(spec.terminal_cost_grad(X[T]), dtype=float)
    P[T - 1] = p
    for k in range(T - 1, 0, -1):
        p = P[k - 1] = spec.stage_cost_grad_x(X[k], U[k]) + spec.dynamics_jac_x(X[k], U[k]).T @ p
    bad = np.flatnonzero(~np.isfinite(P).all(axis=1))
    if bad.size:
        k = int(bad[-1]) + 2
        raise DivergenceError(f"costate recursion produced a non-finite value at step {k}", step=k)
    return P


def trajectory(spec, z, x1):
    x1 = check_vector(x1, size=spec.n, name="x1")
    X = np.vstack([x1, rollout(spec, x1, z)])
    return TrajectoryPair(X, costates(spec, X, z))


def hamiltonian(spec, x, u, mu, nu, p):
    return (
        float(spec.stage_cost(x, u))
        + float(np.dot(mu, spec.ineq(u)))
        + float(np.dot(nu, spec.eq(u)))
        + float(np.dot(p, spec.dynamics(x, u)))
    )


def hamiltonian_grad_u(spec, x_k, u_k, mu_k, nu_k, p_next):
    """Input gradient of the stage Hamiltonian."""
    return (
        spec.stage_cost_grad_u(x_k, u_k)
        + spec.ineq_jac(u_k).T @ mu_k
        + spec.eq_jac(u_k).T @ nu_k
        + spec.dynamics_jac_u(x_k, u_k).T @ p_next
    )


def hamiltonian_grad_x(spec, x_k, u_k, p_next):
    return spec.stage_cost_grad_x(x_k, u_k) + spec.dynamics_jac_x(x_k, u_k).T @ p_next


def hamiltonian_hessian(spec, x, u, mu, nu, p):
    """Return ``(Hxx, Hxu, Huu)``, using the problem callback when available."""
    if spec.hamiltonian_hessian is not None:
        hxx, hxu, huu = spec.hamiltonian_hessian(x, u, mu, nu, p)
        return np.asarray(hxx, float), np.asarray(hxu, float), np.asarray(huu, float)
    n, m = spec.n, spec.m
    hxx = np.empty((n, n))
    hxu = np.empty((n, m))
    huu = np.empty((m, m))
    for j in range(n):
        h = _HESS_FD_STEP * (1.0 + abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        hxx[:, j] = (hamiltonian_grad_x(spec, x + e, u, p) - hamiltonian_grad_x(spec, x - e, u, p)) / (2 * h)
    for j in range(m):
        h = _HESS_FD_STEP * (1.0 + abs(u[j]))
        e = np.zeros(m)
        e[j] = h
        hxu[:, j] = (hamiltonian_grad_x(spec, x, u + e, p) - hamiltonian_grad_x(spec, x, u - e, p)) / (2 * h)
        huu[:, j] = (
            hamiltonian_grad_u(spec, x, u + e, mu, nu, p) - hamiltonian_grad_u(spec, x, u - e, mu, nu, p)
        ) / (2 * h)
    return hxx, hxu, huu


def terminal_hessian(spec, x):
    if spec.terminal_cost_hess is not None:
        return np.asarray(spec.terminal_cost_hess(x), dtype=float)
    n = spec.n
    out = np.empty((n, n))
    for j in range(n):
        h = _HESS_FD_STEP * (1.0 + abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        out[:, j] = (spec.terminal_cost_grad(x + e) - spec.terminal_cost_grad(x - e)) / (2 * h)
    return out


def _stage_parts(spec, k, z, traj):
    U, MU, NU = _blocks(spec, z)
    i = k - 1
    u, mu, nu = U[i], MU[i], NU[i]
    J = hamiltonian_grad_u(spec, traj.states[i], u, mu, nu, traj.costates[i])
    return u, mu, nu, J


def _check_stage(spec, k):
    if not 1 <= k <= spec.horizon:
        raise IndexError(f"stage index must be in 1..{spec.horizon}, got {k}")


def stage_residual(spec, k, z, traj, gamma):
    """Residual block ``[u - prox(u - gamma J); psi(-g(u), mu); h(u)]`` of stage ``k``."""
    _check_stage(spec, k)
    u, mu, nu, J = _stage_parts(spec, k, z, traj)
    prox_row = u - spec.regularizer.prox(u - gamma * J, gamma)
    return np.concatenate([prox_row, psi(-np.asarray(spec.ineq(u)), mu), np.asarray(spec.eq(u), float)])


def smoothed_gradient(spec, u, epsilon):
    """Gradient of ``w * eps * sum(log cosh(u / eps))``."""
    if not isinstance(spec.regularizer, ScaledL1):
        raise CapabilityError("smoothing is only defined for a ScaledL1 regularizer")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return spec.regularizer.weight * np.tanh(np.asarray(u, float) / epsilon)


def smoothed_stage_residual(spec, k, z, traj, epsilon):
    """Residual block with the l1 term replaced by its log-cosh smoothing."""
    _check_stage(spec, k)
    u, mu, nu, J = _stage_parts(spec, k, z, traj)
    grad_row = smoothed_gradient(spec, u, epsilon) + J
    return np.concatenate([grad_row, psi(-np.asarray(spec.ineq(u)), mu), np.asarray(spec.eq(u), float)])


def stage_gradients(spec, z, traj):
    """Hamiltonian input gradients of all stages as a ``(T, m)`` array."""
    U, MU, NU = _blocks(spec, z)
    X, P = traj
    out = np.empty((spec.horizon, spec.m))
    for i in range(spec.horizon):
        out[i] = hamiltonian_grad_u(spec, X[i], U[i], MU[i], NU[i], P[i])
    return out


def residual(spec, z, x1, gamma, smoothing=None):
    """Stacked stage residuals ``F(z, x1)``.

    With ``smoothing`` set to a positive epsilon the smoothed residual is
    returned instead and ``gamma`` is unused.
    """
    traj = trajectory(spec, z, x1)
    U, MU, NU = _blocks(spec, z)
    J = stage_gradients(spec, z, traj)
    m, ni = spec.m, spec.n_ineq
    out = np.empty((spec.horizon, spec.stage_size))
    if smoothing is None:
        for i in range(spec.horizon):
            out[i, :m] = U[i] - spec.regularizer.prox(U[i] - gamma * J[i], gamma)
    else:
        out[:, :m] = smoothed_gradient(spec, U, smoothing) + J
    for i in range(spec.horizon):
        if ni:
            out[i, m : m + ni] = psi(-np.asarray(spec.ineq(U[i]), float), MU[i])
        if spec.n_eq:
            out[i, m + ni :] = spec.eq(U[i])
    return out.ravel()


def smoothed_residual(spec, z, x1, epsilon):
    return residual(spec, z, x1, None, smoothing=epsilon)


class LicqReport(NamedTuple):
    ok: bool
    active: tuple
    min_singular: float


def licq_check(spec, u, tol=1e-8):
    """Check linear independence of active inequality and all equality gradients at ``u``."""
    u = check_vector(u, size=spec.m, name="u")
    g = np.asarray(spec.ineq(u), dtype=float)
    active = tuple(int(i) for i in np.flatnonzero(np.abs(g) <= tol))
    rows = len(active) + spec.n_eq
    if rows == 0:
        return LicqReport(True, active, np.inf)
    if rows > spec.m:
        return LicqReport(False, active, 0.0)
    J = np.vstack([np.asarray(spec.ineq_jac(u), float)[list(active)], np.asarray(spec.eq_jac(u), float)])
    sv = np.linalg.svd(J, compute_uv=False)
    return LicqReport(bool(sv[-1] > tol * (1.0 + sv[0])), active, float(sv[-1]))
