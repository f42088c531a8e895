"""Continuation-based MPC: per-instant update, Newton refinement and the closed loop."""
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._validation import check_int, check_positive, check_vector
from .exceptions import ConfigError, ConvergenceError, NsmpcError, SingularMatrixError
from .linalg import DENSE_LU, LinearSolverConfig, gmres_solve, jacobians, lu_solve
from .problem import DecisionVector, residual

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContinuationConfig:
    """Controller settings.

    ``epsilon`` switches the residual to the log-cosh smoothed variant; leave
    it at ``None`` for the prox-based residual.
    """

    zeta_c: float = 0.4
    gamma: float = 0.5
    newton_steps: int = 1
    newton_step_size: float = 0.8
    init_tol: float = 1e-6
    init_max_iter: int = 100
    solver: LinearSolverConfig = field(default_factory=LinearSolverConfig)
    epsilon: Optional[float] = None

    def __post_init__(self):
        check_positive(self.zeta_c, "zeta_c")
        check_positive(self.gamma, "gamma")
        check_int(self.newton_steps, "newton_steps", minimum=0)
        check_positive(self.init_tol, "init_tol")
        check_int(self.init_max_iter, "init_max_iter", minimum=1)
        if not 0 < self.newton_step_size <= 1:
            raise ConfigError(
                f"newton_step_size must lie in (0, 1], got {self.newton_step_size}", field="newton_step_size"
            )
        if self.epsilon is not None:
            check_positive(self.epsilon, "epsilon")


@dataclass
class ContinuationState:
    z: np.ndarray
    x1: np.ndarray
    last_residual_norm: float = np.inf
    step_count: int = 0


@dataclass
class StepRecord:
    time: float
    state: np.ndarray
    input: np.ndarray
    residual_inf: float
    residual_l1: float
    residual_pre_inf: float
    residual_pre_l1: float
    solver_iters: int
    wall_time: float
    error: Optional[str] = None


@dataclass
class SimTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def append(self, record):
        self.records.append(record)

    @property
    def times(self):
        return np.array([r.time for r in self.records])

    @property
    def states(self):
        return np.array([r.state for r in self.records])

    @property
    def inputs(self):
        return np.array([r.input for r in self.records])

    @property
    def residual_inf(self):
        return np.array([r.residual_inf for r in self.records])

    @property
    def residual_l1(self):
        return np.array([r.residual_l1 for r in self.records])

    @property
    def errors(self):
        return [(i, r.error) for i, r in enumerate(self.records) if r.error]


def _F(spec, z, x1, cfg):
    return residual(spec, z, x1, cfg.gamma, cfg.epsilon)


def _solve(spec, z, x1, cfg, Jz, rhs, F0=None):
    """Solve ``dF/dz d = rhs``; returns ``(d, iterations)``."""
    scfg = cfg.solver
    if scfg.method == DENSE_LU:
        return lu_solve(Jz, rhs, damping=scfg.damping), 1
    if scfg.matrix_free:
        F0 = _F(spec, z, x1, cfg) if F0 is None else F0
        h = scfg.fd_step

        def apply(v):
            return (_F(spec, z + h * v, x1, cfg) - F0) / h + scfg.damping * v
    else:
        def apply(v):
            return Jz @ v + scfg.damping * v
    d, report = gmres_solve(apply, rhs, scfg)
    if not report.converged:
        logger.warning("GMRES stopped after %d iterations at relative residual %.3e",
                       report.iterations, report.residual_norm)
    return d, report.iterations


def _linearization(spec, z, x1, cfg, need_x1=False):
    scfg = cfg.solver
    if scfg.method != DENSE_LU and scfg.matrix_free:
        return None, None
    Jz, Jx = jacobians(spec, z, x1, cfg.gamma, cfg.epsilon)
    return Jz, (Jx if need_x1 else None)


def newton_refine(spec, z, x1, cfg, steps=None, step_size=None, tol=None, F0=None):
    """Damped Newton iterations on ``F(., x1) = 0``.

    Returns ``(z, report)`` where ``report`` is a dict with ``iterations``,
    ``residual`` (final vector), ``residual_inf``, ``solver_iters`` and
    ``singular``. ``F0`` may pass in the already known residual at ``z``.
    """
    steps = cfg.newton_steps if steps is None else steps
    alpha = cfg.newton_step_size if step_size is None else step_size
    tol = cfg.init_tol if tol is None else tol
    z = check_vector(z, size=spec.size, name="z").copy()
    F = _F(spec, z, x1, cfg) if F0 is None else F0
    best_z, best_norm = z.copy(), np.max(np.abs(F))
    report = {"iterations": 0, "residual_inf": best_norm, "solver_iters": 0, "singular": False}
    for _ in range(steps):
        if np.max(np.abs(F)) <= tol:
            break
        Jz, _ = _linearization(spec, z, x1, cfg)
        try:
            d, iters = _solve(spec, z, x1, cfg, Jz, -F, F0=F)
        except SingularMatrixError:
            report["singular"] = True
            break
        report["solver_iters"] += iters
        z = z + alpha * d
        F = _F(spec, z, x1, cfg)
        report["iterations"] += 1
        norm = np.max(np.abs(F))
        if norm < best_norm:
            best_z, best_norm = z.copy(), norm
    if report["singular"]:
        z, F = best_z, _F(spec, best_z, x1, cfg)
    report["residual"] = F
    report["residual_inf"] = float(np.max(np.abs(F)))
    return z, report


def initialize(spec, x1, cfg, z0=None):
    """Full Newton steps from ``z0`` (zeros by default) until ``||F||_inf <= init_tol``."""
    x1 = check_vector(x1, size=spec.n, name="x1")
    z0 = np.zeros(spec.size) if z0 is None else check_vector(np.asarray(z0), size=spec.size, name="z0")
    z, report = newton_refine(spec, z0, x1, cfg, steps=cfg.init_max_iter, step_size=1.0, tol=cfg.init_tol)
    if report["residual_inf"] > cfg.init_tol:
        raise ConvergenceError(
            f"initialization reached ||F||_inf = {report['residual_inf']:.3e} after "
            f"{report['iterations']} iterations (tolerance {cfg.init_tol:g})",
            best_residual=report["residual_inf"],
            best_z=z,
        )
    state = ContinuationState(z=z, x1=x1.copy(), last_residual_norm=report["residual_inf"])
    state.init_iterations = report["iterations"]
    return state


def continuation_system(spec, z, x_obs, x_pred, cfg):
    """Matrix and right-hand side of the per-instant continuation update.

    Only meaningful for the assembled (non matrix-free) path; used by the
    LU/GMRES cross-check.
    """
    Jz, Jx = jacobians(spec, z, x_obs, cfg.gamma, cfg.epsilon)
    F = _F(spec, z, x_obs, cfg)
    rhs = -Jx @ (x_pred - x_obs) - cfg.zeta_c * F
    return Jz, rhs


def continuation_step(spec, state, x_obs, cfg, callback=None):
    """Advance ``state`` by one sampling instant after observing ``x_obs``.

    Returns ``(new_state, info)``. On a singular Jacobian the plan ``z`` is
    held and ``info["error"]`` carries the message. ``callback(Jz, rhs, d)``
    is invoked after the continuation solve, if given.
    """
    x_obs = check_vector(x_obs, size=spec.n, name="x_obs")
    z = state.z
    u1 = DecisionVector(spec, z).u(1)
    x_pred = np.asarray(spec.dynamics(x_obs, u1), dtype=float)
    info = {"solver_iters": 0, "error": None}
    try:
        F = _F(spec, z, x_obs, cfg)
        scfg = cfg.solver
        if scfg.method != DENSE_LU and scfg.matrix_free:
            h = scfg.fd_step
            dx = x_pred - x_obs
            rhs = -(_F(spec, z, x_obs + h * dx, cfg) - F) / h - cfg.zeta_c * F
            Jz = None
        else:
            Jz, Jx = jacobians(spec, z, x_obs, cfg.gamma, cfg.epsilon)
            rhs = -Jx @ (x_pred - x_obs) - cfg.zeta_c * F
        d, iters = _solve(spec, z, x_obs, cfg, Jz, rhs, F0=F)
        if callback is not None:
            callback(Jz, rhs, d)
        info["solver_iters"] += iters
        z_new = z + d
        F_pre = _F(spec, z_new, x_pred, cfg)
        z_new, report = newton_refine(spec, z_new, x_pred, cfg, F0=F_pre)
        F_post = report["residual"]
        info["solver_iters"] += report["solver_iters"]
        if report["singular"]:
            info["error"] = "singular Jacobian during Newton refinement"
    except NsmpcError as exc:
        logger.error("continuation step %d aborted: %s", state.step_count, exc)
        info["error"] = f"{type(exc).__name__}: {exc}"
        z_new = z
        try:
            F_pre = F_post = _F(spec, z_new, x_pred, cfg)
        except NsmpcError:
            F_pre = F_post = np.full(spec.size, np.nan)
    info["residual_pre"] = F_pre
    info["residual"] = F_post
    new_state = replace(
        state,
        z=z_new,
        x1=x_pred,
        last_residual_norm=float(np.max(np.abs(F_post))),
        step_count=state.step_count + 1,
    )
    return new_state, info


def closed_loop(spec, x_init, steps, cfg, plant=None, state=None, dt=1.0, record_wall_time=True,
                callback=None):
    """Run the receding-horizon loop for ``steps`` sampling instants.

    ``plant(x, u)`` defaults to the prediction model. ``state`` defaults to
    :func:`initialize` at ``x_init``. Step-level failures are logged in the
    trace and the loop continues with the held plan.
    """
    check_int(steps, "steps", minimum=1)
    x = check_vector(x_init, size=spec.n, name="x_init").copy()
    plant = spec.dynamics if plant is None else plant
    if state is None:
        state = initialize(spec, x, cfg)
    trace = SimTrace()
    for i in range(steps):
        t0 = time.perf_counter()
        u = DecisionVector(spec, state.z).u(1).copy()
        state, info = continuation_step(spec, state, x, cfg, callback=callback)
        wall = time.perf_counter() - t0 if record_wall_time else 0.0
        trace.append(
            StepRecord(
                time=i * dt,
                state=x.copy(),
                input=u,
                residual_inf=float(np.max(np.abs(info["residual"]))),
                residual_l1=float(np.sum(np.abs(info["residual"]))),
                residual_pre_inf=float(np.max(np.abs(info["residual_pre"]))),
                residual_pre_l1=float(np.sum(np.abs(info["residual_pre"]))),
                solver_iters=info["solver_iters"],
                wall_time=wall,
                error=info["error"],
            )
        )
        x = np.asarray(plant(x, u), dtype=float)
    trace.final_state = x
    trace.final_controller_state = state
    return trace
