"""scikit-learn style front end for the continuation controller."""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_vector
from .controller import ContinuationConfig, closed_loop, continuation_step, initialize
from .linalg import LinearSolverConfig
from .problem import DecisionVector, residual


class NonsmoothMPC(BaseEstimator):
    """Receding-horizon controller that tracks the prox-based KKT root over time.

    ``fit(x1)`` solves the problem once by Newton's method, ``predict()``
    returns the input to apply now and ``partial_fit(x_obs)`` advances the
    plan by one sampling instant. Hyperparameters follow
    :class:`~nsmpc.controller.ContinuationConfig`, so ``get_params`` /
    ``set_params`` and ``sklearn.base.clone`` work as usual.

    Parameters
    ----------
    problem : ProblemSpec
    zeta_c : float
        Continuation gain per sampling instant.
    gamma : float
        Prox parameter.
    newton_steps : int
        Damped Newton refinements after each continuation update.
    newton_step_size : float
    init_tol, init_max_iter :
        Stopping rule of the Newton initialization in ``fit``.
    solver : LinearSolverConfig or None
    epsilon : float or None
        Use the log-cosh smoothed residual instead of the prox residual.
    """

    def __init__(self, problem=None, zeta_c=0.4, gamma=0.5, newton_steps=1, newton_step_size=0.8,
                 init_tol=1e-6, init_max_iter=100, solver=None, epsilon=None):
        self.problem = problem
        self.zeta_c = zeta_c
        self.gamma = gamma
        self.newton_steps = newton_steps
        self.newton_step_size = newton_step_size
        self.init_tol = init_tol
        self.init_max_iter = init_max_iter
        self.solver = solver
        self.epsilon = epsilon

    def _config(self):
        return ContinuationConfig(
            zeta_c=self.zeta_c,
            gamma=self.gamma,
            newton_steps=self.newton_steps,
            newton_step_size=self.newton_step_size,
            init_tol=self.init_tol,
            init_max_iter=self.init_max_iter,
            solver=self.solver if self.solver is not None else LinearSolverConfig(),
            epsilon=self.epsilon,
        )

    def fit(self, X, y=None, z0=None):
        """Initialize the plan at state ``X``. ``y`` is ignored."""
        if self.problem is None:
            raise ValueError("NonsmoothMPC needs a problem before fitting")
        x1 = check_vector(X, size=self.problem.n, name="X")
        self.config_ = self._config()
        self.state_ = initialize(self.problem, x1, self.config_, z0=z0)
        self.n_iter_ = self.state_.init_iterations
        return self

    def partial_fit(self, X, y=None):
        """Advance the plan after observing state ``X``."""
        check_is_fitted(self, "state_")
        self.state_, self.last_step_ = continuation_step(self.problem, self.state_, X, self.config_)
        return self

    def predict(self, X=None):
        """Input to apply at the current sampling instant (``X`` is ignored)."""
        check_is_fitted(self, "state_")
        return DecisionVector(self.problem, self.state_.z).u(1).copy()

    def plan(self):
        """Planned inputs over the horizon, shape ``(T, m)``."""
        check_is_fitted(self, "state_")
        return DecisionVector(self.problem, self.state_.z).inputs().copy()

    def residual(self, X=None):
        """Residual vector of the current plan at ``X`` (default: the predicted initial state)."""
        check_is_fitted(self, "state_")
        x1 = self.state_.x1 if X is None else check_vector(X, size=self.problem.n, name="X")
        return residual(self.problem, self.state_.z, x1, self.config_.gamma, self.config_.epsilon)

    def simulate(self, x_init, steps, dt=1.0, plant=None):
        """Closed-loop run from ``x_init``; fits first when not fitted yet."""
        if not hasattr(self, "state_"):
            self.fit(x_init)
        trace = closed_loop(self.problem, np.asarray(x_init, float), steps, self.config_, plant=plant,
                            state=self.state_, dt=dt)
        self.state_ = trace.final_controller_state
        return trace
