"""Continuation-method MPC for optimal control problems with nonsmooth input regularizers."""
from .bench import ExperimentConfig, compare_methods, run_experiment
from .complementarity import ncp_eval, ncp_partials, psi
from .controller import (
    ContinuationConfig,
    ContinuationState,
    SimTrace,
    closed_loop,
    continuation_step,
    initialize,
    newton_refine,
)
from .estimator import NonsmoothMPC
from .exceptions import (
    CapabilityError,
    ConfigError,
    ConvergenceError,
    DimensionError,
    DivergenceError,
    JacobianError,
    NsmpcError,
    SingularMatrixError,
)
from .linalg import LinearSolverConfig, gmres_solve, jacobian_x1, jacobian_z, lu_solve
from .plant import example_plant
from .problem import (
    DecisionVector,
    ProblemSpec,
    TrajectoryPair,
    costates,
    hamiltonian_grad_u,
    licq_check,
    residual,
    rollout,
    smoothed_residual,
    smoothed_stage_residual,
    stage_residual,
)
from .prox import (
    Custom,
    Regularizer,
    ScaledL1,
    Zero,
    prox_eval,
    prox_generalized_jacobian,
    soft_threshold,
    subgradient_contains,
)

__version__ = "0.1.0"
