"""Packaged benchmark: experiment configuration, runs, comparisons and CSV export."""
import csv
import io
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import NamedTuple, Optional

import numpy as np
import yaml

from ._validation import check_int, check_positive
from .controller import ContinuationConfig, closed_loop, initialize
from .exceptions import ConfigError, ConvergenceError, NsmpcError
from .linalg import LinearSolverConfig
from .plant import X_INIT, example_plant

logger = logging.getLogger(__name__)

PROPOSED = "proposed"
CONVENTIONAL = "conventional"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INIT = 2
EXIT_SOLVER = 3

# inputs with |u_i| at or below this are reported as switched off
OFF_THRESHOLD = 1e-3


@dataclass
class ExperimentConfig:
    method: str = PROPOSED
    dt: float = 0.05
    horizon: int = 60
    sim_steps: int = 400
    x_init: list = field(default_factory=lambda: X_INIT.tolist())
    weight: float = 4.0
    gamma: float = 0.5
    zeta_c: float = 0.4
    newton_steps: int = 1
    newton_step_size: float = 0.8
    epsilon: Optional[float] = None
    init_tol: float = 1e-6
    init_max_iter: int = 100
    solver: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: Optional[str] = None
    record_wall_time: bool = True

    def validate(self):
        if self.method not in (PROPOSED, CONVENTIONAL):
            raise ConfigError(f"method must be 'proposed' or 'conventional', got {self.method!r}", field="method")
        check_positive(self.dt, "dt")
        check_int(self.horizon, "horizon", minimum=1)
        check_int(self.sim_steps, "sim_steps", minimum=1)
        check_positive(self.weight, "weight")
        check_int(self.seed, "seed")
        if len(self.x_init) != 5:
            raise ConfigError(f"x_init must have 5 entries, got {len(self.x_init)}", field="x_init")
        if self.method == CONVENTIONAL and self.epsilon is None:
            raise ConfigError("epsilon is required for the conventional method", field="epsilon")
        if self.method == PROPOSED and self.epsilon is not None:
            raise ConfigError("epsilon is only allowed for the conventional method", field="epsilon")
        unknown = set(self.solver) - {f.name for f in fields(LinearSolverConfig)}
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}", field="solver")
        self.controller_config()
        return self

    def controller_config(self):
        try:
            return ContinuationConfig(
                zeta_c=self.zeta_c,
                gamma=self.gamma,
                newton_steps=self.newton_steps,
                newton_step_size=self.newton_step_size,
                init_tol=self.init_tol,
                init_max_iter=self.init_max_iter,
                solver=LinearSolverConfig(**self.solver),
                epsilon=self.epsilon if self.method == CONVENTIONAL else None,
            )
        except TypeError as exc:
            raise ConfigError(str(exc), field="solver") from exc

    def problem(self):
        return example_plant(dt=self.dt, horizon=self.horizon, weight=self.weight)


def load_config(path, **overrides):
    """Read a YAML experiment file; ``overrides`` with value ``None`` are ignored."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data, **overrides)


def config_from_dict(data, **overrides):
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}", field=sorted(unknown)[0])
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    if data.get("solver") is None:
        data["solver"] = {}
    for int_field in ("horizon", "sim_steps", "newton_steps", "init_max_iter", "seed"):
        if isinstance(data.get(int_field), float) and float(data[int_field]).is_integer():
            data[int_field] = int(data[int_field])
    return ExperimentConfig(**data).validate()


def dump_config(cfg):
    return yaml.safe_dump(asdict(cfg), sort_keys=False)


class ExperimentResult(NamedTuple):
    trace: object
    exit_code: int
    message: str = ""


def _initial_plan(spec, x1, cfg, ccfg):
    if cfg.method == PROPOSED:
        return initialize(spec, x1, ccfg)
    # the smoothed system is too stiff for Newton from zero; start from the nonsmooth root
    warm = initialize(spec, x1, replace(ccfg, epsilon=None))
    return initialize(spec, x1, ccfg, z0=warm.z)


def run_experiment(cfg):
    """Initialize and run the closed loop described by ``cfg``.

    Returns an :class:`ExperimentResult`; ``trace`` is ``None`` when
    initialization fails. Writes ``trace_<method>.csv`` when ``cfg.out_dir``
    is set.
    """
    cfg.validate()
    spec = cfg.problem()
    ccfg = cfg.controller_config()
    x1 = np.asarray(cfg.x_init, dtype=float)
    try:
        state = _initial_plan(spec, x1, cfg, ccfg)
    except (ConvergenceError, NsmpcError) as exc:
        logger.error("initialization failed: %s", exc)
        return ExperimentResult(None, EXIT_INIT, str(exc))
    trace = closed_loop(
        spec, x1, cfg.sim_steps, ccfg, state=state, dt=cfg.dt, record_wall_time=cfg.record_wall_time
    )
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, f"trace_{cfg.method}.csv"), "w", newline="") as fh:
            write_trace_csv(trace, fh)
    if trace.errors:
        step, msg = trace.errors[0]
        return ExperimentResult(trace, EXIT_SOLVER, f"{len(trace.errors)} step(s) failed, first at {step}: {msg}")
    return ExperimentResult(trace, EXIT_OK)


def _fmt(x):
    return "%.17g" % x


def write_trace_csv(trace, fh):
    n = trace.states.shape[1]
    m = trace.inputs.shape[1]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
               + ["residual_inf", "residual_l1", "solver_iters", "wall_us"])
    for i, r in enumerate(trace.records):
        w.writerow(
            [i, _fmt(r.time)] + [_fmt(v) for v in r.state] + [_fmt(v) for v in r.input]
            + [_fmt(r.residual_inf), _fmt(r.residual_l1), r.solver_iters, int(round(r.wall_time * 1e6))]
        )


def trace_csv_text(trace):
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue()


def switch_off_time(trace, index, threshold=OFF_THRESHOLD):
    """Time after which ``|u_index| <= threshold`` for the rest of the run (``None`` if never)."""
    on = np.flatnonzero(np.abs(trace.inputs[:, index]) > threshold)
    if on.size == 0:
        return float(trace.times[0])
    if on[-1] == len(trace) - 1:
        return None
    return float(trace.times[on[-1] + 1])


class Comparison(NamedTuple):
    times: np.ndarray
    proposed_l1: np.ndarray
    conventional_l1: np.ndarray
    ratio: np.ndarray
    median_final_half: float
    proposed: object
    conventional: object


_SHARED = ("dt", "horizon", "sim_steps", "x_init", "weight")


def compare_methods(cfg_a, cfg_b, out_dir=None):
    """Run two experiments on the same plant and compare their residual l1 norms.

    The ratio trace is ``cfg_a`` residual over ``cfg_b`` residual.
    """
    for name in _SHARED:
        if getattr(cfg_a, name) != getattr(cfg_b, name):
            raise ConfigError(f"compared configs differ in shared field {name!r}", field=name)
    ra = run_experiment(replace(cfg_a, out_dir=None))
    rb = run_experiment(replace(cfg_b, out_dir=None))
    for r, cfg in ((ra, cfg_a), (rb, cfg_b)):
        if r.trace is None:
            raise ConvergenceError(f"{cfg.method} initialization failed: {r.message}")
    a = ra.trace.residual_l1
    b = rb.trace.residual_l1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a == b, 1.0, a / b)
    half = len(ratio) // 2
    comp = Comparison(ra.trace.times, a, b, ratio, float(np.median(ratio[half:])), ra.trace, rb.trace)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "comparison.csv"), "w", newline="") as fh:
            write_comparison_csv(comp, fh)
        names = [f"trace_{cfg_a.method}", f"trace_{cfg_b.method}"]
        if names[0] == names[1]:
            names = [names[0] + "_a", names[1] + "_b"]
        for name, r in zip(names, (ra, rb)):
            with open(os.path.join(out_dir, name + ".csv"), "w", newline="") as fh:
                write_trace_csv(r.trace, fh)
    return comp


def write_comparison_csv(comp, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "t", "res_proposed_l1", "res_conventional_l1", "ratio"])
    for i in range(len(comp.times)):
        w.writerow([i, _fmt(comp.times[i]), _fmt(comp.proposed_l1[i]), _fmt(comp.conventional_l1[i]),
                    _fmt(comp.ratio[i])])


def paired_configs(cfg, epsilon=1e-2):
    """Proposed/conventional pair sharing every field of ``cfg`` except method and epsilon."""
    eps = cfg.epsilon if cfg.epsilon is not None else epsilon
    return replace(cfg, method=PROPOSED, epsilon=None), replace(cfg, method=CONVENTIONAL, epsilon=eps)


def summary(trace):
    """One-line-per-item text summary of a trace."""
    lines = [f"steps: {len(trace)}  (inputs |u_i| <= {OFF_THRESHOLD:g} count as off)"]
    for i in range(trace.inputs.shape[1]):
        t = switch_off_time(trace, i)
        lines.append(f"u{i + 1} switched off from t = {t}" if t is not None else f"u{i + 1} still on at the end")
    lines.append(f"final ||x||_inf = {np.max(np.abs(trace.final_state)):.4g}")
    lines.append(f"median residual l1 (final half) = {np.median(trace.residual_l1[len(trace) // 2:]):.3e}")
    lines.append(f"failed steps: {len(trace.errors)}")
    return "\n".join(lines)
