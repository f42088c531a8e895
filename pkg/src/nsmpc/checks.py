"""Quick self-checks behind ``nsmpc check``: properties and independent oracles."""
import numpy as np

from .complementarity import ncp_eval
from .controller import ContinuationConfig, initialize
from .linalg import LinearSolverConfig, gmres_solve, jacobians, lu_solve
from .plant import X_INIT, example_plant
from .problem import DecisionVector, residual
from .prox import ScaledL1, prox_eval, subgradient_contains
from .testing import dense_lq_solution, random_lti_lq


def check_prox_equivalence(rng, samples=1000, tol=1e-10):
    worst = 0.0
    for _ in range(samples):
        w = rng.uniform(0.1, 5.0)
        reg = ScaledL1(w)
        gamma = rng.uniform(0.01, 2.0)
        x = rng.normal(size=4) * (rng.random(4) > 0.4)
        g = np.where(x != 0, w * np.sign(x), rng.uniform(-w, w, size=4))
        worst = max(worst, np.max(np.abs(prox_eval(reg, x + gamma * g, gamma) - x)))
        v = rng.normal(size=4) * 3
        px = prox_eval(reg, v, gamma)
        if not subgradient_contains(reg, px, (v - px) / gamma, tol=tol):
            return False, "reverse direction failed"
    return worst <= tol, f"max forward error {worst:.2e}"


def check_fb_grid():
    for a in np.linspace(-2, 2, 41):
        for b in np.linspace(-2, 2, 41):
            on_set = a >= 0 and b >= 0 and a * b == 0
            val = abs(ncp_eval(a, b))
            if on_set != (val <= 1e-12):
                return False, f"mismatch at ({a}, {b})"
    return True, "41x41 grid"


def check_lq_oracle(rng, instances=20):
    worst = 0.0
    for _ in range(instances):
        spec, mats = random_lti_lq(rng)
        x1 = rng.normal(size=spec.n)
        cfg = ContinuationConfig(init_tol=1e-12)
        z = initialize(spec, x1, cfg).z
        ref = dense_lq_solution(*mats, spec.horizon, x1)
        worst = max(worst, np.max(np.abs(DecisionVector(spec, z).inputs() - ref)))
    return worst <= 1e-8, f"max deviation from dense solve {worst:.2e}"


def check_jacobian(rng, points=5):
    spec = example_plant()
    worst = 0.0
    for _ in range(points):
        z = rng.normal(size=spec.size) * 0.3
        x1 = X_INIT + rng.normal(size=5) * 0.1
        Ja, _ = jacobians(spec, z, x1, 0.5)
        Jf, _ = jacobians(spec, z, x1, 0.5, mode="finite_difference")
        worst = max(worst, np.max(np.abs(Ja - Jf)) / max(np.max(np.abs(Jf)), 1.0))
    return worst <= 1e-4, f"max scaled entry error {worst:.2e}"


def check_initialization():
    spec = example_plant()
    state = initialize(spec, X_INIT, ContinuationConfig())
    return state.last_residual_norm <= 1e-6, (
        f"||F||_inf = {state.last_residual_norm:.2e} after {state.init_iterations} iterations"
    )


def check_solvers(rng):
    spec = example_plant()
    z = initialize(spec, X_INIT, ContinuationConfig()).z
    Jz, Jx = jacobians(spec, z, X_INIT, 0.5)
    rhs = -0.4 * residual(spec, z, X_INIT, 0.5) - Jx @ rng.normal(size=5) * 0.01
    d_lu = lu_solve(Jz, rhs)
    d_gm, rep = gmres_solve(lambda v: Jz @ v, rhs, LinearSolverConfig(method="gmres", gmres_tol=1e-10,
                                                                       gmres_max_iter=1000))
    err = np.linalg.norm(d_lu - d_gm) / np.linalg.norm(d_lu)
    return err <= 1e-6, f"relative difference {err:.2e} ({rep.iterations} GMRES iterations)"


def run_checks(seed=0, out=print):
    """Run every check, print one line each and return ``True`` when all pass."""
    rng = np.random.default_rng(seed)
    checks = [
        ("prox equivalence (1000 samples)", lambda: check_prox_equivalence(rng)),
        ("Fischer-Burmeister characterization", check_fb_grid),
        ("LTI-LQ root vs dense solve", lambda: check_lq_oracle(rng)),
        ("analytic vs finite-difference Jacobian", lambda: check_jacobian(rng)),
        ("Newton initialization of the benchmark", check_initialization),
        ("LU vs GMRES", lambda: check_solvers(rng)),
    ]
    ok_all = True
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all
