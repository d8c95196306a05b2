"""Named invariant checks shared by ``lyzflow verify`` and the acceptance suite.

Each check is a function taking keyword size parameters and returning a short
detail string; it raises :class:`CheckFailed` when the invariant is violated.
``verify`` runs them at desk scale; the acceptance tests call the same
functions at the full preset sizes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import functionals as fn
from . import oracles
from . import surface as surf
from .config import RunConfig, build, preset_config
from .errors import KappaOne
from .geometry import ClosedForm, PotentialMetric
from .integrator import PotentialSystem, StepperConfig, Termination, cfl_limit, prepare, run
from .potential import FlowProblem, PotentialState, rhs_F
from .spectral import (Grid, band_limited_noise, integrate, laplacian_flat,
                       poisson_solve_flat)
from .surface import SurfaceState


class CheckFailed(AssertionError):
    pass


def require(ok: bool, message: str) -> None:
    if not ok:
        raise CheckFailed(message)


def monotone_slack(x: np.ndarray) -> float:
    """Largest increase beyond the slack 1e-8 (1 + |x|); <= 0 means non-increasing."""
    x = np.asarray(x, dtype=float)
    return float(np.max(np.diff(x) - 1e-8 * (1.0 + np.abs(x[:-1])))) if x.size > 1 else -1.0


def derivative_mismatch(t, x, theory, rel: float, floor: float = 1e-6) -> tuple[float, float]:
    """Worst |fd - theory| / max(rel |theory|, floor) over interior samples.

    Finite differences use the second-order three-point formula on the actual
    (possibly non-uniform) sample times. Returns (ratio, time of the worst sample).
    """
    t, x, theory = (np.asarray(a, dtype=float) for a in (t, x, theory))
    fd = np.gradient(x, t)[1:-1]
    th = theory[1:-1]
    ratio = np.abs(fd - th) / np.maximum(rel * np.abs(th), floor)
    i = int(np.argmax(ratio))
    return float(ratio[i]), float(t[1:-1][i])


def derivative_run(cfg: RunConfig, t_end: float, dt_cap: float = 3e-5):
    """Resolve a preset's early dynamics with RK4, sampling every step.

    The step is the CFL limit, capped so that coarse grids still resolve the
    fast initial decay of the noise modes.
    """
    cfg = replace(cfg, scheme="rk4", adaptive=False, t_end=t_end, sample_stride=1,
                  stop_tolerance=0.0, residuals=False)
    system, state = build(cfg)
    cfg.dt = min(dt_cap, cfl_limit(system, prepare(system, state), cfg.cfl_safety))
    return run(system, state, cfg.stepper())


def _monotone_identity(preset: str, column: str, rel: float, t_end: float, N: int | None):
    cfg = preset_config(preset)
    if N is not None:
        cfg = replace(cfg, N=N)
    result = derivative_run(cfg, t_end)
    require(result.termination == Termination.TIME_EXHAUSTED,
            f"{preset} run aborted: {result.termination.value} {result.message}")
    x = result.series(column)
    excess = monotone_slack(x)
    require(excess <= 0, f"{column} increased by {excess:.3e} beyond slack")
    ratio, at = derivative_mismatch(result.series("t"), x, result.series(f"d{column}_dt_theory"), rel)
    require(ratio <= 1.0, f"d{column}/dt mismatch {ratio:.3g} x tolerance at t = {at:.4g}")
    return f"{len(x)} samples, worst derivative error {ratio:.2f} x tol"


# -- checks -----------------------------------------------------------------

def check_spectral(N: int = 32) -> str:
    g = Grid(1, N)
    x = g.coords[0]
    f = np.cos(2 * np.pi * x)
    err = float(np.max(np.abs(laplacian_flat(g, f) + 2 * np.pi ** 2 * f)))
    require(err < 1e-10, f"Laplacian eigenfunction error {err:.2e}")
    rng = np.random.default_rng(0)
    h = band_limited_noise(g, rng)
    back = float(np.max(np.abs(laplacian_flat(g, poisson_solve_flat(g, h)) - h)))
    require(back < 1e-10, f"Poisson round trip error {back:.2e}")
    return f"eigen {err:.1e}, poisson {back:.1e}"


def check_stationary(N: int = 32, steps: int = 1000) -> str:
    worst = 0.0
    for formulation in ("surface", "potential"):
        cfg = replace(preset_config("stationary"), formulation=formulation, N=N,
                      t_end=steps * 1e-3, stop_tolerance=0.0, sample_stride=steps)
        system, state = build(cfg)
        result = run(system, state, cfg.stepper())
        require(result.steps == steps, f"{formulation}: {result.steps} steps")
        start = system.fields(state)
        for a, b in zip(start, system.fields(result.final_state)):
            worst = max(worst, float(np.max(np.abs(a - b))))
    require(worst < 1e-10, f"stationary drift {worst:.2e}")
    return f"drift {worst:.1e} over {steps} rk4 steps"


def constant_data_error(dt: float, t_end: float = 5.0, N: int = 32) -> float:
    cfg = replace(preset_config("constant-data-ode"), N=N, dt=dt, t_end=t_end, sample_stride=1,
                  residuals=False)
    system, state = build(cfg)
    result = run(system, state, cfg.stepper())
    t = result.series("t")
    exact = oracles.logistic_tau(t, 0.5, cfg.lam)
    return float(np.max(np.abs(result.series("tau_max") - exact)))


def check_logistic(t_end: float = 5.0, dt: float = 1e-3, order_dt: float = 0.05) -> str:
    """Accuracy at ``dt``; the order is measured at ``order_dt``, where truncation
    error still dominates rounding (at dt = 1e-3 both are ~1e-15)."""
    e1 = constant_data_error(dt, t_end)
    require(e1 < 1e-6, f"logistic error {e1:.2e} at dt = {dt}")
    rate = constant_data_error(order_dt, t_end) / constant_data_error(order_dt / 2, t_end)
    require(12 < rate < 20, f"error ratio {rate:.1f} under dt halving (expected ~16)")
    return f"error {e1:.1e}, halving ratio {rate:.1f} at dt = {order_dt}"


def check_e_monotonicity(N: int = 64, t_end: float = 0.02) -> str:
    return _monotone_identity("perturbed-surface", "E", 0.01, t_end, N)


def check_m_monotonicity(N: int = 64, t_end: float = 0.02) -> str:
    return _monotone_identity("perturbed-potential-n1", "M", 0.01, t_end, N)


def check_e_hat(N: int = 64, t_end: float = 0.02) -> str:
    return _monotone_identity("kappa1-surface", "E_hat", 0.02, t_end, N)


def convergence_run(N: int = 128, t_end: float = 50.0, kappa: float | None = None):
    cfg = replace(preset_config("perturbed-surface"), N=N, t_end=t_end, residuals=False)
    if kappa is not None:
        cfg = replace(cfg, kappa=kappa)
    system, state = build(cfg)
    return run(system, state, cfg.stepper())


def check_convergence(N: int = 64, t_end: float = 50.0) -> str:
    result = convergence_run(N, t_end)
    s = result.final_state
    tau_err = float(np.max(np.abs(s.tau + s.lam)))
    r_sup = float(np.max(np.abs(s.R)))
    q = fn.q_functional(s)
    require(result.termination == Termination.CONVERGED, f"termination {result.termination.value}")
    require(tau_err < 1e-4 and r_sup < 1e-4 and q < 1e-8,
            f"|tau - 1| = {tau_err:.1e}, |R| = {r_sup:.1e}, Q = {q:.1e}")
    return f"converged at t = {s.t:.2f}, |tau - 1| = {tau_err:.1e}"


def check_positivity_gauss_bonnet(N: int = 64) -> str:
    runs = 0
    for name in ("perturbed-surface", "kappa1-surface", "perturbed-potential-n1"):
        cfg = replace(preset_config(name), N=N, t_end=2.0, residuals=False)
        system, state = build(cfg)
        result = run(system, state, cfg.stepper())
        require(np.min(result.series("tau_min")) > 0, f"{name}: tau lost positivity")
        gb = float(np.max(np.abs(result.series("gauss_bonnet"))))
        require(gb < 1e-9, f"{name}: Gauss-Bonnet defect {gb:.2e}")
        runs += 1
    return f"{runs} preset runs"


def smooth_surface_state(N: int = 32, kappa: float = 2.0) -> SurfaceState:
    g = Grid(1, N)
    x1, y1 = g.coords
    phi = 0.1 * np.cos(2 * np.pi * x1) + 0.05 * np.sin(2 * np.pi * (x1 + y1))
    tau = 1.0 + 0.1 * np.cos(2 * np.pi * y1)
    tau = tau / integrate(g, tau, np.exp(phi))
    return SurfaceState(g, phi, tau, lam=-1.0, kappa=kappa)


def residual_orders(dts=(2e-4, 1e-4, 5e-5), t_end: float = 4e-3, N: int = 32):
    """(r_residual, heat_residual) at t_end for each dt under RK4."""
    from .integrator import SurfaceSystem
    out = []
    s0 = smooth_surface_state(N)
    for dt in dts:
        system = SurfaceSystem(s0.grid, s0.lam, s0.kappa)
        cfg = StepperConfig(scheme="rk4", dt=dt, t_end=t_end, sample_stride=1)
        res = run(system, s0, cfg)
        out.append((res.samples[-1]["r_residual"], res.samples[-1]["heat_residual"]))
    return np.array(out)


def check_evolution_identities() -> str:
    res = residual_orders()
    orders = np.log2(res[:-1] / res[1:])
    require(np.all(orders >= 1.0), f"measured orders {orders.ravel().round(2).tolist()}")
    g = Grid(1, 32)
    st = SurfaceState(g, g.zeros(), g.constant(1.0), lam=-1.0, kappa=2.0)
    st1 = st.with_fields(st.phi.copy(), st.tau.copy(), 1e-3)
    stat = max(surf.r_evolution_residual(st, st1, 1e-3), surf.combined_heat_residual(st, st1, 1e-3))
    require(stat < 1e-9, f"stationary residual {stat:.2e}")
    k1 = replace(st, kappa=1.0)
    try:
        surf.combined_heat_residual(k1, k1, 1e-3)
    except KappaOne:
        pass
    else:
        raise CheckFailed("combined heat residual did not raise at kappa = 1")
    return f"orders {orders.min():.2f}..{orders.max():.2f}, stationary {stat:.1e}"


def random_potential(grid: Grid, rng, amplitude: float = 0.3, modes: int = 3) -> np.ndarray:
    return poisson_solve_flat(grid, band_limited_noise(grid, rng, modes, amplitude))


def check_functional_identities(count: int = 20, N: int = 32) -> str:
    rng = np.random.default_rng(7)
    g = Grid(1, N)
    worst_ij = worst_mu = worst_f = 0.0
    for _ in range(count):
        m = PotentialMetric(g, random_potential(g, rng))
        i_val, j_val = fn.i_functional(m), fn.j_functional(m)
        worst_ij = max(worst_ij, abs((i_val - j_val) - i_val / 2))
        u = random_potential(g, rng, 0.2)
        problem = FlowProblem.create(g, -1.0, 2.0, ClosedForm(g, 1.0, u))
        worst_mu = max(worst_mu, abs(fn.mabuchi_mu(m, problem) - oracles.mu_path(m, problem)))
        state = PotentialState(g, m.varphi, random_potential(g, rng, 0.2))
        worst_f = max(worst_f, abs(integrate(g, rhs_F(state, problem), state.metric.density)))
    require(worst_ij < 1e-10, f"I - J - I/2 = {worst_ij:.2e}")
    require(worst_mu < 1e-6, f"mu closed form vs path quadrature {worst_mu:.2e}")
    require(worst_f < 1e-8, f"int F_dot omega^n = {worst_f:.2e}")
    return f"I-J {worst_ij:.1e}, mu {worst_mu:.1e}, int F_dot {worst_f:.1e}"


def check_n2_smoke(N: int = 16, t_end: float = 1.0) -> str:
    seed = replace(preset_config("stationary"), formulation="potential", n_complex=2, N=N,
                   t_end=0.05, stop_tolerance=0.0, sample_stride=50)
    system, state = build(seed)
    result = run(system, state, seed.stepper())
    drift = max(float(np.max(np.abs(b - a)))
                for a, b in zip(system.fields(state), system.fields(result.final_state)))
    require(drift < 1e-9, f"flat seed drift {drift:.2e}")
    cfg = replace(preset_config("perturbed-potential-n2"), N=N, t_end=t_end, residuals=False)
    system, state = build(cfg)
    require(isinstance(system, PotentialSystem), "n = 2 preset is not a potential run")
    result = run(system, state, cfg.stepper())
    require(result.termination == Termination.TIME_EXHAUSTED, f"termination {result.termination.value}")
    excess = monotone_slack(result.series("M"))
    require(excess <= 0, f"M increased by {excess:.2e}")
    return f"seed drift {drift:.1e}, M {result.series('M')[0]:.3e} -> {result.series('M')[-1]:.3e}"


@dataclass
class Check:
    name: str
    func: Callable[[], str]
    description: str


CHECKS = [
    Check("spectral", check_spectral, "Laplacian eigenfunction and Poisson round trip"),
    Check("stationary", check_stationary, "flat stationary state preserved by RK4"),
    Check("logistic-oracle", lambda: check_logistic(t_end=2.0), "constant data vs logistic closed form"),
    Check("e-monotonicity", check_e_monotonicity, "E non-increasing with matching derivative"),
    Check("m-monotonicity", check_m_monotonicity, "M non-increasing with matching derivative"),
    Check("e-hat-kappa1", check_e_hat, "enhanced functional at kappa = 1"),
    Check("gauss-bonnet", check_positivity_gauss_bonnet, "tau > 0 and int R omega = 0 along presets"),
    Check("evolution-identities", check_evolution_identities, "curvature and W evolution residuals"),
    Check("functional-identities", lambda: check_functional_identities(count=5), "I, J, mu and int F_dot"),
    Check("convergence", check_convergence, "convergence to tau = -lambda, R = 0"),
    Check("n2-smoke", lambda: check_n2_smoke(N=8), "n = 2 seed preservation and M monotonicity"),
]


@dataclass
class Outcome:
    name: str
    passed: bool
    detail: str
    seconds: float


def run_checks(only: list[str] | None = None) -> list[Outcome]:
    known = {c.name: c for c in CHECKS}
    selected = CHECKS if not only else [known[n] for n in only]
    outcomes = []
    for check in selected:
        start = time.perf_counter()
        try:
            detail, ok = check.func(), True
        except CheckFailed as exc:
            detail, ok = str(exc), False
        except Exception as exc:  # any crash counts as a failed invariant
            detail, ok = f"{type(exc).__name__}: {exc}", False
        outcomes.append(Outcome(check.name, ok, detail, time.perf_counter() - start))
    return outcomes
