"""Time stepping, step-size control and the run loop for both formulations."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from . import functionals as fn
from . import potential as pot
from . import surface as surf
from .errors import CflViolation, MetricDegenerate, NonFiniteError
from .geometry import k_equivalence, scalar_curvature_potential, trace_form
from .spectral import Grid, integrate, mean

log = logging.getLogger(__name__)

# RK4 stability interval on the negative real axis
RK4_STABILITY = 2.785

MONITOR_COLUMNS = [
    "dt", "tau_min", "tau_max", "R_min", "R_max", "W_max", "K", "gauss_bonnet",
    "volume", "class_integral", "phi_bar", "rhs_sup_1", "rhs_sup_2",
    "r_residual", "heat_residual", "phi_F_sup", "stat_res_1", "stat_res_2",
    "int_Fdot", "min_eigenvalue",
]
COLUMNS = fn.FunctionalSample.names() + MONITOR_COLUMNS


class Termination(str, Enum):
    CONVERGED = "Converged"
    TIME_EXHAUSTED = "TimeExhausted"
    METRIC_DEGENERATE = "MetricDegenerate"
    NON_FINITE = "NonFinite"


@dataclass
class StepperConfig:
    scheme: str = "imex"
    dt: float = 1e-3
    adaptive: bool = False
    cfl_safety: float = 0.9
    t_end: float = 1.0
    sample_stride: int = 10
    stop_tolerance: float = 0.0
    dt_max: float = 0.05
    residuals: bool = True

    def __post_init__(self):
        if self.scheme not in ("rk4", "imex"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.dt <= 0 or self.sample_stride < 1:
            raise ValueError("dt must be positive and sample_stride >= 1")


@dataclass
class RunResult:
    final_state: object
    samples: list[dict]
    termination: Termination
    steps: int = 0
    message: str = ""

    def series(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.samples])


def _sup(f) -> float:
    return float(np.max(np.abs(f)))


def _uniform(fields) -> bool:
    return all(np.ptp(f) == 0.0 for f in fields)


class SurfaceSystem:
    """(phi, tau) flow on the flat torus, n = 1."""

    formulation = "surface"
    field_names = ("phi", "tau")

    def __init__(self, grid: Grid, lam: float, kappa: float):
        self.grid, self.lam, self.kappa = grid, lam, kappa
        self.initial = None

    def fields(self, s):
        return s.phi, s.tau

    def make(self, s, fields, t):
        return s.with_fields(fields[0], fields[1], t)

    def validate(self, s) -> None:
        for name, f in zip(self.field_names, self.fields(s)):
            if not np.all(np.isfinite(f)):
                raise NonFiniteError(f"{name} is non-finite at t = {s.t}")

    def tendencies(self, s):
        return surf.rhs_phi(s), surf.rhs_tau(s)

    def diffusivity(self, s):
        """Pointwise bounds of the Laplacian coefficient of each equation."""
        lo, hi = float(np.min(s.metric.inverse_factor)), float(np.max(s.metric.inverse_factor))
        return (lo, self.kappa * lo), (hi, self.kappa * hi)

    def rhs_norm(self, s) -> float:
        return _sup(surf.rhs_phi(s)) + _sup(surf.rhs_tau(s))

    def record(self, s, prev=None, dt=None) -> dict:
        g = self.grid
        row = fn.surface_sample(s).as_dict()
        mon = surf.max_principle_monitors(s, self.initial)
        row.update(
            tau_min=mon.tau_min, tau_max=mon.tau_max, R_min=mon.R_min, R_max=mon.R_max,
            W_max=mon.W_max,
            # alpha relative to omega has the single eigenvalue tau
            K=max(k_equivalence(s.metric), float(np.max(np.abs(s.tau)))),
            gauss_bonnet=integrate(g, s.R, s.metric.factor),
            volume=s.volume(),
            class_integral=s.class_integral(),
            phi_bar=mean(g, s.phi),
            rhs_sup_1=_sup(surf.rhs_phi(s)),
            rhs_sup_2=_sup(surf.rhs_tau(s)),
        )
        if prev is not None and dt:
            row["r_residual"] = surf.r_evolution_residual(prev, s, dt)
            if self.kappa != 1:
                row["heat_residual"] = surf.combined_heat_residual(prev, s, dt)
        return row


class PotentialSystem:
    """(varphi, F) flow for n = 1, 2."""

    formulation = "potential"
    field_names = ("varphi", "F")

    def __init__(self, problem: pot.FlowProblem):
        self.problem = problem
        self.grid, self.lam, self.kappa = problem.grid, problem.lam, problem.kappa
        self.initial = None

    def fields(self, s):
        return s.varphi, s.F

    def make(self, s, fields, t):
        return s.with_fields(fields[0], fields[1], t)

    def validate(self, s) -> None:
        for name, f in zip(self.field_names, self.fields(s)):
            if not np.all(np.isfinite(f)):
                raise NonFiniteError(f"{name} is non-finite at t = {s.t}")
        s.metric.require_positive(t=s.t)

    def tendencies(self, s):
        return pot.rhs_varphi(s, self.problem), pot.rhs_F(s, self.problem)

    def diffusivity(self, s):
        # the linearisation of log det G is tr(G^{-1} .), coefficients in [1/max eig, 1/min eig]
        lo_eig, hi_eig = s.metric.eigenvalue_range
        lo, hi = 1.0 / float(np.max(hi_eig)), 1.0 / float(np.min(lo_eig))
        return (lo, self.kappa * lo), (hi, self.kappa * hi)

    def rhs_norm(self, s) -> float:
        a, b = self.tendencies(s)
        return _sup(a) + _sup(b)

    def record(self, s, prev=None, dt=None) -> dict:
        p, g, m = self.problem, self.grid, s.metric
        row = fn.potential_sample(s, p).as_dict()
        rho = m.density
        tau = trace_form(m, s.alpha(p))
        R = scalar_curvature_potential(m)
        r1, r2 = pot.stationarity_residual(s, p)
        fdot = pot.rhs_F(s, p)
        row.update(
            tau_min=float(np.min(tau)), tau_max=float(np.max(tau)),
            R_min=float(np.min(R)), R_max=float(np.max(R)),
            K=k_equivalence(m, s.alpha(p)),
            gauss_bonnet=integrate(g, R, rho),
            volume=integrate(g, rho),
            class_integral=s.alpha(p).class_integral,
            phi_bar=mean(g, s.varphi),
            rhs_sup_1=r1, rhs_sup_2=_sup(fdot),
            phi_F_sup=pot.lemma11_monitor(s),
            stat_res_1=r1, stat_res_2=r2,
            int_Fdot=integrate(g, fdot, rho),
            min_eigenvalue=m.min_eigenvalue,
        )
        return row


def _dealias_hat(grid: Grid, fhat):
    return np.where(grid.dealias_mask, fhat, 0.0)


def cfl_limit(system, s, safety: float = 1.0) -> float:
    """Largest stable RK4 step for the diffusive terms (inf for uniform data)."""
    if _uniform(system.fields(s)):
        # Delta_0 annihilates spatially constant fields exactly
        return float("inf")
    coeff = max(system.diffusivity(s)[1])
    return safety * RK4_STABILITY / (coeff * system.grid.max_retained_symbol)


def rhs(system, s):
    """Dealiased tendencies of every evolved field."""
    g = system.grid
    return tuple(g.ifft(_dealias_hat(g, g.fft(f))) for f in system.tendencies(s))


def step_rk4(system, s, dt: float, safety: float = 1.0):
    limit = cfl_limit(system, s, safety)
    if dt > limit:
        raise CflViolation(f"dt = {dt:.3e} exceeds RK4 limit {limit:.3e}")
    u0 = system.fields(s)
    t0 = s.t

    def stage(k, c):
        return system.make(s, tuple(u + c * dt * ki for u, ki in zip(u0, k)), t0 + c * dt)

    k1 = rhs(system, s)
    k2 = rhs(system, stage(k1, 0.5))
    k3 = rhs(system, stage(k2, 0.5))
    k4 = rhs(system, stage(k3, 1.0))
    g = system.grid
    new = []
    for u, a, b, c, d in zip(u0, k1, k2, k3, k4):
        v = u + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
        new.append(g.ifft(_dealias_hat(g, g.fft(v))))
    out = system.make(s, tuple(new), t0 + dt)
    system.validate(out)
    return out


def step_imex(system, s, dt: float):
    """Implicit Euler on m Delta_0 u (m = smallest pointwise diffusivity), explicit Euler on the rest."""
    g = system.grid
    coeffs = system.diffusivity(s)[0]
    new = []
    for u, full, m in zip(system.fields(s), system.tendencies(s), coeffs):
        uhat = g.fft(u)
        # explicit remainder: full - m Delta_0 u
        nhat = g.fft(full) - m * g.laplacian_symbol * uhat
        vhat = (uhat + dt * nhat) / (1.0 - dt * m * g.laplacian_symbol)
        new.append(g.ifft(_dealias_hat(g, vhat)))
    out = system.make(s, tuple(new), s.t + dt)
    system.validate(out)
    return out


def prepare(system, s):
    """Project the initial fields onto the dealiased band."""
    g = system.grid
    fields = tuple(g.ifft(_dealias_hat(g, g.fft(f))) if not _uniform([f]) else f
                   for f in system.fields(s))
    return system.make(s, fields, s.t)


def run(system, initial, config: StepperConfig,
        on_sample: Callable[[object, dict, dict], None] | None = None,
        resume: dict | None = None) -> RunResult:
    """Advance until t_end or until the right-hand side sup-norms drop below stop_tolerance.

    ``on_sample(state, row, control)`` sees every sample; ``control`` holds the
    step-size controller state (dt, clean, steps), which can be passed back as
    ``resume`` to continue a run bit-for-bit from a snapshot.
    """
    samples: list[dict] = []
    try:
        system.validate(initial)
    except MetricDegenerate as exc:
        return RunResult(initial, samples, Termination.METRIC_DEGENERATE, 0, str(exc))
    except NonFiniteError as exc:
        return RunResult(initial, samples, Termination.NON_FINITE, 0, str(exc))

    s = prepare(system, initial) if not _uniform(system.fields(initial)) else initial
    system.initial = s
    control = {"dt": config.dt, "clean": 0, "steps": 0, **(resume or {})}
    dt, clean, steps = control["dt"], control["clean"], control["steps"]
    prev, prev_dt = None, None
    eps = 1e-12 * max(1.0, config.t_end)

    def sample(state, before, step_dt):
        row = dict.fromkeys(COLUMNS, float("nan"))
        row.update(system.record(state, before if config.residuals else None, step_dt))
        row["dt"] = step_dt if step_dt else dt
        samples.append(row)
        if on_sample is not None:
            on_sample(state, row, {"dt": dt, "clean": clean, "steps": steps})
        return row

    def converged(row) -> bool:
        return config.stop_tolerance > 0 and row["rhs_sup_1"] + row["rhs_sup_2"] < config.stop_tolerance

    try:
        row = sample(s, None, None)
        if converged(row):
            return RunResult(s, samples, Termination.CONVERGED, 0)
        while s.t < config.t_end - eps:
            h = min(dt, config.t_end - s.t)
            try:
                # overflow in a failing trial step is reported through NonFiniteError
                with np.errstate(over="ignore", invalid="ignore"):
                    if config.scheme == "rk4":
                        new = step_rk4(system, s, h, config.cfl_safety)
                    else:
                        new = step_imex(system, s, h)
            except (CflViolation, NonFiniteError):
                if not config.adaptive or dt < 1e-12:
                    raise
                dt *= 0.5
                clean = 0
                continue
            prev, prev_dt, s = s, h, new
            steps += 1
            clean += 1
            if config.adaptive and clean >= 50:
                clean = 0
                cap = (cfl_limit(system, s, config.cfl_safety) if config.scheme == "rk4"
                       else config.dt_max)
                dt = min(dt * 1.2, cap)
            if steps % config.sample_stride == 0:
                row = sample(s, prev, prev_dt)
                if converged(row):
                    return RunResult(s, samples, Termination.CONVERGED, steps)
        if samples[-1]["t"] < s.t:
            row = sample(s, prev, prev_dt)
            if converged(row):
                return RunResult(s, samples, Termination.CONVERGED, steps)
        return RunResult(s, samples, Termination.TIME_EXHAUSTED, steps)
    except MetricDegenerate as exc:
        log.warning("run aborted: %s", exc)
        return RunResult(s, samples, Termination.METRIC_DEGENERATE, steps, str(exc))
    except NonFiniteError as exc:
        log.warning("run aborted: %s", exc)
        return RunResult(s, samples, Termination.NON_FINITE, steps, str(exc))
