"""The coupled flow on a Riemann surface in conformal variables (phi, tau).

With ``omega = e^phi omega_0`` and ``tau = tr_omega alpha`` the flow reads

    phi_t = -R + lambda + tau
    tau_t = kappa Delta_omega tau - tau (-R + lambda + tau)

and the scalar curvature obeys ``R_t = Delta R - Delta tau - R (-R + lambda + tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import KappaOne, KappaRange
from .geometry import (ClosedForm, ConformalMetric, laplace_beltrami,
                       scalar_curvature_conformal)
from .spectral import Grid, check_finite, integrate


@dataclass(frozen=True, eq=False)
class SurfaceState:
    grid: Grid
    phi: np.ndarray
    tau: np.ndarray
    t: float = 0.0
    lam: float = -1.0
    kappa: float = 2.0

    def __post_init__(self):
        if self.grid.n_complex != 1:
            raise ValueError("the surface formulation requires n_complex = 1")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @cached_property
    def metric(self) -> ConformalMetric:
        return ConformalMetric(self.grid, self.phi)

    @cached_property
    def R(self) -> np.ndarray:
        return scalar_curvature_conformal(self.metric)

    @cached_property
    def phi_dot(self) -> np.ndarray:
        """-R + lambda + tau (undealiased)."""
        return -self.R + self.lam + self.tau

    def with_fields(self, phi, tau, t) -> "SurfaceState":
        return replace(self, phi=phi, tau=tau, t=t)

    def alpha(self) -> ClosedForm:
        """Reconstruct alpha = tau e^phi omega_0."""
        return ClosedForm.from_density(self.grid, self.tau * self.metric.factor)

    def volume(self) -> float:
        return integrate(self.grid, self.metric.factor)

    def class_integral(self) -> float:
        """int alpha = int tau e^phi omega_0, conserved by the flow."""
        return integrate(self.grid, self.tau, self.metric.factor)


def rhs_phi(s: SurfaceState) -> np.ndarray:
    return s.phi_dot


def rhs_tau(s: SurfaceState) -> np.ndarray:
    return s.kappa * laplace_beltrami(s.metric, s.tau) - s.tau * s.phi_dot


def r_evolution_rhs(s: SurfaceState) -> np.ndarray:
    """Delta_omega R - Delta_omega tau - R (-R + lambda + tau)."""
    return laplace_beltrami(s.metric, s.R - s.tau) - s.R * s.phi_dot


def combined_quantity(s: SurfaceState) -> np.ndarray:
    """W = R + tau / (kappa - 1)."""
    if s.kappa == 1:
        raise KappaOne("R + tau/(kappa-1) is undefined at kappa = 1")
    return s.R + s.tau / (s.kappa - 1)


def combined_heat_rhs(s: SurfaceState) -> np.ndarray:
    w = combined_quantity(s)
    return laplace_beltrami(s.metric, w) - w * s.phi_dot


def r_evolution_residual_field(before: SurfaceState, after: SurfaceState, dt: float) -> np.ndarray:
    # time derivative by forward difference, right-hand side averaged over both ends
    return (after.R - before.R) / dt - 0.5 * (r_evolution_rhs(before) + r_evolution_rhs(after))


def combined_heat_residual_field(before: SurfaceState, after: SurfaceState, dt: float) -> np.ndarray:
    w0, w1 = combined_quantity(before), combined_quantity(after)
    return (w1 - w0) / dt - 0.5 * (combined_heat_rhs(before) + combined_heat_rhs(after))


def r_evolution_residual(before: SurfaceState, after: SurfaceState, dt: float) -> float:
    """Sup-norm defect of the discrete R trajectory in the curvature evolution identity."""
    return float(np.max(np.abs(r_evolution_residual_field(before, after, dt))))


def combined_heat_residual(before: SurfaceState, after: SurfaceState, dt: float) -> float:
    """Sup-norm defect of W = R + tau/(kappa-1) in its heat identity; KappaOne at kappa = 1."""
    return float(np.max(np.abs(combined_heat_residual_field(before, after, dt))))


@dataclass
class MaxPrincipleRecord:
    tau_min: float
    tau_max: float
    R_min: float
    R_max: float
    W_max: float  # NaN when kappa = 1
    tau_positive_preserved: bool
    R_negative_preserved: bool | None
    W_negative_preserved: bool | None


def max_principle_monitors(s: SurfaceState, initial: SurfaceState | None = None) -> MaxPrincipleRecord:
    """Extrema of tau, R and W plus sign preservation relative to ``initial``.

    The R and W flags are ``None`` when the corresponding sign did not hold
    initially (nothing to preserve).
    """
    check_finite(s.tau, "tau")
    w_max = float(np.max(combined_quantity(s))) if s.kappa != 1 else float("nan")
    ref = initial if initial is not None else s
    tau0_pos = float(np.min(ref.tau)) > 0
    tau_ok = (float(np.min(s.tau)) > 0) if tau0_pos else True
    r_flag = float(np.max(s.R)) < 0 if float(np.max(ref.R)) < 0 else None
    w_flag = None
    if s.kappa != 1 and float(np.max(combined_quantity(ref))) < 0:
        w_flag = w_max < 0
    return MaxPrincipleRecord(
        tau_min=float(np.min(s.tau)),
        tau_max=float(np.max(s.tau)),
        R_min=float(np.min(s.R)),
        R_max=float(np.max(s.R)),
        W_max=w_max,
        tau_positive_preserved=tau_ok,
        R_negative_preserved=r_flag,
        W_negative_preserved=w_flag,
    )


@dataclass
class TauComparison:
    times: np.ndarray
    bound: np.ndarray
    equilibrium: float
    closed_form_bound: float
    below_equilibrium: bool


def comparison_solution(t, a: float, lam: float, kappa: float) -> np.ndarray:
    """Solution of f' = -(kappa/(kappa-1)) f^2 - lambda f with f(0) = a.

    Bernoulli substitution u = 1/f gives u' = p + lambda u with p = kappa/(kappa-1).
    """
    p = kappa / (kappa - 1.0)
    t = np.asarray(t, dtype=float)
    growth = t if lam == 0 else np.expm1(lam * t) / lam
    u = np.exp(lam * t) / a + p * growth
    return 1.0 / u


def tau_ode_comparison(times, tau_max_series, lam: float, kappa: float) -> TauComparison:
    """Upper comparison for tau_max started from tau_max(0).

    Valid as a bound on tau_max while R + tau/(kappa-1) < 0 persists.
    The closed-form constant C(a, lambda) is max(a, (kappa-1)|lambda|/kappa).
    """
    if kappa <= 1:
        raise KappaRange(f"comparison ODE requires kappa > 1, got {kappa}")
    a = float(np.asarray(tau_max_series, dtype=float)[0])
    if not a > 0:
        raise ValueError("tau_max(0) must be positive")
    eq = (kappa - 1.0) * max(-lam, 0.0) / kappa
    return TauComparison(
        times=np.asarray(times, dtype=float),
        bound=comparison_solution(times, a, lam, kappa),
        equilibrium=eq,
        closed_form_bound=max(a, eq),
        below_equilibrium=a < eq,
    )
