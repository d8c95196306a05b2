"""Potential formulation of the coupled flow for n = 1, 2.

    omega_t = omega_0 + i d dbar varphi,   alpha_t = alpha_0 - i d dbar F

    varphi_t = log(omega_t^n / omega_0^n) - H_0 + lambda varphi - F
    F_t      = kappa Delta_omega F - kappa tr_omega alpha_0 + kappa b
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import CohomologyMismatch
from .geometry import (ClosedForm, PotentialMetric, laplace_beltrami,
                       trace_form, volume_density)
from .spectral import Grid, integrate


def build_b(alpha0: ClosedForm, grid: Grid) -> float:
    """b = (n/V) int alpha_0 ^ omega_0^{n-1}; makes int F_t omega_t^n vanish."""
    return grid.n_complex * alpha0.class_integral / grid.volume


def build_H0(grid: Grid, lam: float, alpha0: ClosedForm, tol: float = 1e-10) -> np.ndarray:
    """Ricci potential with i d dbar H_0 = -lambda omega_0 - alpha_0 and int e^{H_0} = V.

    On the flat torus alpha_0 = -lambda omega_0 + i d dbar u forces H_0 = -u + const.
    """
    target = -lam * grid.volume
    if abs(alpha0.class_integral - target) > tol * max(1.0, abs(target)):
        raise CohomologyMismatch(
            f"class integral {alpha0.class_integral:.12g} != -lambda V = {target:.12g}")
    h = -alpha0.potential_u
    # the normalising constant solves a monotone scalar equation with explicit root
    return h - np.log(integrate(grid, np.exp(h)) / grid.volume)


@dataclass(frozen=True, eq=False)
class FlowProblem:
    grid: Grid
    lam: float
    kappa: float
    alpha0: ClosedForm
    H0: np.ndarray
    b: float

    @classmethod
    def create(cls, grid: Grid, lam: float, kappa: float, alpha0: ClosedForm) -> "FlowProblem":
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        return cls(grid, float(lam), float(kappa), alpha0,
                   build_H0(grid, lam, alpha0), build_b(alpha0, grid))

    @property
    def V(self) -> float:
        return self.grid.volume


@dataclass(frozen=True, eq=False)
class PotentialState:
    grid: Grid
    varphi: np.ndarray
    F: np.ndarray
    t: float = 0.0
    lam: float = -1.0
    kappa: float = 2.0

    @cached_property
    def metric(self) -> PotentialMetric:
        return PotentialMetric(self.grid, self.varphi)

    def with_fields(self, varphi, F, t) -> "PotentialState":
        return replace(self, varphi=varphi, F=F, t=t)

    def alpha(self, p: FlowProblem) -> ClosedForm:
        """alpha_t = alpha_0 - i d dbar F."""
        return p.alpha0.shifted(-self.F)


def rhs_varphi(s: PotentialState, p: FlowProblem) -> np.ndarray:
    return np.log(volume_density(s.metric)) - p.H0 + p.lam * s.varphi - s.F


def rhs_F(s: PotentialState, p: FlowProblem) -> np.ndarray:
    m = s.metric
    return p.kappa * (laplace_beltrami(m, s.F) - trace_form(m, p.alpha0) + p.b)


def lemma11_monitor(s: PotentialState) -> float:
    """sup |varphi + F|."""
    return float(np.max(np.abs(s.varphi + s.F)))


def stationarity_residual(s: PotentialState, p: FlowProblem) -> tuple[float, float]:
    """Sup-norms of the two stationary equations.

    ``log det G - H_0 - lambda varphi + F`` style residuals are evaluated with
    the sign convention of the evolution equation, so they coincide with
    ``sup |rhs_varphi|`` and ``sup |rhs_F| / kappa``.
    """
    r1 = rhs_varphi(s, p)
    m = s.metric
    r2 = laplace_beltrami(m, s.F) - trace_form(m, p.alpha0) + p.b
    return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


def conformal_data(s: PotentialState, p: FlowProblem):
    """(phi, tau) of the equivalent conformal description (n = 1 only)."""
    if s.grid.n_complex != 1:
        raise ValueError("conformal data only exist for n = 1")
    m = s.metric
    return np.log(volume_density(m)), trace_form(m, s.alpha(p))
