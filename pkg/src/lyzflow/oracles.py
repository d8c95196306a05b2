"""Independent reference computations used to cross-check the main code paths.

Nothing here reuses the closed-form functional expressions; the path
integrals go back to the defining formulas and integrate along
varphi_s = s varphi with Gauss-Legendre quadrature.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import PotentialMetric, laplace_beltrami, trace_form
from .potential import FlowProblem
from .spectral import integrate


def _path_nodes(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (x + 1.0), 0.5 * w


def j_path(m: PotentialMetric, nodes: int = 64) -> float:
    """J = (1/V) int_0^1 int varphi (omega_0^n - omega_{s varphi}^n) ds."""
    g = m.grid
    total = 0.0
    for s, w in zip(*_path_nodes(nodes)):
        ms = PotentialMetric(g, s * m.varphi)
        total += w * integrate(g, m.varphi * (1.0 - ms.density))
    return total / g.volume


def mu_path(m: PotentialMetric, p: FlowProblem, nodes: int = 64) -> float:
    """mu = -(n/V) int_0^1 int varphi (Ric_s - lambda omega_s - alpha_0) ^ omega_s^{n-1} ds."""
    g = m.grid
    n = g.n_complex
    total = 0.0
    for s, w in zip(*_path_nodes(nodes)):
        ms = PotentialMetric(g, s * m.varphi)
        ms.require_positive()
        rho = ms.density
        scal = -laplace_beltrami(ms, np.log(rho))
        integrand = m.varphi * (scal - n * p.lam - trace_form(ms, p.alpha0)) * rho
        total += w * integrate(g, integrand)
    return -total / g.volume


def constant_data_solution(t, phi0: float, tau0: float, lam: float, rtol: float = 1e-13):
    """High-accuracy solution of phi' = lambda + tau, tau' = -tau (lambda + tau)."""
    t = np.asarray(t, dtype=float)
    sol = solve_ivp(lambda _, y: [lam + y[1], -y[1] * (lam + y[1])],
                    (0.0, float(t[-1])), [phi0, tau0], method="DOP853",
                    t_eval=t, rtol=rtol, atol=1e-15)
    return sol.y[0], sol.y[1]


def logistic_tau(t, tau0: float, lam: float):
    """Closed form of tau' = -tau (lambda + tau): 1/tau = (1/tau0 + 1/lambda) e^{lambda t} - 1/lambda."""
    t = np.asarray(t, dtype=float)
    return 1.0 / ((1.0 / tau0 + 1.0 / lam) * np.exp(lam * t) - 1.0 / lam)


def comparison_ode_numeric(t, a: float, lam: float, kappa: float):
    """Numerical solution of f' = -(kappa/(kappa-1)) f^2 - lambda f, f(0) = a."""
    t = np.asarray(t, dtype=float)
    p = kappa / (kappa - 1.0)
    sol = solve_ivp(lambda _, y: [-p * y[0] ** 2 - lam * y[0]], (0.0, float(t[-1])), [a],
                    method="DOP853", t_eval=t, rtol=1e-13, atol=1e-15)
    return sol.y[0]
