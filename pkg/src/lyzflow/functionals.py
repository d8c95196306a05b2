"""Monotone and diagnostic functionals with their predicted time derivatives.

Surface flow: the Liouville-entropy energy E, the kappa = 1 enhancement
E_hat = E + int R^2/tau omega, and Q. Potential flow: I, J, the
Mabuchi-type mu and M = mu - (1/V) int F omega^n.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import KappaNotOne, NonPositiveTau
from .geometry import PotentialMetric, gradient_squared, volume_density
from .potential import FlowProblem, PotentialState, rhs_varphi
from .spectral import gradient_flat, gradient_squared_flat, integrate, mean
from .surface import SurfaceState

NAN = float("nan")


def _require_positive_tau(s: SurfaceState) -> None:
    lo = float(np.min(s.tau))
    if not lo > 0:
        raise NonPositiveTau(f"min tau = {lo:.3e}")


def _xlogx(x: np.ndarray) -> np.ndarray:
    # extended by 0 at x = 0
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


# -- surface flow ----------------------------------------------------------

def liouville_entropy_E(s: SurfaceState, R0=None) -> float:
    """E = int (1/2 |grad phi|^2 + R0 phi - lambda e^phi - tau e^phi) + int tau log tau e^phi."""
    _require_positive_tau(s)
    g = s.grid
    ephi = s.metric.factor
    energy = 0.5 * gradient_squared_flat(g, s.phi) - s.lam * ephi - s.tau * ephi
    if R0 is not None:
        energy = energy + R0 * s.phi
    return integrate(g, energy) + integrate(g, _xlogx(s.tau), ephi)


def dE_dt_theory(s: SurfaceState) -> float:
    """-int phi_dot^2 omega - kappa int |grad tau|^2 / tau omega."""
    _require_positive_tau(s)
    g = s.grid
    return (-integrate(g, s.phi_dot ** 2, s.metric.factor)
            - s.kappa * integrate(g, gradient_squared_flat(g, s.tau) / s.tau))


def q_functional(s: SurfaceState) -> float:
    """int (-R + lambda + tau)^2 omega + int |grad tau|^2_omega omega."""
    g = s.grid
    # |grad f|^2_omega omega = |grad f|^2_0 omega_0 in complex dimension one
    return integrate(g, s.phi_dot ** 2, s.metric.factor) + integrate(g, gradient_squared_flat(g, s.tau))


def enhanced_E_hat(s: SurfaceState) -> float:
    _require_positive_tau(s)
    return liouville_entropy_E(s) + integrate(s.grid, s.R ** 2 / s.tau, s.metric.factor)


def dE_hat_dt_theory(s: SurfaceState) -> float:
    """Predicted dE_hat/dt; the formula only holds when kappa = 1."""
    if s.kappa != 1:
        raise KappaNotOne(f"enhanced derivative requires kappa = 1, got {s.kappa}")
    _require_positive_tau(s)
    g = s.grid
    grad_r = gradient_flat(g, s.R)
    grad_t = gradient_flat(g, s.tau)
    coef = 0.5 + s.R / s.tau
    mixed = 0.5 * sum((gr - coef * gt) ** 2 for gr, gt in zip(grad_r, grad_t))
    grad_t2 = 0.5 * sum(gt * gt for gt in grad_t)
    return (-integrate(g, s.phi_dot ** 2, s.metric.factor)
            - integrate(g, grad_t2 / (2.0 * s.tau))
            - integrate(g, 2.0 * mixed / s.tau))


@dataclass
class LowerBoundTerms:
    gradient_quarter: float
    phi_bar: float


def lower_bound_terms(s: SurfaceState) -> LowerBoundTerms:
    """int 1/4 |grad phi|^2 omega_0 and the flat mean of phi (chi = 0 on the torus)."""
    g = s.grid
    return LowerBoundTerms(0.25 * integrate(g, gradient_squared_flat(g, s.phi)), mean(g, s.phi))


# -- potential flow --------------------------------------------------------

def _wedge2(m: PotentialMetric, b):
    """(i df ^ dbar f) ^ omega_phi / omega_0^2 with b the matrix of the first factor."""
    a, d, c = m.components
    p, s, q = b
    tr_ab = p * a + s * d + 2.0 * np.real(q * np.conj(c))
    return 0.5 * ((p + s) * (a + d) - tr_ab)


def _gradient_terms(m: PotentialMetric):
    """Densities of i dphi ^ dbar phi ^ omega_0^{n-1-k} ^ omega_phi^k for k = 0..n-1."""
    g = m.grid
    grad_sq = gradient_squared_flat(g, m.varphi)
    if m.n_complex == 1:
        return [grad_sq]
    grads = gradient_flat(g, m.varphi)
    v1 = 0.5 * (grads[0] - 1j * grads[1])
    v2 = 0.5 * (grads[2] - 1j * grads[3])
    b = (2.0 * np.abs(v1) ** 2, 2.0 * np.abs(v2) ** 2, 2.0 * v1 * np.conj(v2))
    return [0.5 * grad_sq, _wedge2(m, b)]


def i_functional(m: PotentialMetric) -> float:
    """I = (1/V) int varphi (omega_0^n - omega_phi^n)."""
    g = m.grid
    return integrate(g, m.varphi * (1.0 - volume_density(m))) / g.volume


def i_functional_sum(m: PotentialMetric) -> float:
    """I through the sum of gradient wedge products."""
    m.require_positive()
    return sum(integrate(m.grid, t) for t in _gradient_terms(m)) / m.grid.volume


def j_functional(m: PotentialMetric) -> float:
    """J = (1/V) sum_k (n-k)/(n+1) int i dphi ^ dbar phi ^ omega_0^{n-1-k} ^ omega_phi^k."""
    m.require_positive()
    n = m.n_complex
    terms = _gradient_terms(m)
    return sum((n - k) / (n + 1) * integrate(m.grid, t) for k, t in enumerate(terms)) / m.grid.volume


def entropy(m: PotentialMetric) -> float:
    """int log(omega^n/omega_0^n) omega^n."""
    return integrate(m.grid, _xlogx(volume_density(m)))


def mabuchi_mu(m: PotentialMetric, p: FlowProblem) -> float:
    g = m.grid
    rho = volume_density(m)
    V = g.volume
    return (entropy(m) / V
            - p.lam * (i_functional(m) - j_functional(m))
            - integrate(g, p.H0, rho) / V
            + integrate(g, p.H0) / V)


def m_functional(s: PotentialState, p: FlowProblem) -> float:
    m = s.metric
    return mabuchi_mu(m, p) - integrate(s.grid, s.F, volume_density(m)) / p.V


def dM_dt_theory(s: PotentialState, p: FlowProblem) -> float:
    """-(1/V) int |grad varphi_dot|^2_omega omega^n."""
    m = s.metric
    vdot = rhs_varphi(s, p)
    return -integrate(s.grid, gradient_squared(m, vdot), volume_density(m)) / p.V


# -- sampled records -------------------------------------------------------

@dataclass
class FunctionalSample:
    t: float
    E: float = NAN
    E_hat: float = NAN
    Q: float = NAN
    I: float = NAN
    J: float = NAN
    mu: float = NAN
    M: float = NAN
    dE_dt_theory: float = NAN
    dE_hat_dt_theory: float = NAN
    dM_dt_theory: float = NAN
    entropy: float = NAN
    lower_bound_E: float = NAN

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def surface_sample(s: SurfaceState) -> FunctionalSample:
    lb = lower_bound_terms(s)
    out = FunctionalSample(
        t=s.t,
        E=liouville_entropy_E(s),
        Q=q_functional(s),
        dE_dt_theory=dE_dt_theory(s),
        entropy=integrate(s.grid, s.phi, s.metric.factor),
        lower_bound_E=lb.gradient_quarter,
    )
    if s.kappa == 1:
        out.E_hat = enhanced_E_hat(s)
        out.dE_hat_dt_theory = dE_hat_dt_theory(s)
    return out


def potential_sample(s: PotentialState, p: FlowProblem) -> FunctionalSample:
    m = s.metric
    i_val, j_val = i_functional(m), j_functional(m)
    return FunctionalSample(
        t=s.t,
        I=i_val,
        J=j_val,
        mu=mabuchi_mu(m, p),
        M=m_functional(s, p),
        dM_dt_theory=dM_dt_theory(s, p),
        entropy=entropy(m),
    )
