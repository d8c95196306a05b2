"""Metric-dependent quantities on the flat torus.

Two metric representations are supported:

* :class:`ConformalMetric` -- ``omega = e^phi omega_0`` (n = 1 only);
* :class:`PotentialMetric` -- ``omega = omega_0 + i d dbar varphi`` (n = 1, 2).

Scalar curvature follows the Kahler convention ``R = tr_omega Ric(omega)``
with ``Ric = -i d dbar log omega^n``; the Riemannian scalar curvature is 2R.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import MetricDegenerate
from .spectral import (Grid, check_finite, complex_hessian, gradient_flat,
                       integrate, laplacian_flat, poisson_solve_flat)

DEGENERACY_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    grid: Grid
    phi: np.ndarray

    def __post_init__(self):
        if self.grid.n_complex != 1:
            raise ValueError("conformal metrics are only used for n = 1")
        check_finite(self.phi, "phi")

    @cached_property
    def factor(self) -> np.ndarray:
        """Volume density e^phi relative to omega_0."""
        return np.exp(self.phi)

    @cached_property
    def inverse_factor(self) -> np.ndarray:
        return np.exp(-self.phi)

    def density(self) -> np.ndarray:
        return self.factor


@dataclass(frozen=True, eq=False)
class PotentialMetric:
    """omega_t = omega_0 + i d dbar varphi, stored as a pointwise Hermitian matrix G.

    For n = 1, ``G`` is the scalar ``1 + Delta_0 varphi``. For n = 2 the
    components ``(a, d, c)`` describe ``[[a, c], [conj(c), d]]``.
    """

    grid: Grid
    varphi: np.ndarray

    def __post_init__(self):
        check_finite(self.varphi, "varphi")

    @property
    def n_complex(self) -> int:
        return self.grid.n_complex

    @cached_property
    def components(self):
        h = complex_hessian(self.grid, self.varphi)
        if self.n_complex == 1:
            return 1.0 + h
        a, d, c = h
        return 1.0 + a, 1.0 + d, c

    @cached_property
    def eigenvalue_range(self) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise (smallest, largest) eigenvalue of G."""
        if self.n_complex == 1:
            g = self.components
            return g, g
        a, d, c = self.components
        half_tr = 0.5 * (a + d)
        disc = np.sqrt(0.25 * (a - d) ** 2 + np.abs(c) ** 2)
        return half_tr - disc, half_tr + disc

    @cached_property
    def min_eigenvalue(self) -> float:
        return float(np.min(self.eigenvalue_range[0]))

    def require_positive(self, t=None) -> None:
        lo = self.min_eigenvalue
        if not lo > DEGENERACY_THRESHOLD:
            raise MetricDegenerate(
                f"metric not positive: smallest eigenvalue {lo:.3e}", t=t)

    @cached_property
    def density(self) -> np.ndarray:
        """omega_t^n / omega_0^n = det G."""
        if self.n_complex == 1:
            return self.components
        a, d, c = self.components
        return a * d - np.abs(c) ** 2

    def trace_inverse(self, b) -> np.ndarray:
        """Pointwise tr(G^{-1} B) for a Hermitian B in the same component layout."""
        if self.n_complex == 1:
            return b / self.components
        a, d, c = self.components
        p, s, q = b
        return (d * p + a * s - 2.0 * np.real(c * np.conj(q))) / self.density

    def inverse(self):
        """Pointwise inverse G^{-1} (scalar for n = 1, components otherwise)."""
        if self.n_complex == 1:
            return 1.0 / self.components
        a, d, c = self.components
        det = self.density
        return d / det, a / det, -c / det


@dataclass(frozen=True, eq=False)
class ClosedForm:
    """A real closed (1,1)-form alpha = c omega_0 + i d dbar u on the torus.

    Every closed form is of this type on a flat torus once harmonic parts
    other than multiples of omega_0 are excluded.
    """

    grid: Grid
    c: float
    potential_u: np.ndarray

    @classmethod
    def from_density(cls, grid: Grid, density: np.ndarray) -> "ClosedForm":
        """Build alpha = a omega_0 for n = 1 from its density a."""
        if grid.n_complex != 1:
            raise ValueError("from_density is only defined for n = 1")
        c = float(np.mean(density))
        return cls(grid, c, poisson_solve_flat(grid, density - c))

    @classmethod
    def multiple_of_background(cls, grid: Grid, c: float) -> "ClosedForm":
        return cls(grid, float(c), grid.zeros())

    @cached_property
    def components(self):
        h = complex_hessian(self.grid, self.potential_u)
        if self.grid.n_complex == 1:
            return self.c + h
        a, d, q = h
        return self.c + a, self.c + d, q

    @property
    def density(self) -> np.ndarray:
        """For n = 1: the function a with alpha = a omega_0."""
        if self.grid.n_complex != 1:
            raise ValueError("density is only defined for n = 1")
        return self.components

    @cached_property
    def trace_flat(self) -> np.ndarray:
        """tr_{omega_0} alpha."""
        comp = self.components
        if self.grid.n_complex == 1:
            return comp
        return comp[0] + comp[1]

    @cached_property
    def class_integral(self) -> float:
        """int alpha ^ omega_0^{n-1} = (1/n) int tr_{omega_0} alpha omega_0^n."""
        return integrate(self.grid, self.trace_flat) / self.grid.n_complex

    def shifted(self, du: np.ndarray) -> "ClosedForm":
        """alpha + i d dbar du (same class)."""
        return ClosedForm(self.grid, self.c, self.potential_u + du)


def scalar_curvature_conformal(m: ConformalMetric, background_R0=None) -> np.ndarray:
    """R = e^{-phi} (R_0 - Delta_0 phi)."""
    lap = laplacian_flat(m.grid, m.phi)
    r0 = 0.0 if background_R0 is None else background_R0
    return m.inverse_factor * (r0 - lap)


def scalar_curvature_potential(m: PotentialMetric) -> np.ndarray:
    """R = -Delta_omega log det G on the flat torus."""
    return -laplace_beltrami(m, np.log(m.density))


def laplace_beltrami(m, f: np.ndarray) -> np.ndarray:
    """Delta_omega f = g^{j kbar} d_j d_kbar f for the evolving metric."""
    if isinstance(m, ConformalMetric):
        return m.inverse_factor * laplacian_flat(m.grid, f)
    m.require_positive()
    return m.trace_inverse(complex_hessian(m.grid, f))


def gradient_squared(m, f: np.ndarray) -> np.ndarray:
    """Pointwise |grad f|^2_omega = g^{j kbar} d_j f d_kbar f."""
    grads = gradient_flat(m.grid, f)
    if isinstance(m, ConformalMetric):
        return 0.5 * sum(g * g for g in grads) * m.inverse_factor
    if m.n_complex == 1:
        return 0.5 * (grads[0] ** 2 + grads[1] ** 2) / m.components
    # v_j = d f / d z_j; the matrix of i df ^ dbar f relative to omega_0 is 2 v v*
    v1 = 0.5 * (grads[0] - 1j * grads[1])
    v2 = 0.5 * (grads[2] - 1j * grads[3])
    b = (2.0 * np.abs(v1) ** 2, 2.0 * np.abs(v2) ** 2, 2.0 * v1 * np.conj(v2))
    return m.trace_inverse(b)


def volume_density(m: PotentialMetric) -> np.ndarray:
    """omega_t^n / omega_0^n."""
    m.require_positive()
    return m.density


def trace_form(m, alpha: ClosedForm) -> np.ndarray:
    """Pointwise tr_omega alpha."""
    if isinstance(m, ConformalMetric):
        return alpha.density * m.inverse_factor
    m.require_positive()
    return m.trace_inverse(alpha.components)


def _generalized_eigen_abs_max(m: PotentialMetric, alpha: ClosedForm) -> float:
    # max |mu| with det(A - mu G) = 0
    if m.n_complex == 1:
        return float(np.max(np.abs(alpha.components / m.components)))
    a, d, c = m.components
    p, s, q = alpha.components
    det_g = m.density
    det_a = p * s - np.abs(q) ** 2
    tr = d * p + a * s - 2.0 * np.real(c * np.conj(q))
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det_g * det_a, 0.0))
    mu1 = (tr + disc) / (2.0 * det_g)
    mu2 = (tr - disc) / (2.0 * det_g)
    return float(max(np.max(np.abs(mu1)), np.max(np.abs(mu2))))


def k_equivalence(m, alpha: ClosedForm | None = None) -> float:
    """Smallest K >= 1 with K^-1 omega_0 <= omega <= K omega_0 and -K omega <= alpha <= K omega."""
    if isinstance(m, ConformalMetric):
        lo = hi = m.factor
        rel = None if alpha is None else np.abs(trace_form(m, alpha))
    else:
        m.require_positive()
        lo, hi = m.eigenvalue_range
        rel = None
    k = max(1.0, float(np.max(hi)), float(1.0 / np.min(lo)))
    if alpha is not None:
        k = max(k, float(np.max(rel)) if rel is not None else _generalized_eigen_abs_max(m, alpha))
    return k
