import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from lyzflow import functionals as fn
from lyzflow import oracles
from lyzflow.errors import KappaNotOne, NonPositiveTau
from lyzflow.geometry import ClosedForm, PotentialMetric
from lyzflow.potential import FlowProblem, PotentialState, rhs_F, rhs_varphi
from lyzflow.spectral import Grid, band_limited_noise, integrate, poisson_solve_flat
from lyzflow.surface import SurfaceState, rhs_phi, rhs_tau

seeds = st.integers(0, 2 ** 32 - 1)


def flat(grid, tau=1.0, phi=0.0, lam=-1.0, kappa=2.0):
    return SurfaceState(grid, grid.constant(phi), grid.constant(tau), lam=lam, kappa=kappa)


def smooth_state(seed, kappa=2.0, N=64):
    g = Grid(1, N)
    rng = np.random.default_rng(seed)
    phi = band_limited_noise(g, rng, 3, 0.3)
    tau = 1.0 + band_limited_noise(g, rng, 3, 0.3)
    return SurfaceState(g, phi, tau, kappa=kappa)


def potential(grid, rng, amplitude=0.3, modes=3):
    return poisson_solve_flat(grid, band_limited_noise(grid, rng, modes, amplitude))


def problem(grid, u, lam=-1.0, kappa=2.0):
    return FlowProblem.create(grid, lam, kappa, ClosedForm(grid, -lam, u))


class TestEnergy:
    def test_stationary_is_zero(self, grid32):
        assert fn.liouville_entropy_E(flat(grid32), grid32.zeros()) == pytest.approx(0.0, abs=1e-15)

    def test_constant_tau_two(self, grid32):
        assert fn.liouville_entropy_E(flat(grid32, tau=2.0)) == pytest.approx(-1 + 2 * np.log(2), abs=1e-14)
        assert -1 + 2 * np.log(2) == pytest.approx(0.386294, abs=1e-6)

    @pytest.mark.parametrize("eps", [0.05, 0.3])
    def test_cosine_quadrature_oracle(self, grid32, eps):
        x, _ = grid32.coords
        phi = eps * np.cos(2 * np.pi * x)
        r0 = np.cos(2 * np.pi * x)
        s = SurfaceState(grid32, phi, grid32.constant(1.0), lam=-2.0)
        dirichlet = quad(lambda t: 0.5 * 0.5 * (2 * np.pi * eps * np.sin(2 * np.pi * t)) ** 2, 0, 1)[0]
        coupling = quad(lambda t: np.cos(2 * np.pi * t) * eps * np.cos(2 * np.pi * t), 0, 1)[0]
        volume = quad(lambda t: np.exp(eps * np.cos(2 * np.pi * t)), 0, 1)[0]
        oracle = dirichlet + coupling + (2.0 - 1.0) * volume
        assert fn.liouville_entropy_E(s, r0) == pytest.approx(oracle, rel=1e-12)

    def test_non_positive_tau(self, grid32):
        with pytest.raises(NonPositiveTau):
            fn.liouville_entropy_E(flat(grid32, tau=0.0))

    def test_stationary_derivative(self, grid32):
        assert fn.dE_dt_theory(flat(grid32)) == 0.0

    @given(seeds, st.floats(0.3, 4.0))
    def test_derivative_nonpositive(self, seed, kappa):
        assert fn.dE_dt_theory(smooth_state(seed, kappa, N=32)) <= 0.0

    @given(seeds, st.floats(0.3, 4.0))
    def test_derivative_along_flow_vector(self, seed, kappa):
        s = smooth_state(seed, kappa)
        dphi, dtau = rhs_phi(s), rhs_tau(s)
        h = 1e-6

        def energy(step):
            return fn.liouville_entropy_E(s.with_fields(s.phi + step * dphi, s.tau + step * dtau, 0.0))

        fd = (energy(h) - energy(-h)) / (2 * h)
        assert fd == pytest.approx(fn.dE_dt_theory(s), rel=1e-6, abs=1e-9)


class TestQ:
    def test_stationary(self, grid32):
        assert abs(fn.q_functional(flat(grid32))) < 1e-12

    def test_constant_tau_two(self, grid32):
        assert fn.q_functional(flat(grid32, tau=2.0)) == pytest.approx(1.0)

    @given(seeds)
    def test_nonnegative(self, seed):
        assert fn.q_functional(smooth_state(seed, N=32)) >= 0


class TestEnhanced:
    def test_flat_curvature_equals_E(self, grid32):
        s = flat(grid32, tau=1.5, kappa=1.0)
        assert fn.enhanced_E_hat(s) == pytest.approx(fn.liouville_entropy_E(s), abs=1e-15)

    def test_stationary_derivative(self, grid32):
        assert fn.dE_hat_dt_theory(flat(grid32, kappa=1.0)) == pytest.approx(0.0, abs=1e-15)

    def test_requires_kappa_one(self, grid32):
        with pytest.raises(KappaNotOne):
            fn.dE_hat_dt_theory(flat(grid32, kappa=2.0))

    @given(seeds)
    def test_derivative_along_flow_vector(self, seed):
        s = smooth_state(seed, kappa=1.0)
        dphi, dtau = rhs_phi(s), rhs_tau(s)
        h = 1e-6

        def energy(step):
            return fn.enhanced_E_hat(s.with_fields(s.phi + step * dphi, s.tau + step * dtau, 0.0))

        fd = (energy(h) - energy(-h)) / (2 * h)
        assert fd == pytest.approx(fn.dE_hat_dt_theory(s), rel=1e-6, abs=1e-9)


class TestLowerBound:
    def test_flat(self, grid32):
        lb = fn.lower_bound_terms(flat(grid32))
        assert lb.gradient_quarter == 0 and lb.phi_bar == 0

    def test_constant(self, grid32):
        lb = fn.lower_bound_terms(flat(grid32, phi=0.4))
        assert lb.gradient_quarter == 0 and lb.phi_bar == pytest.approx(0.4)

    @given(seeds)
    def test_jensen(self, seed):
        g = Grid(1, 32)
        phi = band_limited_noise(g, np.random.default_rng(seed), 6, 1.0)
        phi = phi - np.log(integrate(g, np.exp(phi)))
        assert fn.lower_bound_terms(flat(g)).phi_bar == 0
        assert fn.lower_bound_terms(SurfaceState(g, phi, g.constant(1.0))).phi_bar <= 0


class TestIJ:
    def test_constant_potential(self, grid32):
        m = PotentialMetric(grid32, grid32.constant(2.5))
        assert fn.i_functional(m) == pytest.approx(0.0, abs=1e-15)
        assert fn.j_functional(m) == pytest.approx(0.0, abs=1e-15)

    @given(seeds)
    def test_n1_equality(self, seed):
        g = Grid(1, 32)
        m = PotentialMetric(g, potential(g, np.random.default_rng(seed)))
        i_val, j_val = fn.i_functional(m), fn.j_functional(m)
        assert abs((i_val - j_val) - i_val / 2) < 1e-10
        assert fn.i_functional_sum(m) == pytest.approx(i_val, rel=1e-10)

    @given(seeds)
    def test_n2_inequality_and_sum(self, seed):
        g = Grid(2, 8)
        m = PotentialMetric(g, potential(g, np.random.default_rng(seed), 0.5, 2))
        i_val, j_val = fn.i_functional(m), fn.j_functional(m)
        assert i_val - j_val - i_val / 3 >= -1e-10
        assert fn.i_functional_sum(m) == pytest.approx(i_val, rel=1e-10, abs=1e-14)

    @pytest.mark.parametrize("n", [1, 2])
    def test_j_matches_path_quadrature(self, n, rng):
        g = Grid(n, 32 if n == 1 else 8)
        m = PotentialMetric(g, potential(g, rng, 0.4, 2))
        assert fn.j_functional(m) == pytest.approx(oracles.j_path(m), rel=1e-10)


class TestMu:
    def test_zero(self, grid32, rng):
        p = problem(grid32, potential(grid32, rng))
        assert fn.mabuchi_mu(PotentialMetric(grid32, grid32.zeros()), p) == pytest.approx(0.0, abs=1e-15)

    def test_term_dropout(self, grid32, rng):
        p = problem(grid32, grid32.zeros())
        m = PotentialMetric(grid32, potential(grid32, rng, 0.05))
        expected = fn.entropy(m) - p.lam * (fn.i_functional(m) - fn.j_functional(m))
        assert fn.mabuchi_mu(m, p) == pytest.approx(expected, rel=1e-12)

    # n = 2 needs N = 16: at N = 8 the cubic Hessian products alias (error ~5e-6)
    @settings(max_examples=8)
    @given(seeds, st.sampled_from([1, 2]))
    def test_path_independence(self, seed, n):
        g = Grid(n, 32 if n == 1 else 16)
        rng = np.random.default_rng(seed)
        m = PotentialMetric(g, potential(g, rng, 0.4, 2))
        p = problem(g, potential(g, rng, 0.3, 2))
        assert abs(fn.mabuchi_mu(m, p) - oracles.mu_path(m, p)) < 1e-6


class TestM:
    def test_zero(self, grid32):
        s = PotentialState(grid32, grid32.zeros(), grid32.zeros())
        assert fn.m_functional(s, problem(grid32, grid32.zeros())) == 0.0

    def test_constant_F(self, grid32):
        s = PotentialState(grid32, grid32.zeros(), grid32.constant(0.7))
        assert fn.m_functional(s, problem(grid32, grid32.zeros())) == pytest.approx(-0.7)

    def test_stationary_derivative(self, grid32):
        s = PotentialState(grid32, grid32.zeros(), grid32.zeros())
        assert fn.dM_dt_theory(s, problem(grid32, grid32.zeros())) == 0.0

    @settings(max_examples=8)
    @given(seeds, st.sampled_from([1, 2]))
    def test_derivative_along_flow_vector(self, seed, n):
        g = Grid(n, 64 if n == 1 else 16)
        rng = np.random.default_rng(seed)
        p = problem(g, potential(g, rng, 0.3, 2), kappa=1.7)
        s = PotentialState(g, potential(g, rng, 0.3, 2), potential(g, rng, 0.3, 2), kappa=1.7)
        dv, dF = rhs_varphi(s, p), rhs_F(s, p)
        h = 1e-6

        def value(step):
            return fn.m_functional(s.with_fields(s.varphi + step * dv, s.F + step * dF, 0.0), p)

        fd = (value(h) - value(-h)) / (2 * h)
        theory = fn.dM_dt_theory(s, p)
        assert theory <= 0
        assert fd == pytest.approx(theory, rel=1e-5, abs=1e-9)


class TestSamples:
    def test_names(self):
        names = fn.FunctionalSample.names()
        assert names[0] == "t" and "E_hat" in names and "dM_dt_theory" in names

    def test_enhanced_gating(self, grid32):
        s2 = fn.surface_sample(flat(grid32, tau=1.2))
        s1 = fn.surface_sample(flat(grid32, tau=1.2, kappa=1.0))
        assert np.isnan(s2.E_hat) and np.isnan(s2.dE_hat_dt_theory)
        assert np.isfinite(s1.E_hat) and np.isfinite(s1.dE_hat_dt_theory)
        assert np.isnan(s1.M)

    def test_potential_sample(self, grid32, rng):
        p = problem(grid32, potential(grid32, rng))
        s = PotentialState(grid32, potential(grid32, rng), potential(grid32, rng))
        d = fn.potential_sample(s, p).as_dict()
        assert all(np.isfinite(d[k]) for k in ("I", "J", "mu", "M", "dM_dt_theory"))
        assert np.isnan(d["E"])
