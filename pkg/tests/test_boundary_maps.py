import math

import numpy as np
import pytest
from scipy.integrate import quad

from rfpt.boundaries import Linear
from rfpt.boundary_maps import (affine_gamma_density, affine_gamma_density_grid, affine_gamma_laplace,
                                affine_target_laplace, empirical_log_mgf, gamma_mixture_laplace, rdsfpt_mgf)
from rfpt.errors import DivisionError, DomainError, PreconditionError
from rfpt.inversion import GaverStehfest, LaplaceFn, TalbotContour
from rfpt.linear import solve_gamma_mixture
from rfpt.montecarlo import FixedX, SimConfig, parse_x_dist, simulate_rdsfpt, simulate_tau
from rfpt.targets import GammaMixture, gamma_density

MU = 1.0
SOURCE = gamma_density(2.0, 0.5)
F_MU = gamma_mixture_laplace(SOURCE)


def density_laplace(fn, s, t_max=200.0):
    v, _ = quad(lambda t: math.exp(-s * t) * fn(t), 0, t_max, epsrel=1e-11, limit=400, points=[0.01, 0.1, 1, 10])
    return v


class TestAffineLaplace:
    def test_same_slope_is_identity(self):
        F = affine_target_laplace(F_MU, MU, MU)
        for s in (0.1, 1.0, 7.0):
            assert F(s) == pytest.approx(F_MU(s), rel=1e-15)

    @pytest.mark.parametrize("nu", [0.5, 1.5, -0.3])
    def test_gamma_closed_form(self, nu):
        general = affine_target_laplace(F_MU, MU, nu)
        closed = affine_gamma_laplace(2.0, 0.5, MU, nu)
        A, B, C = 1 + 2.0 * nu * (nu - MU), 2.0 * math.sqrt(2) * (MU - nu), nu * nu / 2
        for s in np.linspace(0.05, 10, 15):
            assert general(s) == pytest.approx(closed(s), rel=1e-13)
            assert closed(s) == pytest.approx((A + 2.0 * s + B * math.sqrt(s + C)) ** -0.5, rel=1e-14)

    def test_complex_branch_agrees(self):
        F = affine_gamma_laplace(2.0, 0.5, MU, 1.5)
        for s in (0.3, 2.0):
            assert F.complex_eval(complex(s)).real == pytest.approx(F(s), rel=1e-14)

    @pytest.mark.parametrize("nu", [0.5, 1.5])
    def test_vanishes_at_infinity(self, nu):
        assert affine_target_laplace(F_MU, MU, nu)(1e12) < 1e-5

    def test_source_slope_positive(self):
        with pytest.raises(DomainError):
            affine_target_laplace(F_MU, 0.0, 0.5)

    def test_runtime_inner_check(self):
        # a source transform valid only for s > 5 is caught at evaluation time
        narrow = LaplaceFn(F_MU.eval, 5.0, "narrow")
        with pytest.raises(DomainError):
            affine_target_laplace(narrow, MU, 0.5)(0.1)

    @pytest.mark.parametrize("nu", [0.5, 1.5])
    def test_completely_monotone_probe(self, nu):
        F = affine_target_laplace(F_MU, MU, nu)
        h = 1e-2
        for s in (0.2, 0.5, 1.0, 2.0, 4.0):
            for n in (1, 2, 3):
                d = sum((-1) ** k * math.comb(n, k) * F(s + (n / 2 - k) * h) for k in range(n + 1)) / h ** n
                assert (-1) ** n * d > 0

    def test_newslope_chain(self):
        g = solve_gamma_mixture(MU, SOURCE)
        for nu in (0.5, 1.5):
            F_nu = affine_target_laplace(F_MU, MU, nu)
            for a in np.linspace(0.1, 4, 10):
                lhs = F_nu(a * nu + a * a / 2)
                assert lhs == pytest.approx(float(g.laplace(a)), rel=1e-6)
                assert lhs == pytest.approx(F_MU(a * MU + a * a / 2), rel=1e-6)

    def test_chain_for_mixture_source(self):
        f = GammaMixture([(0.4, 2.5, 1.0), (0.6, 4.0, 2.0)])
        g = solve_gamma_mixture(1.2, f)
        F_nu = affine_target_laplace(gamma_mixture_laplace(f), 1.2, 0.4)
        for a in (0.3, 1.0, 3.0):
            assert F_nu(a * 0.4 + a * a / 2) == pytest.approx(float(g.laplace(a)), rel=1e-12)


class TestAffineDensity:
    def test_laplace_round_trip(self):
        for s in (0.5, 1.0, 2.0, 4.0):
            v = density_laplace(lambda t: affine_gamma_density(2.0, 0.5, MU, 0.5, t) if t > 0 else 0.0, s)
            assert v == pytest.approx(affine_gamma_laplace(2.0, 0.5, MU, 0.5)(s), rel=1e-5)

    def test_mass(self):
        v, _ = quad(lambda t: affine_gamma_density(2.0, 0.5, MU, 0.5, t), 0, np.inf, epsrel=1e-10, limit=400)
        assert v == pytest.approx(1.0, abs=1e-6)

    def test_nonnegative(self):
        vals = affine_gamma_density_grid(2.0, 0.5, MU, 0.5, np.geomspace(1e-3, 60, 60))
        assert np.all(vals >= 0)

    def test_explicit_matches_inversion(self):
        t = np.array([0.05, 0.3, 1.0, 3.0, 10.0])
        explicit = affine_gamma_density_grid(2.0, 0.5, MU, 0.5, t)
        contour = affine_gamma_density_grid(2.0, 0.5, MU, 0.5, t, method=TalbotContour())
        np.testing.assert_allclose(explicit, contour, rtol=1e-8)

    def test_gaver_stehfest_route(self):
        t = np.array([0.5, 2.0])
        gs = affine_gamma_density_grid(2.0, 0.5, MU, 1.5, t, method=GaverStehfest())
        tb = affine_gamma_density_grid(2.0, 0.5, MU, 1.5, t)
        np.testing.assert_allclose(gs, tb, rtol=1e-3)

    def test_requires_faster_source(self):
        with pytest.raises(DomainError):
            affine_gamma_density(2.0, 0.5, MU, 1.5, 1.0)
        with pytest.raises(DomainError):
            affine_gamma_density(2.0, 0.5, MU, 0.5, 0.0)


class TestRdsfpt:
    def test_degenerate_start(self):
        h = lambda a: 1.3 ** a
        for a in (0.1, 0.7, 2.0):
            assert rdsfpt_mgf(h, h, a) == 1.0

    def test_division(self):
        with pytest.raises(DivisionError):
            rdsfpt_mgf(lambda a: 1.0, lambda a: 0.0, 0.5)

    def test_mass_at_zero(self):
        with pytest.raises(PreconditionError):
            rdsfpt_mgf(lambda a: 1.0, lambda a: 1.0, 0.5, mass_at_zero=True)

    def test_empirical_mgf(self):
        assert empirical_log_mgf([1.0, 4.0])(0.5) == pytest.approx(1.5)

    def test_lognormal_by_simulation(self):
        sigma = 0.25
        cfg = SimConfig(n_paths=100_000, dt=1e-3, seed=5)
        doubly = simulate_rdsfpt(Linear(1.0), 1.0, parse_x_dist(f"lognormal:0:{sigma}"), cfg, stream=3)
        unit = simulate_tau(Linear(1.0), FixedX(1.0), cfg, stream=4)
        assert doubly.n_censored == 0 and unit.n_censored == 0
        for a in (0.2, 0.5):
            ratio = rdsfpt_mgf(empirical_log_mgf(doubly.times), empirical_log_mgf(unit.times), a)
            # standard error of the ratio from the two sample variances
            p, q = doubly.times ** a, unit.times ** a
            se = ratio * math.hypot(p.std() / p.mean(), q.std() / q.mean()) / math.sqrt(cfg.n_paths)
            assert ratio == pytest.approx(math.exp((2 * a * sigma) ** 2 / 2), abs=4 * se)
