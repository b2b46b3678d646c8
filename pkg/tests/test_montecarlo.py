import math

import numpy as np
import pytest
from scipy import stats

from rfpt.boundaries import General, Linear, Sqrt, Zero
from rfpt.errors import ConfigError, PreconditionError
from rfpt.linear import inverse_gaussian_cdf
from rfpt.montecarlo import (DistributionSampler, EmpiricalDistribution, FixedX, SimConfig, check_scaling_identity,
                             default_workers, ks_distance, parse_x_dist, philox_block, simulate_tau)

# Known-answer vectors published with the Random123 library for Philox4x32-10
KATS = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


def ks_budget(n):
    return 3 * 1.36 / math.sqrt(n)


def exact_empirical(samples, horizon=math.inf):
    samples = np.sort(np.asarray(samples))
    kept = samples[samples <= horizon]
    return EmpiricalDistribution(kept, samples.size, samples.size - kept.size, 0, horizon)


class TestPhilox:
    @pytest.mark.parametrize("counter,key,expect", KATS)
    def test_known_answers(self, counter, key, expect):
        assert philox_block(counter, key) == expect


class TestConfig:
    def test_horizon(self):
        with pytest.raises(ConfigError):
            SimConfig(dt=1.0, t_horizon=1.0)

    def test_paths(self):
        with pytest.raises(ConfigError):
            SimConfig(n_paths=50)

    def test_dt(self):
        with pytest.raises(ConfigError):
            SimConfig(dt=0.0)

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("RFPT_THREADS", "three")
        with pytest.raises(ConfigError):
            default_workers()
        monkeypatch.setenv("RFPT_THREADS", "2")
        assert default_workers() == 2

    @pytest.mark.parametrize("text", ["exp", "gamma:1", "lognormal:0:-1", "uniform:2:1", "weird:1"])
    def test_bad_x_dist(self, text):
        with pytest.raises(ConfigError):
            parse_x_dist(text)

    def test_atom_detection(self):
        assert DistributionSampler(stats.poisson(1.0)).has_atom_at_zero
        assert not parse_x_dist("exp:1").has_atom_at_zero
        assert FixedX(0.0).has_atom_at_zero


class TestKsDistance:
    def test_exact_samples(self):
        n = 20_000
        u = (np.arange(n) + 0.5) / n
        emp = exact_empirical(stats.expon.ppf(np.random.default_rng(0).permutation(u)))
        assert emp.ks_vs(stats.expon.cdf) <= 1.0 / n + 1e-12
        rand = exact_empirical(np.random.default_rng(1).exponential(size=n))
        assert ks_distance(rand, stats.expon.cdf) < 3 / math.sqrt(n)

    def test_wrong_cdf(self):
        emp = exact_empirical(np.random.default_rng(2).exponential(size=10_000))
        assert ks_distance(emp, lambda t: stats.expon.cdf(np.asarray(t) - 0.5)) > 0.1

    def test_empty(self):
        emp = EmpiricalDistribution(np.array([]), 1000, 1000, 0, 3.0)
        assert ks_distance(emp, stats.expon.cdf) == pytest.approx(stats.expon.cdf(3.0))

    def test_censoring_counts(self):
        emp = exact_empirical(np.random.default_rng(3).exponential(size=10_000), horizon=1.0)
        assert emp.ecdf(1.0) == emp.n_absorbed / emp.n_paths
        assert ks_distance(emp, stats.expon.cdf) < 3 / math.sqrt(10_000)
        grid = np.linspace(0, 1, 50)
        assert np.all(np.diff(emp.ecdf(grid)) >= 0)


class TestSimulation:
    def test_fixed_start_inverse_gaussian(self):
        n = 100_000
        emp = simulate_tau(Linear(1.0), FixedX(1.0), SimConfig(n_paths=n, dt=1e-3, seed=1))
        assert emp.ks_vs(lambda t: inverse_gaussian_cdf(t, 1.0, 1.0)) < ks_budget(n)

    def test_exponential_start_gamma_law(self):
        n = 20_000
        emp = simulate_tau(Linear(1.0), parse_x_dist("exp:1"), SimConfig(n_paths=n, dt=1e-3, seed=2))
        assert emp.ks_vs(stats.gamma(0.5, scale=2.0).cdf) < ks_budget(n)

    def test_instant_absorption(self):
        emp = simulate_tau(Linear(1.0), FixedX(0.0), SimConfig(n_paths=500))
        assert emp.n_instant == 500 and np.all(emp.times == 0.0)
        assert emp.first_step_fraction == 1.0

    def test_ecdf_end_value(self):
        emp = simulate_tau(Zero(), parse_x_dist("exp:1"), SimConfig(n_paths=2000, dt=0.01, t_horizon=5.0))
        assert emp.n_censored > 0
        assert emp.ecdf(5.0) == emp.n_absorbed / emp.n_paths

    def test_bit_identical_repeat(self):
        cfg = SimConfig(n_paths=3000, dt=1e-2, seed=9)
        a = simulate_tau(Linear(0.5), parse_x_dist("exp:2"), cfg)
        b = simulate_tau(Linear(0.5), parse_x_dist("exp:2"), cfg)
        np.testing.assert_array_equal(a.times, b.times)

    def test_worker_count_does_not_change_results(self):
        a = simulate_tau(Linear(0.5), parse_x_dist("exp:2"), SimConfig(n_paths=3000, dt=1e-2, seed=9, n_workers=1))
        b = simulate_tau(Linear(0.5), parse_x_dist("exp:2"), SimConfig(n_paths=3000, dt=1e-2, seed=9, n_workers=4))
        np.testing.assert_array_equal(a.times, b.times)

    def test_paths_keyed_by_index(self):
        # adding paths leaves the first ones untouched, so every split of the work agrees
        small = simulate_tau(Linear(1.0), parse_x_dist("exp:1"), SimConfig(n_paths=1000, dt=1e-2, seed=4))
        large = simulate_tau(Linear(1.0), parse_x_dist("exp:1"), SimConfig(n_paths=2000, dt=1e-2, seed=4))
        assert np.isin(small.times, large.times).all()

    def test_bridge_bias_ordering(self):
        n = 100_000
        on = simulate_tau(Linear(1.0), FixedX(1.0), SimConfig(n_paths=n, dt=1e-2, seed=3))
        off = simulate_tau(Linear(1.0), FixedX(1.0), SimConfig(n_paths=n, dt=1e-2, seed=3, bridge_correction=False))
        assert off.mean() >= on.mean()
        assert on.mean() == pytest.approx(1.0, abs=0.02)

    def test_dt_refinement_without_bridge(self):
        n = 20_000
        ks = [simulate_tau(Linear(1.0), parse_x_dist("exp:1"),
                           SimConfig(n_paths=n, dt=dt, seed=6, bridge_correction=False)).ks_vs(
                               stats.gamma(0.5, scale=2.0).cdf) for dt in (0.04, 0.02, 0.01)]
        assert ks[0] > ks[1] > ks[2]

    def test_grid_path_matches_closed_form_path(self):
        cfg = SimConfig(n_paths=20_000, dt=1e-3, seed=8, t_horizon=20.0)
        a = simulate_tau(Sqrt(0.5), FixedX(1.0), cfg, stream=0)
        b = simulate_tau(General(lambda t: 0.5 * math.sqrt(t), "sqrt"), FixedX(1.0), cfg, stream=1)
        assert stats.ks_2samp(a.times, b.times).pvalue > 0.001


class TestScalingIdentity:
    def test_constant_start(self):
        rep = check_scaling_identity(Linear(1.0), 1.0, FixedX(1.7), SimConfig(n_paths=5000, dt=1e-3, seed=2))
        assert rep.passed

    def test_atom_at_zero(self):
        with pytest.raises(PreconditionError):
            check_scaling_identity(Linear(1.0), 1.0, FixedX(0.0), SimConfig(n_paths=100))

    def test_needs_closed_form(self):
        with pytest.raises(ConfigError):
            check_scaling_identity(General(lambda t: t), 1.0, FixedX(1.0), SimConfig(n_paths=100))
