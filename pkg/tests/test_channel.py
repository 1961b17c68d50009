import math

import numpy as np
import pytest

from eecdma.channel import (SAMPLED_GAIN_SCALE, ChannelModel, cdf_sq_gain,
                            cdf_sq_gain_closed_form_n2, inv_cdf_sq_gain,
                            sample, sampled_sorted_gain_quantiles,
                            sorted_gain_quantiles)

from conftest import uplink_cfg

MODEL = ChannelModel(seed=42)


class TestSample:
    def test_deterministic_in_seed_and_trial(self):
        cfg = uplink_cfg(K=6)
        a = sample(MODEL, cfg, trial=3)
        b = sample(MODEL, cfg, trial=3)
        assert np.array_equal(a.gains, b.gains)
        assert np.array_equal(a.distances, b.distances)
        assert np.array_equal(a.codes, b.codes)

    def test_distinct_trials_differ(self):
        cfg = uplink_cfg(K=6)
        a = sample(MODEL, cfg, trial=0)
        b = sample(MODEL, cfg, trial=1)
        assert not np.array_equal(a.gains, b.gains)

    def test_code_columns_unit_norm(self):
        cfg = uplink_cfg(K=10, N=16)
        real = sample(MODEL, cfg, trial=0)
        norms = np.linalg.norm(real.codes, axis=0)
        assert np.abs(norms - 1.0).max() < 1e-12
        assert set(np.unique(np.abs(real.codes))) == {0.25}

    def test_distances_in_range(self):
        cfg = uplink_cfg(K=200)
        real = sample(MODEL, cfg, trial=5)
        assert real.distances.min() >= MODEL.r_a
        assert real.distances.max() <= MODEL.r_b

    def test_rayleigh_mean_matches_inverse_distance(self):
        # pin the distance, estimate the amplitude mean over many draws
        model = ChannelModel(r_a=99.9999, r_b=100.0001, seed=1)
        cfg = uplink_cfg(K=100_000, N=2)
        real = sample(model, cfg, trial=0)
        assert real.gains.mean() == pytest.approx(1.0 / 100.0, rel=0.01)


class TestCdf:
    def test_zero(self):
        assert cdf_sq_gain(MODEL, 0.0) == 0.0

    def test_saturates(self):
        assert cdf_sq_gain(MODEL, 1e4) == pytest.approx(1.0, abs=1e-12)

    def test_nondecreasing(self):
        xs = np.logspace(-9, 0, 200)
        vals = cdf_sq_gain(MODEL, xs)
        assert np.all(np.diff(vals) >= 0)
        assert np.all((0 <= vals) & (vals <= 1))

    def test_matches_erfc_closed_form(self):
        # spot values where the distance mixture varies slowly enough for
        # the 200-point discretization to track the continuous law
        for x in (1e-8, 1e-7, 3e-7, 1e-2, 0.1, 1.0):
            disc = cdf_sq_gain(MODEL, x)
            exact = cdf_sq_gain_closed_form_n2(MODEL, x)
            assert disc == pytest.approx(exact, abs=1e-3)

    def test_discretization_error_bound(self):
        # right-endpoint rule on a decreasing integrand: the gap to the
        # continuous law is below (exp(-x ra^2) - exp(-x rb^2)) / (2 P)
        for x in np.logspace(-8, 0, 30):
            disc = cdf_sq_gain(MODEL, x)
            exact = cdf_sq_gain_closed_form_n2(MODEL, x)
            bound = (math.exp(-x * MODEL.r_a ** 2)
                     - math.exp(-x * MODEL.r_b ** 2)) / (2 * MODEL.partitions)
            assert abs(disc - exact) <= bound * 1.10 + 1e-9


class TestInverseCdf:
    def test_zero_quantile(self):
        assert inv_cdf_sq_gain(MODEL, 0.0) == 0.0

    def test_round_trip(self):
        for y in np.arange(0.01, 1.0, 0.01):
            x = inv_cdf_sq_gain(MODEL, y)
            assert abs(cdf_sq_gain(MODEL, x) - y) < 1e-9

    def test_monotone(self):
        ys = np.linspace(0.0, 0.99, 50)
        xs = [inv_cdf_sq_gain(MODEL, y) for y in ys]
        assert np.all(np.diff(xs) > 0)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            inv_cdf_sq_gain(MODEL, 1.0)
        with pytest.raises(ValueError):
            inv_cdf_sq_gain(MODEL, -0.1)


class TestSortedQuantiles:
    def test_single_user(self):
        assert sorted_gain_quantiles(MODEL, 1) == pytest.approx([0.0])

    def test_nonincreasing(self):
        q = sorted_gain_quantiles(MODEL, 50)
        assert np.all(np.diff(q) <= 0)

    def test_population_lemma_monte_carlo(self):
        # averaged sorted squared gains track the quantile proxies of the
        # sampled law across the middle 80 percent of ranks; the quantile
        # oracle uses a fine distance grid (the 200-point default clips the
        # nearest-distance slice and biases the strong tail by ~4 percent)
        K, trials = 2000, 40
        cfg = uplink_cfg(K=K, N=2)
        model = ChannelModel(seed=7, partitions=2000)
        q = sampled_sorted_gain_quantiles(model, K)
        acc = np.zeros(K)
        for t in range(trials):
            real = sample(model, cfg, t)
            acc += np.sort(real.gains ** 2)[::-1]
        acc /= trials
        mid = slice(K // 10, K - K // 10)
        rel = np.abs(acc[mid] - q[mid]) / q[mid]
        assert rel.max() < 0.05

    def test_sampled_scale_constant(self):
        assert SAMPLED_GAIN_SCALE == pytest.approx(4.0 / math.pi)
