"""Tests for frequency construction and the trigonometric embedding."""

import numpy as np
import pytest

from tfs3d.errors import InvalidArgument
from tfs3d.models.frequency import FrequencyDistribution, FrequencyVector
from tfs3d.services.frequencies import embed, make_frequencies, make_loglinear, make_random


class TestLogLinear:
    def test_endpoints_for_default_config(self):
        u = make_loglinear(15, 20.0)
        assert len(u) == 15
        assert np.isclose(u.values[-1], 20.0)
        assert np.isclose(u.values[0], 20.0 ** (1 / 15))
        assert np.isclose(u.values[0], 1.2214, atol=1e-4)

    def test_strictly_increasing(self):
        assert np.all(np.diff(make_loglinear(10, 20.0).values) > 0)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidArgument):
            make_loglinear(0, 20.0)
        with pytest.raises(InvalidArgument):
            make_loglinear(3, 0.0)


class TestRandomFrequencies:
    def test_same_seed_same_values(self):
        a = make_random(8, FrequencyDistribution.gaussian, 0.1, seed=3)
        b = make_random(8, FrequencyDistribution.gaussian, 0.1, seed=3)
        assert np.array_equal(a.values, b.values)

    def test_different_seed_differs(self):
        a = make_random(8, FrequencyDistribution.gaussian, 0.1, seed=3)
        b = make_random(8, FrequencyDistribution.gaussian, 0.1, seed=4)
        assert not np.array_equal(a.values, b.values)

    def test_gaussian_variance(self):
        u = make_random(200_000, FrequencyDistribution.gaussian, 0.1, seed=0)
        assert np.isclose(u.values.var(), 0.1, rtol=0.02)

    def test_uniform_range(self):
        u = make_random(1000, FrequencyDistribution.uniform, 0.55, seed=0)
        assert u.values.min() >= -0.55 and u.values.max() <= 0.55

    def test_uniform_zero_range_is_all_zeros(self):
        u = make_random(5, FrequencyDistribution.uniform, 0.0, seed=0)
        assert np.all(u.values == 0.0)

    def test_laplacian_scale(self):
        u = make_random(200_000, FrequencyDistribution.laplacian, 0.22, seed=0)
        assert np.isclose(np.abs(u.values).mean(), 0.22, rtol=0.02)

    def test_nonpositive_dispersion_rejected(self):
        with pytest.raises(InvalidArgument):
            make_random(4, FrequencyDistribution.gaussian, 0.0, seed=0)
        with pytest.raises(InvalidArgument):
            make_random(4, FrequencyDistribution.laplacian, -1.0, seed=0)

    def test_dispatch_to_loglinear(self):
        u = make_frequencies(4, FrequencyDistribution.loglinear, 20.0, seed=9)
        assert np.array_equal(u.values, make_loglinear(4, 20.0).values)

    def test_values_read_only(self):
        u = make_random(4, FrequencyDistribution.gaussian, 0.1, seed=0)
        with pytest.raises(ValueError):
            u.values[0] = 1.0


class TestEmbed:
    def test_hand_computed_example(self):
        u = FrequencyVector(np.array([1.0]), FrequencyDistribution.loglinear, 1.0)
        out = embed(np.array([0.25, 0.0, 0.0]), u)
        assert np.allclose(out, [1, 0, 0, 0, 1, 1], atol=1e-12)

    def test_width_is_six_d(self):
        out = embed(np.zeros(3), make_loglinear(7, 20.0))
        assert out.shape == (42,)

    def test_zero_input_gives_zero_sines_unit_cosines(self):
        out = embed(np.zeros(3), make_loglinear(4, 20.0))
        assert np.all(out[:12] == 0.0)
        assert np.all(out[12:] == 1.0)

    def test_frequency_major_layout(self):
        u = FrequencyVector(np.array([1.0, 2.0]), FrequencyDistribution.loglinear, 2.0)
        x = np.array([0.1, 0.2, 0.3])
        expected_sin = [np.sin(2 * np.pi * f * c) for f in (1.0, 2.0) for c in x]
        assert np.allclose(embed(x, u)[:6], expected_sin)

    def test_batched_matches_single(self, rng):
        u = make_loglinear(3, 20.0)
        x = rng.uniform(size=(4, 5, 3))
        batched = embed(x, u)
        assert batched.shape == (4, 5, 18)
        assert np.allclose(batched[2, 3], embed(x[2, 3], u))
