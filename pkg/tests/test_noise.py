"""Stochastic sources: scaling laws, increment statistics, stream discipline."""

import math

import numpy as np
import pytest

from paratrap.core import TWO_PI, ResonatorParams
from paratrap.noise import (
    NoiseConfig,
    NoiseStreams,
    RngStream,
    init_stream,
    johnson_current_increment,
    johnson_current_sigma,
    rf_walk_sigma_step,
    rf_walk_step,
    surface_field_increment,
    surface_field_sigma,
    surface_noise_psd,
)

CONFIG = NoiseConfig()
RES = ResonatorParams()


class TestSurfaceNoisePsd:
    def test_reference_point_returns_baseline(self):
        val = surface_noise_psd(TWO_PI * 1e6, 100e-6, 4.0, CONFIG)
        assert val == pytest.approx(1e-12, rel=1e-12)

    def test_system_parameters_give_order_1e16(self):
        val = surface_noise_psd(TWO_PI * 200e6, 431.8e-6, 4.0, CONFIG)
        formula = 1e-12 * (1e6 / 200e6) * (100.0 / 431.8) ** 2
        assert val == pytest.approx(formula, rel=1e-9)
        assert val == pytest.approx(2.7e-16, rel=0.02)

    def test_doubling_distance_quarters_psd(self):
        a = surface_noise_psd(TWO_PI * 10e6, 100e-6, 4.0, CONFIG)
        b = surface_noise_psd(TWO_PI * 10e6, 200e-6, 4.0, CONFIG)
        assert b == pytest.approx(a / 4.0, rel=1e-12)

    def test_temperature_square_root_scaling(self):
        a = surface_noise_psd(TWO_PI * 10e6, 100e-6, 4.0, CONFIG)
        b = surface_noise_psd(TWO_PI * 10e6, 100e-6, 16.0, CONFIG)
        assert b == pytest.approx(2.0 * a, rel=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            surface_noise_psd(0.0, 100e-6, 4.0, CONFIG)
        with pytest.raises(ValueError):
            surface_noise_psd(TWO_PI * 1e6, -1.0, 4.0, CONFIG)


class TestIncrements:
    def test_surface_increment_variance(self):
        dt = 1e-10
        gen = RngStream(77, 0).generator()
        draws = surface_field_increment(CONFIG, dt, gen, size=1_000_000)
        s_e = surface_noise_psd(CONFIG.eval_omega, CONFIG.electrode_distance,
                                CONFIG.temperature, CONFIG)
        assert np.var(draws) == pytest.approx(s_e / (2 * dt), rel=0.01)

    def test_zero_baseline_means_zero_increment(self):
        quiet = NoiseConfig(s_e_baseline=0.0)
        gen = RngStream(77, 0).generator()
        assert surface_field_sigma(quiet, 1e-10) == 0.0
        assert surface_field_increment(quiet, 1e-10, gen) == 0.0

    def test_johnson_increment_variance(self):
        dt = 1e-10
        gen = RngStream(78, 1).generator()
        draws = johnson_current_increment(RES, dt, gen, size=1_000_000)
        expected = 2 * 1.380649e-23 * 4.0 / (RES.resistance * dt)
        assert np.var(draws) == pytest.approx(expected, rel=0.01)

    def test_zero_temperature_johnson_is_silent(self):
        cold = ResonatorParams(temperature=0.0)
        assert johnson_current_sigma(cold, 1e-10) == 0.0

    def test_fixed_seed_and_stream_reproduce_bitwise(self):
        a = surface_field_increment(CONFIG, 1e-10, RngStream(5, 9).generator(),
                                    size=1000)
        b = surface_field_increment(CONFIG, 1e-10, RngStream(5, 9).generator(),
                                    size=1000)
        assert np.array_equal(a, b)

    def test_source_streams_are_uncorrelated(self):
        streams = NoiseStreams.for_trajectory(123, 0)
        n = 200_000
        a = streams.surface.standard_normal(n)
        b = streams.johnson.standard_normal(n)
        c = streams.rf_walk.standard_normal(n)
        for pair in ((a, b), (a, c), (b, c)):
            rho = np.corrcoef(pair[0], pair[1])[0, 1]
            assert abs(rho) < 4.0 / math.sqrt(n)

    def test_trajectory_stream_blocks_are_disjoint(self):
        s0 = NoiseStreams.for_trajectory(123, 0)
        s1 = NoiseStreams.for_trajectory(123, 1)
        a = s0.surface.standard_normal(1000)
        b = s1.surface.standard_normal(1000)
        assert not np.array_equal(a, b)
        # init stream differs from the noise streams of the same trajectory
        ia = init_stream(123, 0).standard_normal(1000)
        assert not np.array_equal(ia,
                                  NoiseStreams.for_trajectory(123, 0).surface.standard_normal(1000))


class TestRfWalk:
    def test_std_reaches_sigma_at_horizon(self):
        # 10^4 walks of 1000 steps to 10 ms
        n_walks, n_steps = 10_000, 1000
        dt = CONFIG.rf_walk_horizon / n_steps
        gen = RngStream(21, 2).generator()
        increments = rf_walk_sigma_step(CONFIG, dt) * gen.standard_normal(
            (n_walks, n_steps))
        r_u = 1.0 + increments.sum(axis=1)
        assert np.std(r_u) == pytest.approx(CONFIG.rf_walk_sigma, rel=0.05)
        assert np.mean(r_u) == pytest.approx(1.0, abs=4 * CONFIG.rf_walk_sigma
                                             / math.sqrt(n_walks))

    def test_square_root_of_time_scaling(self):
        n_walks, n_steps = 10_000, 250
        dt = 2.5e-3 / n_steps
        gen = RngStream(22, 2).generator()
        increments = rf_walk_sigma_step(CONFIG, dt) * gen.standard_normal(
            (n_walks, n_steps))
        r_u = 1.0 + increments.sum(axis=1)
        assert np.std(r_u) == pytest.approx(5e-4, rel=0.05)

    def test_scalar_step(self):
        gen = RngStream(23, 2).generator()
        r_u = rf_walk_step(1.0, 1e-5, CONFIG, gen)
        assert r_u != 1.0
        assert abs(r_u - 1.0) < 20 * rf_walk_sigma_step(CONFIG, 1e-5)

    def test_diffusion_constant(self):
        assert CONFIG.rf_walk_diffusion == pytest.approx(1e-4, rel=1e-12)


class TestInjectedNoiseSpectrum:
    def test_held_increments_are_white_over_the_analysis_band(self):
        # piecewise-constant N(0, 1/dt) noise must be flat to ~sinc^2 over
        # the narrow band the resonator sees
        from paratrap.spectral import psd

        dt = 1.0 / 16.384e9
        gen = RngStream(88, 0).generator()
        fs = 16.384e9
        n = 1 << 15
        records = []
        for _ in range(160):
            records.append(psd(gen.standard_normal(n) / math.sqrt(dt), fs).psd)
        mean_psd = np.mean(records, axis=0)
        freqs = np.fft.rfftfreq(n, 1.0 / fs)
        band = (freqs > 180e6) & (freqs < 220e6)
        low = (freqs > 180e6) & (freqs < 200e6)
        high = (freqs >= 200e6) & (freqs < 220e6)
        assert mean_psd[low].mean() == pytest.approx(mean_psd[high].mean(),
                                                     rel=0.03)
        # absolute level: one-sided PSD of N(0, 1/dt) held over dt is 2
        assert mean_psd[band].mean() == pytest.approx(2.0, rel=0.03)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            NoiseConfig(rf_walk_horizon=0.0)
        with pytest.raises(ValueError):
            NoiseConfig(surface_axes=(True, False))
        with pytest.raises(ValueError):
            NoiseConfig(temperature=-2.0)
