"""Stochastic source models and seeded random-stream management.

Three sources feed the stochastic 3D runs:

* surface electric-field noise, with PSD scaling S_E ~ 1/omega 1/d^2 sqrt(T)
  from a conservative baseline, injected as a uniform field increment
  E_n = sqrt(S_E/2) N(0, 1/dt) per integration step (x axis by default);
* Johnson current noise of the resonator resistance,
  I_n = sqrt(2 k_B T / R) N(0, 1/dt), in parallel with the RLC circuit;
* a random walk of the relative rf-electrode voltage R_U (expectation 1)
  multiplying both the trapping rf and the parametric drive amplitudes,
  with diffusion chosen so the standard deviation reaches ``rf_walk_sigma``
  at ``rf_walk_horizon``.

Streams are counter-based (Philox): a (seed, stream) pair fully determines
the sample sequence, distinct sources never share a stream, and trajectories
own disjoint stream blocks, so noisy runs are bit-reproducible and safe to
parallelize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CODATA, TWO_PI, ResonatorParams

# stream-id block per trajectory: surface, johnson, rf walk, initial state
STREAMS_PER_TRAJECTORY = 4
STREAM_SURFACE = 0
STREAM_JOHNSON = 1
STREAM_RF_WALK = 2
STREAM_INIT = 3


@dataclass(frozen=True)
class NoiseConfig:
    """Noise-source settings; amplitudes in SI, enable flags per source."""

    s_e_baseline: float = 1e-12          # V^2 m^-2 Hz^-1 at the reference point
    ref_omega: float = TWO_PI * 1e6
    ref_distance: float = 100e-6
    ref_temperature: float = 4.0
    electrode_distance: float = 431.8e-6
    temperature: float = 4.0
    eval_omega: float = TWO_PI * 200e6   # band where S_E is taken as white
    surface_enabled: bool = True
    johnson_enabled: bool = True
    rf_walk_enabled: bool = True
    surface_axes: tuple = (True, False, False)
    rf_walk_sigma: float = 1e-3
    rf_walk_horizon: float = 10e-3
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.s_e_baseline, self.ref_omega, self.ref_distance,
               self.ref_temperature, self.electrode_distance) < 0:
            raise ValueError("noise scales must be non-negative")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.rf_walk_sigma < 0 or self.rf_walk_horizon <= 0:
            raise ValueError("rf walk sigma must be >= 0 and horizon > 0")
        if len(self.surface_axes) != 3:
            raise ValueError("surface_axes must have three entries")

    @property
    def rf_walk_diffusion(self) -> float:
        """Wiener diffusion constant sigma^2 / horizon, in 1/s."""
        return self.rf_walk_sigma**2 / self.rf_walk_horizon


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream handle; equal (seed, stream) means equal samples."""

    seed: int
    stream: int

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=(self.seed, self.stream)))


@dataclass
class NoiseStreams:
    """Per-trajectory generators, one per source."""

    surface: np.random.Generator
    johnson: np.random.Generator
    rf_walk: np.random.Generator

    @classmethod
    def for_trajectory(cls, seed: int, trajectory_index: int) -> "NoiseStreams":
        base = trajectory_index * STREAMS_PER_TRAJECTORY
        return cls(
            surface=RngStream(seed, base + STREAM_SURFACE).generator(),
            johnson=RngStream(seed, base + STREAM_JOHNSON).generator(),
            rf_walk=RngStream(seed, base + STREAM_RF_WALK).generator(),
        )


def init_stream(seed: int, trajectory_index: int) -> np.random.Generator:
    """Generator reserved for drawing a trajectory's initial conditions."""
    base = trajectory_index * STREAMS_PER_TRAJECTORY
    return RngStream(seed, base + STREAM_INIT).generator()


def surface_noise_psd(omega: float, distance: float, temperature: float,
                      config: NoiseConfig = NoiseConfig()) -> float:
    """Surface field-noise PSD in V^2 m^-2 Hz^-1.

    Scales from the configured baseline as
    S_E = S0 (omega_ref/omega) (d_ref/d)^2 (T/T_ref)^0.5; at the default
    system parameters (200 MHz, 431.8 um, 4 K) this is of order 1e-16.
    """
    if omega <= 0 or distance <= 0 or temperature < 0:
        raise ValueError("omega and distance must be positive, temperature >= 0")
    return (config.s_e_baseline
            * (config.ref_omega / omega)
            * (config.ref_distance / distance) ** 2
            * math.sqrt(temperature / config.ref_temperature))


def surface_field_sigma(config: NoiseConfig, dt: float) -> float:
    """Standard deviation sqrt(S_E/(2 dt)) of the per-step field increment."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    s_e = surface_noise_psd(config.eval_omega, config.electrode_distance,
                            config.temperature, config)
    return math.sqrt(s_e / (2.0 * dt))


def surface_field_increment(config: NoiseConfig, dt: float,
                            stream: np.random.Generator, size=None):
    """Uniform-field noise draw(s) in V/m for one integration step."""
    return surface_field_sigma(config, dt) * stream.standard_normal(size)


def johnson_current_sigma(resonator: ResonatorParams, dt: float) -> float:
    """Standard deviation sqrt(2 k_B T / (R dt)) of the noise current."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return math.sqrt(2.0 * CODATA.boltzmann * resonator.temperature
                     / (resonator.resistance * dt))


def johnson_current_increment(resonator: ResonatorParams, dt: float,
                              stream: np.random.Generator, size=None):
    """Johnson noise current draw(s) in A for one integration step."""
    return johnson_current_sigma(resonator, dt) * stream.standard_normal(size)


def rf_walk_sigma_step(config: NoiseConfig, dt: float) -> float:
    """Standard deviation of one random-walk increment of R_U."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return math.sqrt(config.rf_walk_diffusion * dt)


def rf_walk_step(r_u: float, dt: float, config: NoiseConfig,
                 stream: np.random.Generator) -> float:
    """Advance the relative rf-voltage R_U by one Wiener increment."""
    return r_u + rf_walk_sigma_step(config, dt) * float(stream.standard_normal())
