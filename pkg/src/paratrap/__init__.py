"""Parametric-drive single-electron detection simulations in a Paul trap.

Submodules: :mod:`~paratrap.core` (constants, parameters), :mod:`~paratrap.fieldmodel`
(analytic trap fields), :mod:`~paratrap.slowflow` (averaged envelope dynamics),
:mod:`~paratrap.dynamics` (1D/3D integration), :mod:`~paratrap.noise`
(stochastic sources), :mod:`~paratrap.spectral` (PSD/SNR/burst statistics),
:mod:`~paratrap.trajio` (persistence), :mod:`~paratrap.config` and
:mod:`~paratrap.cli` (configuration and orchestration).
"""

__version__ = "0.1.0"

from .core import (
    CODATA,
    DriveSchedule,
    PhysicalConstants,
    ResonatorParams,
    TrapParams,
    damping_rate,
    drive_voltage_ratio,
    drive_voltage_ratio_db,
    thermal_sample,
)
from .dynamics import (
    InitCondition,
    IntegratorSettings,
    Oscillator1D,
    Trajectory,
    integrate_1d,
    integrate_3d,
)
from .fieldmodel import AnharmonicSpec, CouplingModel, FieldModel, calibrate
from .noise import NoiseConfig, NoiseStreams, RngStream
from .slowflow import SlowFlowParams, SlowState, classify_basin, fixed_points
from .spectral import SpectrumResult, psd, snr

__all__ = [
    "CODATA",
    "PhysicalConstants",
    "TrapParams",
    "ResonatorParams",
    "DriveSchedule",
    "damping_rate",
    "drive_voltage_ratio",
    "drive_voltage_ratio_db",
    "thermal_sample",
    "AnharmonicSpec",
    "CouplingModel",
    "FieldModel",
    "calibrate",
    "SlowState",
    "SlowFlowParams",
    "fixed_points",
    "classify_basin",
    "InitCondition",
    "IntegratorSettings",
    "Oscillator1D",
    "Trajectory",
    "integrate_1d",
    "integrate_3d",
    "NoiseConfig",
    "NoiseStreams",
    "RngStream",
    "SpectrumResult",
    "psd",
    "snr",
    "__version__",
]
