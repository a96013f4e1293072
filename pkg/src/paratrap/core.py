"""Physical constants, parameter containers, and calibration formulas.

Everything downstream (field model, integrators, noise, spectra) works in
strict SI units: metres, seconds, kilograms, volts, amperes, and angular
frequencies in rad/s.  Convenience units (MHz, um, kOhm, ...) are accepted
only at configuration ingestion, see :mod:`paratrap.config`.

The electron charge is stored as a magnitude; force terms in the dynamics
module apply the sign explicitly (q_e = -e), so a sign error there would
invert the drive phase rather than silently cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Default operating point: secular frequencies 2pi x (200, 173, 70) MHz,
# trap drive at 2pi x 1.452 GHz, pickup distance 4.8 mm.
OMEGA_X_DEFAULT = TWO_PI * 200e6
OMEGA_Y_DEFAULT = TWO_PI * 173e6
OMEGA_Z_DEFAULT = TWO_PI * 70e6
OMEGA_RF_DEFAULT = TWO_PI * 1.452e9
D_EFF_DEFAULT = 4.8e-3

# Quartic / sextic frequency-shift coefficients of the x potential, as quoted
# in kHz/um^2 and kHz/um^4.  Two readings of "kHz" are supported ("hz": the
# number is a cyclic frequency and gets a 2*pi; "rad": already angular).
LAMBDA4_KHZ_UM2 = -4.08
LAMBDA6_KHZ_UM4 = 6.78e-6
UNIT_CONVENTIONS = ("hz", "rad")


def lambda4_si(value_khz_um2: float, convention: str = "hz") -> float:
    """Convert a quartic shift coefficient quoted in kHz/um^2 to rad/(s m^2)."""
    return value_khz_um2 * _angular_khz(convention) * 1e12


def lambda6_si(value_khz_um4: float, convention: str = "hz") -> float:
    """Convert a sextic shift coefficient quoted in kHz/um^4 to rad/(s m^4)."""
    return value_khz_um4 * _angular_khz(convention) * 1e24


def _angular_khz(convention: str) -> float:
    if convention not in UNIT_CONVENTIONS:
        raise ValueError(
            f"unknown unit convention {convention!r}, expected one of {UNIT_CONVENTIONS}"
        )
    return TWO_PI * 1e3 if convention == "hz" else 1e3


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants used throughout: electron mass, |e|, and k_B."""

    electron_mass: float = 9.1093837015e-31
    elementary_charge: float = 1.602176634e-19
    boltzmann: float = 1.380649e-23

    def __post_init__(self):
        for name in ("electron_mass", "elementary_charge", "boltzmann"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def electron_charge_signed(self) -> float:
        """Signed electron charge, -e."""
        return -self.elementary_charge


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class TrapParams:
    """Secular frequencies, rf drive, anharmonic coefficients and geometry.

    ``c4`` and ``c6`` are coefficients of the potential-per-mass polynomial
    ``sum_i C_i x^i`` along the detection axis; the derived frequency-shift
    coefficients are ``lambda4 = 3 C4 / (2 omega_x)`` and
    ``lambda6 = 15 C6 / (8 omega_x)``.
    """

    omega_x: float = OMEGA_X_DEFAULT
    omega_y: float = OMEGA_Y_DEFAULT
    omega_z: float = OMEGA_Z_DEFAULT
    omega_rf: float = OMEGA_RF_DEFAULT
    phi_rf: float = 0.0
    c4: float = 2.0 * OMEGA_X_DEFAULT * lambda4_si(LAMBDA4_KHZ_UM2) / 3.0
    c6: float = 8.0 * OMEGA_X_DEFAULT * lambda6_si(LAMBDA6_KHZ_UM4) / 15.0
    d_eff: float = D_EFF_DEFAULT

    def __post_init__(self):
        if min(self.omega_x, self.omega_y, self.omega_z) <= 0:
            raise ValueError("secular frequencies must be positive")
        if self.omega_rf <= 2.0 * max(self.omega_x, self.omega_y):
            raise ValueError("omega_rf must exceed twice the largest radial secular frequency")
        if self.d_eff <= 0:
            raise ValueError("d_eff must be positive")

    @property
    def lambda4(self) -> float:
        return 1.5 * self.c4 / self.omega_x

    @property
    def lambda6(self) -> float:
        return 15.0 * self.c6 / (8.0 * self.omega_x)

    @classmethod
    def from_lambdas(cls, lambda4: float, lambda6: float, **kwargs) -> "TrapParams":
        """Build with c4/c6 chosen so the given shift coefficients result."""
        omega_x = kwargs.get("omega_x", OMEGA_X_DEFAULT)
        return cls(
            c4=2.0 * omega_x * lambda4 / 3.0,
            c6=8.0 * omega_x * lambda6 / 15.0,
            **kwargs,
        )


@dataclass(frozen=True)
class ResonatorParams:
    """Lumped parallel RLC pickup resonator.

    Derived quantities: R = Q Z0, L = Z0/omega_res, C = 1/(Z0 omega_res),
    which reproduce omega_res = 1/sqrt(LC) and Z0 = sqrt(L/C) identically.
    """

    q_factor: float = 1000.0
    z0: float = 300.0
    omega_res: float = TWO_PI * 200e6
    temperature: float = 4.0

    def __post_init__(self):
        if self.q_factor <= 0 or self.z0 <= 0 or self.omega_res <= 0:
            raise ValueError("Q, Z0 and omega_res must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    @property
    def resistance(self) -> float:
        return self.q_factor * self.z0

    @property
    def inductance(self) -> float:
        return self.z0 / self.omega_res

    @property
    def capacitance(self) -> float:
        return 1.0 / (self.z0 * self.omega_res)

    @classmethod
    def from_rlc(cls, resistance: float, inductance: float, capacitance: float,
                 temperature: float = 4.0) -> "ResonatorParams":
        z0 = math.sqrt(inductance / capacitance)
        return cls(
            q_factor=resistance / z0,
            z0=z0,
            omega_res=1.0 / math.sqrt(inductance * capacitance),
            temperature=temperature,
        )

    def johnson_floor(self) -> float:
        """One-sided voltage PSD floor 4 k_B T R at resonance, in V^2/Hz."""
        return 4.0 * CODATA.boltzmann * self.temperature * self.resistance


@dataclass(frozen=True)
class DriveSchedule:
    """Parametric drive frequency, phase and time-dependent strength.

    ``epsilon(t)`` is 0 before ``start_time``, ramps linearly over
    ``ramp_duration`` and holds at ``epsilon_max`` afterwards.  A zero ramp
    duration is an instantaneous step at ``start_time``.
    """

    omega_d: float = 2.0 * OMEGA_X_DEFAULT
    phi_d: float = 0.0
    epsilon_max: float = 0.1
    ramp_duration: float = 1e-6
    start_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon_max < 1.0:
            raise ValueError("epsilon_max must lie in [0, 1)")
        if self.ramp_duration < 0 or self.omega_d <= 0:
            raise ValueError("ramp_duration must be >= 0 and omega_d > 0")

    def epsilon(self, t):
        """Relative drive strength at time(s) ``t`` (scalar or array)."""
        t = np.asarray(t, dtype=float)
        if self.ramp_duration == 0.0:
            out = np.where(t >= self.start_time, self.epsilon_max, 0.0)
        else:
            frac = np.clip((t - self.start_time) / self.ramp_duration, 0.0, 1.0)
            out = self.epsilon_max * frac
        return float(out) if out.ndim == 0 else out

    @property
    def ramp_end(self) -> float:
        return self.start_time + self.ramp_duration

    def stepped(self) -> "DriveSchedule":
        """Copy of this schedule with an instantaneous step instead of a ramp."""
        return DriveSchedule(self.omega_d, self.phi_d, self.epsilon_max, 0.0, self.start_time)


def damping_rate(mass: float, d_eff: float, charge: float, resistance: float) -> float:
    """Resonator-induced velocity damping rate gamma = q^2 R / (m d_eff^2).

    Its inverse is the system damping time constant; at the default operating
    point 1/gamma is about 2.7 ms.
    """
    if mass <= 0 or d_eff <= 0 or charge <= 0:
        raise ValueError("mass, d_eff and charge must be positive")
    if resistance < 0:
        raise ValueError("resistance must be non-negative")
    return charge * charge * resistance / (mass * d_eff * d_eff)


def drive_voltage_ratio(epsilon: float, omega_rf: float, omega_x: float) -> float:
    """Voltage ratio of the rf trapping drive to the parametric drive.

    V_rf / V_d = sqrt(2) omega_rf / (omega_x epsilon); the ratio is 102.67 at
    the default operating point with epsilon = 0.1.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive; the ratio diverges at 0")
    if omega_rf <= 0 or omega_x <= 0:
        raise ValueError("frequencies must be positive")
    return math.sqrt(2.0) * omega_rf / (omega_x * epsilon)


def drive_voltage_ratio_db(epsilon: float, omega_rf: float, omega_x: float) -> float:
    """Same ratio expressed in dB of power for equal impedances (40.2 dB at defaults)."""
    return 20.0 * math.log10(drive_voltage_ratio(epsilon, omega_rf, omega_x))


def thermal_sample(temperature: float, omega: float, phase: float,
                   constants: PhysicalConstants = CODATA) -> tuple[float, float]:
    """Position/velocity pair on the thermal-energy contour of one mode.

    r = sqrt(k_B T / (m omega^2)) cos(phase),
    v = -sqrt(k_B T / m) sin(phase);
    the total mode energy is k_B T / 2 for every phase.
    """
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if omega <= 0:
        raise ValueError("omega must be positive")
    v_scale = math.sqrt(constants.boltzmann * temperature / constants.electron_mass)
    return v_scale / omega * math.cos(phase), -v_scale * math.sin(phase)
