"""Constants, parameter containers, and calibration formulas."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from paratrap.core import (
    CODATA,
    TWO_PI,
    DriveSchedule,
    PhysicalConstants,
    ResonatorParams,
    TrapParams,
    damping_rate,
    drive_voltage_ratio,
    drive_voltage_ratio_db,
    lambda4_si,
    lambda6_si,
    thermal_sample,
)


class TestDampingRate:
    def test_default_operating_point_gives_2p7_ms(self):
        gamma = damping_rate(CODATA.electron_mass, 4.8e-3,
                             CODATA.elementary_charge, 300e3)
        assert 1.0 / gamma == pytest.approx(2.7e-3, rel=0.01)

    def test_zero_resistance_means_no_dissipation(self):
        assert damping_rate(CODATA.electron_mass, 4.8e-3,
                            CODATA.elementary_charge, 0.0) == 0.0

    def test_doubling_distance_quarters_rate(self):
        base = damping_rate(CODATA.electron_mass, 4.8e-3,
                            CODATA.elementary_charge, 300e3)
        doubled = damping_rate(CODATA.electron_mass, 9.6e-3,
                               CODATA.elementary_charge, 300e3)
        assert doubled == pytest.approx(base / 4.0, rel=1e-12)

    def test_rejects_nonpositive_inputs(self):
        with pytest.raises(ValueError):
            damping_rate(0.0, 4.8e-3, CODATA.elementary_charge, 300e3)
        with pytest.raises(ValueError):
            damping_rate(CODATA.electron_mass, -1.0, CODATA.elementary_charge, 300e3)


class TestDriveVoltageRatio:
    def test_paper_operating_point(self):
        ratio = drive_voltage_ratio(0.1, TWO_PI * 1.452e9, TWO_PI * 200e6)
        assert ratio == pytest.approx(102.67, abs=0.01)

    def test_db_form(self):
        db = drive_voltage_ratio_db(0.1, TWO_PI * 1.452e9, TWO_PI * 200e6)
        assert db == pytest.approx(40.2, abs=0.05)

    def test_halving_epsilon_doubles_ratio(self):
        r1 = drive_voltage_ratio(0.1, TWO_PI * 1.452e9, TWO_PI * 200e6)
        r2 = drive_voltage_ratio(0.05, TWO_PI * 1.452e9, TWO_PI * 200e6)
        assert r2 == pytest.approx(2.0 * r1, rel=1e-12)

    def test_zero_epsilon_is_domain_error(self):
        with pytest.raises(ValueError):
            drive_voltage_ratio(0.0, TWO_PI * 1.452e9, TWO_PI * 200e6)

    @given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
    def test_homogeneity_in_epsilon_and_omega_rf(self, s_eps, s_rf):
        base = drive_voltage_ratio(0.1, TWO_PI * 1.452e9, TWO_PI * 200e6)
        scaled = drive_voltage_ratio(0.1 * s_eps, TWO_PI * 1.452e9 * s_rf,
                                     TWO_PI * 200e6)
        assert scaled == pytest.approx(base * s_rf / s_eps, rel=1e-9)


class TestThermalSample:
    def test_quarter_phase_is_pure_velocity(self):
        r, v = thermal_sample(4.0, TWO_PI * 200e6, math.pi / 2)
        assert r == pytest.approx(0.0, abs=1e-20)
        assert v == pytest.approx(-math.sqrt(CODATA.boltzmann * 4.0
                                             / CODATA.electron_mass), rel=1e-12)

    def test_position_amplitude_at_4k(self):
        r, v = thermal_sample(4.0, TWO_PI * 200e6, 0.0)
        expected = math.sqrt(CODATA.boltzmann * 4.0 / CODATA.electron_mass) / (TWO_PI * 200e6)
        assert r == pytest.approx(expected, rel=1e-12)
        assert r == pytest.approx(6.2e-6, rel=0.01)
        assert v == 0.0

    def test_zero_temperature(self):
        for phase in (0.0, 1.0, 4.0):
            assert thermal_sample(0.0, TWO_PI * 200e6, phase) == (0.0, -0.0)

    @given(st.floats(0.0, 2.0 * math.pi), st.floats(0.01, 300.0),
           st.floats(1e6, 1e10))
    def test_energy_is_half_kbt_for_every_phase(self, phase, temperature, omega):
        r, v = thermal_sample(temperature, omega, phase)
        m = CODATA.electron_mass
        energy = 0.5 * m * omega**2 * r**2 + 0.5 * m * v**2
        assert energy == pytest.approx(0.5 * CODATA.boltzmann * temperature,
                                       rel=1e-12)


class TestResonatorParams:
    def test_derived_rlc_values(self):
        res = ResonatorParams()
        assert res.resistance == pytest.approx(300e3, rel=1e-12)
        assert res.omega_res == pytest.approx(
            1.0 / math.sqrt(res.inductance * res.capacitance), rel=1e-12)
        assert res.z0 == pytest.approx(
            math.sqrt(res.inductance / res.capacitance), rel=1e-12)

    def test_round_trip_through_rlc(self):
        res = ResonatorParams(q_factor=750.0, z0=210.0, omega_res=TWO_PI * 180e6)
        back = ResonatorParams.from_rlc(res.resistance, res.inductance,
                                        res.capacitance, res.temperature)
        assert back.q_factor == pytest.approx(res.q_factor, rel=1e-12)
        assert back.z0 == pytest.approx(res.z0, rel=1e-12)
        assert back.omega_res == pytest.approx(res.omega_res, rel=1e-12)

    def test_johnson_floor_value(self):
        assert ResonatorParams().johnson_floor() == pytest.approx(6.63e-17, rel=0.01)

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ResonatorParams(q_factor=0.0)
        with pytest.raises(ValueError):
            ResonatorParams(temperature=-1.0)


class TestDriveSchedule:
    def test_ramp_shape(self):
        sched = DriveSchedule(epsilon_max=0.1, ramp_duration=1e-6)
        assert sched.epsilon(-1e-9) == 0.0
        assert sched.epsilon(0.5e-6) == pytest.approx(0.05, rel=1e-12)
        assert sched.epsilon(1e-6) == pytest.approx(0.1, rel=1e-12)
        assert sched.epsilon(5e-6) == pytest.approx(0.1, rel=1e-12)

    def test_zero_ramp_is_a_step(self):
        sched = DriveSchedule(epsilon_max=0.1, ramp_duration=0.0)
        assert sched.epsilon(0.0) == 0.1
        assert sched.epsilon(-1e-12) == 0.0

    def test_array_evaluation_matches_scalar(self):
        sched = DriveSchedule()
        t = np.linspace(-1e-6, 3e-6, 101)
        arr = sched.epsilon(t)
        assert arr.shape == t.shape
        for ti, ei in zip(t, arr):
            assert sched.epsilon(float(ti)) == ei

    def test_stepped_copy(self):
        sched = DriveSchedule(ramp_duration=1e-6).stepped()
        assert sched.ramp_duration == 0.0
        assert sched.epsilon_max == 0.1

    def test_epsilon_max_bounds(self):
        with pytest.raises(ValueError):
            DriveSchedule(epsilon_max=1.0)
        with pytest.raises(ValueError):
            DriveSchedule(epsilon_max=-0.1)


class TestTrapParams:
    def test_lambda_round_trip(self):
        trap = TrapParams.from_lambdas(lambda4_si(-4.08), lambda6_si(6.78e-6))
        assert trap.lambda4 == pytest.approx(lambda4_si(-4.08), rel=1e-12)
        assert trap.lambda6 == pytest.approx(lambda6_si(6.78e-6), rel=1e-12)

    def test_unit_conventions_differ_by_two_pi(self):
        assert lambda4_si(-4.08, "hz") == pytest.approx(
            TWO_PI * lambda4_si(-4.08, "rad"), rel=1e-12)
        with pytest.raises(ValueError):
            lambda4_si(-4.08, "bogus")

    def test_rf_frequency_guard(self):
        with pytest.raises(ValueError):
            TrapParams(omega_rf=TWO_PI * 300e6)

    def test_constants_positive(self):
        with pytest.raises(ValueError):
            PhysicalConstants(electron_mass=-1.0)
