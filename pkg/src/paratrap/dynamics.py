"""Deterministic and stochastic integration of the electron equations of motion.

Two systems are integrated:

* the 1D parametrically driven anharmonic oscillator
  x'' = -wx^2 x (1 + eps(t) cos(w_d t + phi_d)) - sum_i i C_i x^(i-1) - gamma x'
* the full 3D electron coupled to the pickup resonator,
  m r''/q = E_dc + E_rf cos(w_rf t + phi_rf) + E_d eps(t) cos(w_d t + phi_d)
            + L I' D_inv(r),
  L C I'' = -L I'/R - I - q D_inv . r'
  with q the signed electron charge.  Dissipation enters only through the
  circuit resistance; no ad hoc friction is added to the 3D equations.

ODE runs use an adaptive explicit Runge-Kutta of order 8 (abstol = reltol =
1e-10 by default); stochastic runs use a fixed-step scheme appropriate for
additive noise, with the noise drawn per step as N(0, 1/dt) increments (see
:mod:`paratrap._integrators`).  Output is uniformly sampled at 4.096 GS/s by
default, with sample times hit exactly by the integrator.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _integrators as _ki
from .core import CODATA, DriveSchedule, PhysicalConstants, ResonatorParams, TrapParams, thermal_sample
from .fieldmodel import AnharmonicSpec, CalibrationError, FieldModel, calibrate
from .noise import NoiseConfig, NoiseStreams, johnson_current_sigma, rf_walk_sigma_step, surface_field_sigma

SAMPLE_RATE_DEFAULT = 4.096e9
SDE_STEP_DEFAULT = 1.0 / 16.384e9
_SDE_CHUNK_STEPS = 1 << 18

COLUMNS_3D = ("x", "y", "z", "vx", "vy", "vz", "I", "dIdt", "V")
COLUMNS_1D = ("x", "v")


class IntegrationError(RuntimeError):
    """Integration could not continue; carries the last valid time."""

    def __init__(self, message: str, t_last: float):
        super().__init__(f"{message} (last valid time {t_last:.6e} s)")
        self.t_last = t_last


@dataclass(frozen=True)
class EscapeEvent:
    """Trajectory left the field-model region of interest."""

    time: float
    position: tuple


class TrapEscapeError(RuntimeError):
    """Raised when a trajectory escapes the ROI; carries the partial record."""

    def __init__(self, event: EscapeEvent, trajectory: "Trajectory"):
        super().__init__(
            f"trajectory escaped ROI at t={event.time:.6e} s, r={event.position}"
        )
        self.event = event
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegratorSettings:
    """Error-control contract for the integrators.

    ``abstol``/``reltol`` control the adaptive ODE driver; stochastic runs
    use the fixed nominal step ``sde_step`` (the noise increments are defined
    per step, so the step is the operative control there).
    """

    abstol: float = 1e-10
    reltol: float = 1e-10
    max_step: float = math.inf
    mode: str = "ode"
    sde_step: float = SDE_STEP_DEFAULT

    def __post_init__(self):
        for name in ("abstol", "reltol"):
            tol = getattr(self, name)
            if not 0.0 < tol <= 1e-3:
                raise ValueError(f"{name} must lie in (0, 1e-3]")
        if self.mode not in ("ode", "sde"):
            raise ValueError("mode must be 'ode' or 'sde'")
        if self.sde_step <= 0:
            raise ValueError("sde_step must be positive")

    @classmethod
    def sde(cls, **kwargs) -> "IntegratorSettings":
        kwargs.setdefault("abstol", 1e-9)
        kwargs.setdefault("reltol", 1e-9)
        kwargs.setdefault("mode", "sde")
        return cls(**kwargs)


@dataclass(frozen=True)
class InitCondition:
    """Thermal initialization: r_i = sqrt(k_B T / m w_i^2) cos(phi_i),
    v_i = -sqrt(k_B T / m) sin(phi_i) per axis."""

    temperature: float = 4.0
    phi_x: float = 0.0
    phi_y: float = 0.0
    phi_z: float = 0.0
    phi_rf: float | None = None


@dataclass(frozen=True)
class FullState:
    position: tuple
    velocity: tuple
    current: float
    current_rate: float


@dataclass
class IntegrationStats:
    steps_accepted: int = 0
    steps_rejected: int = 0
    wall_time: float = 0.0


@dataclass
class Trajectory:
    """Uniformly sampled time series; row 0 is the initial state."""

    t: np.ndarray
    data: np.ndarray
    columns: tuple
    sample_rate: float
    stats: IntegrationStats
    escape: EscapeEvent | None = None
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def record(self, name: str) -> np.ndarray:
        """Column without the t=0 row: exactly t_end * sample_rate samples,
        uniformly spaced, suitable for on-bin spectral analysis."""
        return self.column(name)[1:]

    def final_state(self) -> FullState:
        row = self.data[-1]
        if len(self.columns) >= 8:
            return FullState(tuple(row[0:3]), tuple(row[3:6]), row[6], row[7])
        return FullState((row[0],), (row[1],), 0.0, 0.0)


@dataclass(frozen=True)
class Oscillator1D:
    """Parameters of the 1D model: secular frequency, damping, anharmonics."""

    omega_x: float
    gamma: float = 0.0
    anharmonics: tuple = (0.0, 0.0, 0.0, 0.0)
    roi_x: float = 150e-6

    @classmethod
    def from_trap(cls, trap: TrapParams, gamma: float = 0.0) -> "Oscillator1D":
        return cls(trap.omega_x, gamma, (0.0, trap.c4, 0.0, trap.c6))


def matched_damping(fieldmodel: FieldModel, resonator: ResonatorParams,
                    constants: PhysicalConstants = CODATA) -> float:
    """Equivalent 1D damping rate q^2 R D_x(0)^2 / m of the 3D coupling."""
    d_x = fieldmodel.coupling.vector((0.0, 0.0, 0.0))[0]
    q = constants.elementary_charge
    return q * q * resonator.resistance * d_x * d_x / constants.electron_mass


def initial_state(init: InitCondition, fieldmodel: FieldModel,
                  constants: PhysicalConstants = CODATA) -> tuple:
    """(r0, v0) from the per-axis thermal parameterization."""
    omegas = fieldmodel.targets or fieldmodel.secular_frequencies()
    phases = (init.phi_x, init.phi_y, init.phi_z)
    r0 = np.empty(3)
    v0 = np.empty(3)
    for i in range(3):
        r0[i], v0[i] = thermal_sample(init.temperature, omegas[i], phases[i], constants)
    return r0, v0


def pack_params(fieldmodel: FieldModel | None, resonator: ResonatorParams | None,
                schedule: DriveSchedule, constants: PhysicalConstants = CODATA,
                *, phi_rf: float | None = None,
                oscillator: Oscillator1D | None = None) -> np.ndarray:
    """Flatten model parameters into the kernel layout."""
    P = np.zeros(_ki.P_SIZE)
    P[_ki.P_OMEGA_D] = schedule.omega_d
    P[_ki.P_PHI_D] = schedule.phi_d
    P[_ki.P_EPS_MAX] = schedule.epsilon_max
    P[_ki.P_T_START] = schedule.start_time
    P[_ki.P_T_RAMP] = schedule.ramp_duration

    if oscillator is not None:
        P[_ki.P_WX2_1D] = oscillator.omega_x**2
        P[_ki.P_GAMMA_1D] = oscillator.gamma
        P[_ki.P_ANH_X:_ki.P_ANH_X + 4] = oscillator.anharmonics
        P[_ki.P_ROI_X] = oscillator.roi_x
        return P

    assert fieldmodel is not None and resonator is not None
    P[_ki.P_Q_SIGNED] = constants.electron_charge_signed
    P[_ki.P_MASS] = constants.electron_mass
    P[_ki.P_Q_OVER_M] = constants.electron_charge_signed / constants.electron_mass
    P[_ki.P_CX], P[_ki.P_CY], P[_ki.P_CZ] = fieldmodel.dc_curvatures
    P[_ki.P_RF_AMP] = fieldmodel.rf_amplitude
    P[_ki.P_OMEGA_RF] = fieldmodel.omega_rf
    P[_ki.P_PHI_RF] = fieldmodel.phi_rf if phi_rf is None else phi_rf
    P[_ki.P_DRIVE] = fieldmodel.drive_curvature
    P[_ki.P_L] = resonator.inductance
    P[_ki.P_INV_LC] = 1.0 / (resonator.inductance * resonator.capacitance)
    P[_ki.P_L_OVER_R] = resonator.inductance / resonator.resistance
    P[_ki.P_DX0:_ki.P_DX0 + 5] = fieldmodel.coupling.padded_x()
    P[_ki.P_DY] = fieldmodel.coupling.y_component
    P[_ki.P_DZ] = fieldmodel.coupling.z_component
    anh = fieldmodel.anharmonics.as_array()
    P[_ki.P_ANH_X:_ki.P_ANH_X + 4] = anh[0]
    P[_ki.P_ANH_Y:_ki.P_ANH_Y + 4] = anh[1]
    P[_ki.P_ANH_Z:_ki.P_ANH_Z + 4] = anh[2]
    P[_ki.P_ROI_X], P[_ki.P_ROI_Y], P[_ki.P_ROI_Z] = fieldmodel.roi
    return P


def _sample_count(t_end: float, sample_rate: float) -> int:
    n = int(round(t_end * sample_rate))
    if n < 1:
        raise ValueError("t_end shorter than one sample interval")
    return n


def _run_ode(model: int, P: np.ndarray, y0: np.ndarray, t_end: float,
             settings: IntegratorSettings, sample_rate: float,
             columns: tuple, postprocess) -> Trajectory:
    n_samples = _sample_count(t_end, sample_rate)
    sample_dt = 1.0 / sample_rate
    ndim = y0.size
    out = np.empty((n_samples, ndim))
    last = np.empty(1 + ndim)
    t0 = time.perf_counter()
    status, n_acc, n_rej, n_filled = _ki.ode_drive(
        model, P, y0, 0.0, sample_dt, n_samples,
        settings.reltol, settings.abstol, settings.max_step, out, last,
    )
    wall = time.perf_counter() - t0
    stats = IntegrationStats(n_acc, n_rej, wall)
    t = np.arange(n_filled + 1) * sample_dt
    data = np.vstack([y0[None, :], out[:n_filled]])
    traj = postprocess(t, data, stats)
    if status == _ki.STATUS_ESCAPE:
        event = EscapeEvent(last[0], tuple(last[1:4] if model == _ki.MODEL_3D else last[1:2]))
        traj.escape = event
        raise TrapEscapeError(event, traj)
    if status != _ki.STATUS_OK:
        raise IntegrationError(
            "step-size underflow or non-finite state", float(last[0])
        )
    return traj


def integrate_1d(x0: float, v0: float, oscillator: Oscillator1D,
                 schedule: DriveSchedule, t_end: float,
                 settings: IntegratorSettings = IntegratorSettings(),
                 sample_rate: float = SAMPLE_RATE_DEFAULT) -> Trajectory:
    """Integrate the 1D model, sampling (x, v) uniformly."""
    if not (math.isfinite(x0) and math.isfinite(v0)):
        raise ValueError("initial state must be finite")
    P = pack_params(None, None, schedule, oscillator=oscillator)
    y0 = np.array([x0, v0])

    def post(t, data, stats):
        return Trajectory(t, data, COLUMNS_1D, sample_rate, stats)

    return _run_ode(_ki.MODEL_1D, P, y0, t_end, settings, sample_rate, COLUMNS_1D, post)


def _3d_postprocess(resonator: ResonatorParams, sample_rate: float, store: str):
    inductance = resonator.inductance

    def post(t, data, stats):
        if store == "voltage":
            cols = ("V",)
            v = data[:, [7]] * inductance if data.shape[1] == 8 else data
            return Trajectory(t, v, cols, sample_rate, stats)
        v = inductance * data[:, 7]
        full = np.column_stack([data, v])
        return Trajectory(t, full, COLUMNS_3D, sample_rate, stats)

    return post


def integrate_3d(init: InitCondition | tuple, fieldmodel: FieldModel,
                 resonator: ResonatorParams, schedule: DriveSchedule,
                 t_end: float, settings: IntegratorSettings = IntegratorSettings(),
                 *, sample_rate: float = SAMPLE_RATE_DEFAULT, store: str = "full",
                 noise: NoiseConfig | None = None,
                 streams: NoiseStreams | None = None,
                 constants: PhysicalConstants = CODATA) -> Trajectory:
    """Integrate the coupled 8-dimensional electron-resonator system.

    ``init`` is either an :class:`InitCondition` or an explicit ``(r0, v0)``
    pair.  The circuit starts at I = I' = 0.  With ``settings.mode == 'sde'``
    a :class:`NoiseConfig` and per-source random streams are required; the
    run is then fixed-step and bit-reproducible for fixed seeds.
    ``store='voltage'`` keeps only the resonator node voltage V = L dI/dt.
    """
    if store not in ("full", "voltage"):
        raise ValueError("store must be 'full' or 'voltage'")
    min_rate = (fieldmodel.omega_rf + max(fieldmodel.secular_frequencies())) / math.pi
    if sample_rate < min_rate:
        raise ValueError(
            f"sample_rate {sample_rate:.3e} aliases the micromotion sideband; "
            f"need at least {min_rate:.3e} S/s"
        )

    if isinstance(init, InitCondition):
        r0, v0 = initial_state(init, fieldmodel, constants)
        phi_rf = init.phi_rf
    else:
        r0, v0 = (np.asarray(a, dtype=float) for a in init)
        phi_rf = None
    if not fieldmodel.in_roi(r0):
        raise ValueError("initial position outside the region of interest")
    y0 = np.concatenate([r0, v0, [0.0, 0.0]])

    P = pack_params(fieldmodel, resonator, schedule, constants, phi_rf=phi_rf)
    post = _3d_postprocess(resonator, sample_rate, store)

    if settings.mode == "ode":
        if noise is not None:
            raise ValueError("noise injection requires settings.mode == 'sde'")
        return _run_ode(_ki.MODEL_3D, P, y0, t_end, settings, sample_rate,
                        COLUMNS_3D, post)

    if noise is None or streams is None:
        raise ValueError("sde mode needs a NoiseConfig and NoiseStreams")
    return _run_sde(P, y0, fieldmodel, resonator, schedule, t_end, settings,
                    sample_rate, store, noise, streams, post)


def _run_sde(P, y0, fieldmodel, resonator, schedule, t_end, settings,
             sample_rate, store, noise, streams, post) -> Trajectory:
    h = settings.sde_step
    n_steps = int(round(t_end / h))
    if abs(n_steps * h - t_end) > 1e-9 * t_end:
        raise ValueError("t_end must be an integer number of sde steps")
    out_every_f = 1.0 / (sample_rate * h)
    out_every = int(round(out_every_f))
    if out_every < 1 or abs(out_every - out_every_f) > 1e-9:
        raise ValueError("sample_rate must divide the sde step rate")
    n_samples = n_steps // out_every

    sigma_e = surface_field_sigma(noise, h) if noise.surface_enabled else 0.0
    sigma_i = johnson_current_sigma(resonator, h) if noise.johnson_enabled else 0.0
    sigma_w = rf_walk_sigma_step(noise, h) if noise.rf_walk_enabled else 0.0
    axes = noise.surface_axes

    ncols = 1 if store == "voltage" else 8
    out = np.empty((n_samples, ncols))
    y = y0.copy()
    ru = 1.0
    row0 = 0
    k0 = 0
    status = _ki.STATUS_OK
    t0 = time.perf_counter()
    while k0 < n_steps:
        chunk = min(_SDE_CHUNK_STEPS, n_steps - k0)
        en = np.zeros((chunk, 3))
        if sigma_e > 0.0:
            draws = streams.surface.standard_normal((chunk, int(np.sum(axes))))
            j = 0
            for ax in range(3):
                if axes[ax]:
                    en[:, ax] = sigma_e * draws[:, j]
                    j += 1
        if sigma_i > 0.0:
            i_n = sigma_i * streams.johnson.standard_normal(chunk)
        else:
            i_n = np.zeros(chunk)
        if sigma_w > 0.0:
            dw = sigma_w * streams.rf_walk.standard_normal(chunk)
        else:
            dw = np.zeros(chunk)
        status, ru, done, rows = _ki.sde_chunk(
            P, y, 0.0, h, k0, chunk, ru, en, i_n, dw, out, row0, out_every,
            store == "voltage",
        )
        k0 += done
        row0 += rows
        if status != _ki.STATUS_OK:
            break
    wall = time.perf_counter() - t0
    stats = IntegrationStats(k0, 0, wall)

    t = np.arange(row0 + 1) / sample_rate
    if store == "voltage":
        data = np.vstack([[[resonator.inductance * y0[7]]], out[:row0]])
    else:
        data = np.vstack([y0[None, :], out[:row0]])
    traj = post(t, data, stats)
    traj.meta["rf_walk_final"] = ru
    if status == _ki.STATUS_ESCAPE:
        event = EscapeEvent(k0 * h, tuple(y[0:3]))
        traj.escape = event
        raise TrapEscapeError(event, traj)
    if status != _ki.STATUS_OK:
        raise IntegrationError("non-finite state in stochastic run", k0 * h)
    return traj


def simulate_johnson_voltage(resonator: ResonatorParams, t_end: float,
                             stream: np.random.Generator,
                             *, step: float = SDE_STEP_DEFAULT,
                             sample_rate: float = SAMPLE_RATE_DEFAULT) -> np.ndarray:
    """Resonator node voltage driven by Johnson current noise only.

    The electron is decoupled; used to calibrate the 4 k_B T R noise floor.
    Returns the voltage record sampled at ``sample_rate`` (without t=0).
    """
    n_steps = int(round(t_end / step))
    out_every = int(round(1.0 / (sample_rate * step)))
    n_samples = n_steps // out_every
    sigma_i = johnson_current_sigma(resonator, step)
    inv_lc = 1.0 / (resonator.inductance * resonator.capacitance)
    l_over_r = resonator.inductance / resonator.resistance
    y = np.zeros(2)
    out = np.empty(n_samples)
    row0 = 0
    k0 = 0
    while k0 < n_steps:
        chunk = min(_SDE_CHUNK_STEPS, n_steps - k0)
        i_n = sigma_i * stream.standard_normal(chunk)
        rows = _ki.johnson_chunk(inv_lc, l_over_r, resonator.inductance, y,
                                 step, chunk, i_n, out, row0, out_every, k0)
        row0 += rows
        k0 += chunk
    return out[:row0]


@dataclass
class DetuningScanResult:
    omega_x_values: np.ndarray
    phi_x_values: np.ndarray
    voltage_amplitude: np.ndarray  # (n_omega, n_phi), V at the detection bin
    detect_frequency: float

    def rows(self):
        for i, w in enumerate(self.omega_x_values):
            for j, p in enumerate(self.phi_x_values):
                yield w, p, self.voltage_amplitude[i, j]


def detuning_scan(omega_x_values, phi_x_values, resonator: ResonatorParams,
                  schedule: DriveSchedule, *, omega_y: float, omega_z: float,
                  omega_rf: float, anharmonics: AnharmonicSpec,
                  t_end: float = 20e-6,
                  settings: IntegratorSettings = IntegratorSettings(),
                  sample_rate: float = SAMPLE_RATE_DEFAULT,
                  temperature: float = 4.0, detect_frequency: float = 200e6,
                  constants: PhysicalConstants = CODATA) -> DetuningScanResult:
    """Induced-voltage amplitude at the detection frequency over a
    (omega_x, phi_x) grid.

    Each omega_x re-calibrates the field model radially; the anharmonic
    coefficients and the drive curvature stay at their nominal values (the
    trap geometry and the drive voltage do not change with the detuning).
    """
    from .spectral import amplitude_at, psd  # local import keeps module load light

    nominal_drive = (schedule.omega_d / 2.0) ** 2
    omega_x_values = np.asarray(omega_x_values, dtype=float)
    phi_x_values = np.asarray(phi_x_values, dtype=float)
    amps = np.empty((omega_x_values.size, phi_x_values.size))
    for i, omega_x in enumerate(omega_x_values):
        fieldmodel = calibrate(
            (omega_x, omega_y, omega_z), omega_rf,
            anharmonics=anharmonics, drive_curvature=nominal_drive,
            constants=constants,
        )
        for j, phi_x in enumerate(phi_x_values):
            init = InitCondition(temperature=temperature, phi_x=phi_x)
            traj = integrate_3d(init, fieldmodel, resonator, schedule, t_end,
                                settings, sample_rate=sample_rate, store="voltage",
                                constants=constants)
            spectrum = psd(traj.record("V"), sample_rate)
            amps[i, j] = amplitude_at(spectrum, detect_frequency)
    return DetuningScanResult(omega_x_values, phi_x_values, amps, detect_frequency)
