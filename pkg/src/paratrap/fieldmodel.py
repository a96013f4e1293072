"""Parameterized analytic trap fields: dc, rf, parametric drive and pickup coupling.

This is a stand-in for boundary-element field data.  Each contribution is a
low-order polynomial field calibrated so the pseudopotential reproduces the
requested secular frequencies:

* dc: harmonic acceleration curvatures (c_x, c_y, c_z) with the Laplace
  constraint c_x + c_y + c_z = 0, plus optional per-axis anharmonic terms
  from the potential-per-mass polynomial sum_i C_i s^i (i = 3..6).  The
  anharmonic addition is a declared approximation: it represents the static
  pseudopotential anharmonicity and is intentionally not divergence-free.
* rf: a 2D quadrupole with acceleration -W (x, -y, 0) cos(omega_rf t + phi_rf);
  the pseudopotential curvature per radial axis is W^2 / (2 omega_rf^2).
* parametric drive: a 2D quadrupole with x-curvature ``drive_curvature``
  scaled by the schedule's epsilon(t).
* pickup coupling D_inv: constant (1/d_eff, 0, 0) by default, optionally a
  polynomial in x for the x component.

Evaluation is restricted to a region of interest; leaving it is an error so
trajectory integration can abort with a diagnosable escape event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .core import CODATA, D_EFF_DEFAULT, DriveSchedule, PhysicalConstants

ROI_DEFAULT = (150e-6, 150e-6, 25e-6)

# Relative tolerance for the calibration self-checks (Laplace trace and
# pseudopotential reproduction of the secular targets).
_CHECK_RTOL = 1e-6

AXES = ("x", "y", "z")


class CalibrationError(ValueError):
    """Requested secular targets cannot be met by the field model."""


class OutOfRegionError(ValueError):
    """Field evaluation requested outside the region of interest."""


def mathieu_secular_frequency(curvature: float, rf_sign: int, rf_amplitude: float,
                              omega_rf: float) -> float:
    """Exact secular frequency of x'' + (c + s W cos(w_rf t)) x = 0.

    Computed from the Floquet monodromy over one rf period: the trace gives
    cos(omega T).  At the operating q parameter (~0.38) this exceeds the
    lowest-order pseudopotential value by a few percent, which matters: the
    drive locks the motion at w_d/2, so the calibration must place the true
    secular frequency there, not its pseudopotential estimate.
    """
    if rf_sign == 0 or rf_amplitude == 0.0:
        if curvature <= 0:
            raise CalibrationError("axis without rf confinement needs positive curvature")
        return math.sqrt(curvature)
    period = 2.0 * math.pi / omega_rf

    def rhs(t, y):
        k = curvature + rf_sign * rf_amplitude * math.cos(omega_rf * t)
        return (y[1], -k * y[0], y[3], -k * y[2])

    sol = solve_ivp(rhs, (0.0, period), (1.0, 0.0, 0.0, 1.0), method="DOP853",
                    rtol=1e-12, atol=1e-12)
    trace = sol.y[0, -1] + sol.y[3, -1]
    if abs(trace) >= 2.0:
        raise CalibrationError("motion is Floquet-unstable for these parameters")
    return math.acos(0.5 * trace) / period


@dataclass(frozen=True)
class AnharmonicSpec:
    """Per-axis anharmonic coefficients C_3..C_6 of the potential per mass.

    ``coefficients[axis][i]`` is C_(i+3) for that axis, in (m^2/s^2) / m^(i+3).
    The x-axis quartic and sextic terms map onto the frequency-shift
    coefficients lambda4 = 3 C4 / (2 omega_x), lambda6 = 15 C6 / (8 omega_x).
    """

    coefficients: tuple = (
        (0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0, 0.0),
    )

    def __post_init__(self):
        if len(self.coefficients) != 3 or any(len(row) != 4 for row in self.coefficients):
            raise ValueError("coefficients must be a 3x4 table (axes x orders 3..6)")

    @classmethod
    def zero(cls) -> "AnharmonicSpec":
        return cls()

    @classmethod
    def from_lambdas(cls, lambda4: float, lambda6: float, omega_x: float,
                     axes=(0,)) -> "AnharmonicSpec":
        """Coefficients reproducing given shift coefficients on the listed axes."""
        c4 = 2.0 * omega_x * lambda4 / 3.0
        c6 = 8.0 * omega_x * lambda6 / 15.0
        rows = []
        for ax in range(3):
            rows.append((0.0, c4, 0.0, c6) if ax in axes else (0.0, 0.0, 0.0, 0.0))
        return cls(tuple(rows))

    def lambda4(self, omega_x: float) -> float:
        return 1.5 * self.coefficients[0][1] / omega_x

    def lambda6(self, omega_x: float) -> float:
        return 15.0 * self.coefficients[0][3] / (8.0 * omega_x)

    def acceleration(self, axis: int, s: float) -> float:
        """Anharmonic acceleration contribution -sum_i i C_i s^(i-1) on one axis."""
        c3, c4, c5, c6 = self.coefficients[axis]
        return -(s * s * (3.0 * c3 + s * (4.0 * c4 + s * (5.0 * c5 + s * 6.0 * c6))))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)


@dataclass(frozen=True)
class CouplingModel:
    """Inverse effective pickup distance D_inv(r), in 1/m.

    The x component may depend polynomially on x; y and z components are
    constants (zero by default).  ``constant(d_eff)`` gives the usual
    (1/d_eff, 0, 0).
    """

    x_coefficients: tuple = (1.0 / D_EFF_DEFAULT,)
    y_component: float = 0.0
    z_component: float = 0.0

    def __post_init__(self):
        if not 1 <= len(self.x_coefficients) <= 5:
            raise ValueError("x polynomial supports orders 0..4")

    @classmethod
    def constant(cls, d_eff: float) -> "CouplingModel":
        if d_eff <= 0:
            raise ValueError("d_eff must be positive")
        return cls((1.0 / d_eff,))

    def vector(self, r) -> np.ndarray:
        x = float(np.asarray(r)[0])
        acc = 0.0
        for coef in reversed(self.x_coefficients):
            acc = acc * x + coef
        return np.array([acc, self.y_component, self.z_component])

    def padded_x(self, n: int = 5) -> tuple:
        return tuple(self.x_coefficients) + (0.0,) * (n - len(self.x_coefficients))


@dataclass(frozen=True)
class FieldModel:
    """Calibrated trap field set; immutable and safe to share.

    ``dc_curvatures`` are acceleration curvatures (1/s^2): the dc acceleration
    is -(c_x x, c_y y, c_z z).  ``rf_amplitude`` is the rf quadrupole
    acceleration-curvature amplitude W, and ``drive_curvature`` the analogous
    scale of the parametric drive quadrupole.
    """

    dc_curvatures: tuple
    rf_amplitude: float
    omega_rf: float
    phi_rf: float = 0.0
    drive_curvature: float = 0.0
    anharmonics: AnharmonicSpec = field(default_factory=AnharmonicSpec)
    coupling: CouplingModel = field(default_factory=CouplingModel)
    roi: tuple = ROI_DEFAULT
    targets: tuple | None = None
    constants: PhysicalConstants = CODATA

    def __post_init__(self):
        cx, cy, cz = self.dc_curvatures
        scale = max(abs(cx), abs(cy), abs(cz), 1.0)
        if abs(cx + cy + cz) > _CHECK_RTOL * scale:
            raise CalibrationError("dc curvatures violate the Laplace trace condition")
        if self.rf_amplitude < 0:
            raise CalibrationError("rf amplitude must be non-negative")
        if self.targets is not None:
            for want, got in zip(self.targets, self.secular_frequencies()):
                if abs(got - want) > _CHECK_RTOL * want:
                    raise CalibrationError(
                        "pseudopotential curvatures do not reproduce the secular targets"
                    )

    # -- derived quantities -------------------------------------------------

    def pseudo_curvatures(self) -> tuple:
        """Lowest-order pseudopotential curvatures W^2/(2 w_rf^2) + c_i (reference)."""
        rf_part = self.rf_amplitude**2 / (2.0 * self.omega_rf**2)
        cx, cy, cz = self.dc_curvatures
        return (rf_part + cx, rf_part + cy, cz)

    def secular_frequencies(self) -> tuple:
        """True secular frequencies of the linearized motion (Floquet-exact)."""
        cx, cy, cz = self.dc_curvatures
        return (
            mathieu_secular_frequency(cx, +1, self.rf_amplitude, self.omega_rf),
            mathieu_secular_frequency(cy, -1, self.rf_amplitude, self.omega_rf),
            mathieu_secular_frequency(cz, 0, self.rf_amplitude, self.omega_rf),
        )

    # -- evaluation ---------------------------------------------------------

    def in_roi(self, r) -> bool:
        r = np.asarray(r, dtype=float)
        return bool(np.all(np.abs(r) <= np.asarray(self.roi)))

    def _require_roi(self, r):
        if not self.in_roi(r):
            raise OutOfRegionError(f"position {np.asarray(r).tolist()} outside ROI {self.roi}")

    def accelerations_at(self, r, t: float, schedule: DriveSchedule,
                         rf_scale: float = 1.0):
        """(a_dc, a_rf, a_d) acceleration contributions at position/time.

        ``rf_scale`` multiplies both rf-electrode field amplitudes (used for
        relative rf-voltage fluctuations).  The coupling term is not included;
        it needs the live circuit state.
        """
        self._require_roi(r)
        x, y, z = (float(v) for v in np.asarray(r, dtype=float))
        cx, cy, cz = self.dc_curvatures
        a_dc = np.array([
            -cx * x + self.anharmonics.acceleration(0, x),
            -cy * y + self.anharmonics.acceleration(1, y),
            -cz * z + self.anharmonics.acceleration(2, z),
        ])
        crf = math.cos(self.omega_rf * t + self.phi_rf) * rf_scale
        a_rf = np.array([-self.rf_amplitude * x, self.rf_amplitude * y, 0.0]) * crf
        cd = schedule.epsilon(t) * math.cos(schedule.omega_d * t + schedule.phi_d) * rf_scale
        a_d = np.array([-self.drive_curvature * x, self.drive_curvature * y, 0.0]) * cd
        return a_dc, a_rf, a_d

    def fields_at(self, r, t: float, schedule: DriveSchedule):
        """(E_dc, E_rf, E_d) in V/m, instantaneous, for the signed charge -e.

        E = (m / q) a with q = -e, so the dc field of a confining curvature
        points along +x for x > 0 (the force -eE is restoring).
        """
        scale = self.constants.electron_mass / self.constants.electron_charge_signed
        return tuple(scale * a for a in self.accelerations_at(r, t, schedule))

    def coupling_vector(self, r) -> np.ndarray:
        """Inverse effective distance D_inv(r) in 1/m."""
        self._require_roi(r)
        return self.coupling.vector(r)


def calibrate(target_secular, omega_rf: float, dc_split: float = 0.5, *,
              phi_rf: float = 0.0, anharmonics: AnharmonicSpec | None = None,
              coupling: CouplingModel | None = None,
              drive_curvature: float | None = None, roi=ROI_DEFAULT,
              rf_enabled: bool = True, floquet_correction: bool = True,
              constants: PhysicalConstants = CODATA) -> FieldModel:
    """Solve for dc curvatures and rf amplitude meeting the secular targets.

    With a symmetric 2D rf quadrupole and the Laplace trace condition the
    problem is exactly determined.  The lowest-order solution is

        P   = (wx^2 + wy^2 + wz^2) / 2      (common radial rf curvature)
        W   = omega_rf sqrt(2 P)
        c_i = wi^2 - P (radial),  c_z = wz^2

    and serves as the Newton starting point; the iteration then adjusts the
    rf amplitude and the dc astigmatism until the Floquet-exact secular
    frequencies hit the targets (the lowest-order pseudopotential misses by
    a few percent at the operating q parameter).  ``dc_split`` is accepted
    for interface compatibility but carries no freedom: with a single
    symmetric rf quadrupole the x/y split of the axial anti-confinement
    follows from the targets.  The drive quadrupole defaults to x-curvature
    wx^2 (scaled by epsilon(t) at evaluation time).
    """
    wx, wy, wz = (float(w) for w in target_secular)
    if min(wx, wy, wz) <= 0:
        raise CalibrationError("secular targets must be positive")
    if omega_rf <= 2.0 * max(wx, wy):
        raise CalibrationError("omega_rf must exceed twice the largest radial target")
    if not 0.0 <= dc_split <= 1.0:
        raise CalibrationError("dc_split must lie in [0, 1]")

    if not rf_enabled:
        raise CalibrationError(
            "radial confinement requires the rf quadrupole; "
            "cannot calibrate positive radial targets with zero rf amplitude"
        )

    pseudo = 0.5 * (wx * wx + wy * wy + wz * wz)
    rf_amplitude = omega_rf * math.sqrt(2.0 * pseudo)
    cz = wz * wz
    astig = 0.5 * (wx * wx - wy * wy)  # c_x = -cz/2 + astig, c_y = -cz/2 - astig

    if floquet_correction:
        rf_amplitude, astig = _newton_radial(wx, wy, cz, omega_rf, rf_amplitude, astig)

    return FieldModel(
        dc_curvatures=(-0.5 * cz + astig, -0.5 * cz - astig, cz),
        rf_amplitude=rf_amplitude,
        omega_rf=omega_rf,
        phi_rf=phi_rf,
        drive_curvature=wx * wx if drive_curvature is None else drive_curvature,
        anharmonics=anharmonics if anharmonics is not None else AnharmonicSpec.zero(),
        coupling=coupling if coupling is not None else CouplingModel(),
        roi=tuple(roi),
        targets=(wx, wy, wz) if floquet_correction else None,
        constants=constants,
    )


def _newton_radial(wx: float, wy: float, cz: float, omega_rf: float,
                   rf_amplitude: float, astig: float) -> tuple:
    """Newton iteration on (W, astigmatism) for the radial Floquet targets."""

    def residual(amp, d):
        fx = mathieu_secular_frequency(-0.5 * cz + d, +1, amp, omega_rf)
        fy = mathieu_secular_frequency(-0.5 * cz - d, -1, amp, omega_rf)
        return np.array([fx - wx, fy - wy])

    scale = max(wx, wy)
    params = np.array([rf_amplitude, astig])
    for _ in range(25):
        r0 = residual(*params)
        if np.max(np.abs(r0)) < 1e-9 * scale:
            return float(params[0]), float(params[1])
        jac = np.empty((2, 2))
        for col, step in enumerate((1e-7 * params[0], 1e-7 * cz + 1e-3 * abs(params[1]))):
            probe = params.copy()
            probe[col] += step
            jac[:, col] = (residual(*probe) - r0) / step
        try:
            delta = np.linalg.solve(jac, -r0)
        except np.linalg.LinAlgError as exc:
            raise CalibrationError("radial calibration is singular") from exc
        params = params + delta
        if params[0] <= 0:
            raise CalibrationError("radial calibration requires negative rf curvature")
    raise CalibrationError("radial calibration did not converge")


def load_axis_coefficients(path) -> dict:
    """Read a per-axis potential coefficient table.

    Plain-text format, '#' comments allowed; one row per axis:

        axis  c2  c3  c4  c5  c6

    Coefficients are those of the potential-per-mass polynomial
    sum_i C_i s^i in SI units; the harmonic acceleration curvature of an
    axis is 2 c2.  Returns {"x": (c2..c6), ...}.
    """
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6 or parts[0].lower() not in AXES:
                raise ValueError(f"{path}:{lineno}: expected 'axis c2 c3 c4 c5 c6'")
            table[parts[0].lower()] = tuple(float(p) for p in parts[1:])
    missing = [ax for ax in AXES if ax not in table]
    if missing:
        raise ValueError(f"{path}: missing axis rows: {missing}")
    return table


def model_from_coefficients(path, omega_rf: float, *, phi_rf: float = 0.0,
                            drive_curvature: float = 0.0,
                            coupling: CouplingModel | None = None,
                            rf_amplitude: float = 0.0, roi=ROI_DEFAULT,
                            constants: PhysicalConstants = CODATA) -> FieldModel:
    """Build a FieldModel from an externally produced coefficient file."""
    table = load_axis_coefficients(path)
    dc = tuple(2.0 * table[ax][0] for ax in AXES)
    anh = AnharmonicSpec(tuple(tuple(table[ax][1:]) for ax in AXES))
    return FieldModel(
        dc_curvatures=dc,
        rf_amplitude=rf_amplitude,
        omega_rf=omega_rf,
        phi_rf=phi_rf,
        drive_curvature=drive_curvature,
        anharmonics=anh,
        coupling=coupling if coupling is not None else CouplingModel(),
        roi=tuple(roi),
        targets=None,
        constants=constants,
    )
