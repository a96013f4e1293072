"""Configuration ingestion: YAML with convenience units, validated to SI objects.

Configuration files are nested key-value sections (YAML).  Quantities carry
their unit in the key name (``omega_x_mhz``, ``d_eff_mm``, ``ramp_us``) and
are converted to strict SI when the parameter objects are built.  The
``unit_convention`` flag selects how the anharmonic shift coefficients quoted
in "kHz" are read: ``hz`` multiplies by 2 pi (default), ``rad`` takes the
number as already angular.

``validate_config`` performs the schema and physics checks without running
anything; the CLI exposes it as the ``validate`` subcommand.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import yaml

from .core import (
    TWO_PI,
    CODATA,
    DriveSchedule,
    PhysicalConstants,
    ResonatorParams,
    TrapParams,
    lambda4_si,
    lambda6_si,
)
from .dynamics import SAMPLE_RATE_DEFAULT, SDE_STEP_DEFAULT, IntegratorSettings
from .fieldmodel import AnharmonicSpec, CouplingModel, FieldModel, calibrate
from .noise import NoiseConfig

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

DEFAULT_CONFIG: dict = {
    "seed": 20260801,
    "trap": {
        "omega_x_mhz": 200.0,
        "omega_y_mhz": 173.0,
        "omega_z_mhz": 70.0,
        "omega_rf_mhz": 1452.0,
        "phi_rf_rad": 0.0,
        "d_eff_mm": 4.8,
        "dc_split": 0.5,
    },
    "anharmonics": {
        "lambda4_khz_um2": -4.08,
        "lambda6_khz_um4": 6.78e-6,
        "unit_convention": "hz",
        "axes": ["x"],
    },
    "resonator": {
        "q_factor": 1000.0,
        "z0_ohm": 300.0,
        "f_res_mhz": 200.0,
        "temperature_k": 4.0,
    },
    "drive": {
        "f_d_mhz": 400.0,
        "phi_d_rad": 0.0,
        "epsilon_max": 0.1,
        "ramp_us": 1.0,
        "start_us": 0.0,
    },
    "noise": {
        "surface": {
            "enabled": True,
            "baseline_v2_m2_hz": 1.0e-12,
            "ref_f_mhz": 1.0,
            "ref_distance_um": 100.0,
            "ref_temperature_k": 4.0,
            "electrode_distance_um": 431.8,
            "temperature_k": 4.0,
            "eval_f_mhz": 200.0,
            "axes": ["x"],
        },
        "johnson": {"enabled": True},
        "rf_walk": {"enabled": True, "sigma": 1.0e-3, "horizon_ms": 10.0},
    },
    "integrator": {
        "abstol": 1.0e-10,
        "reltol": 1.0e-10,
        "sde_abstol": 1.0e-9,
        "sde_reltol": 1.0e-9,
        "sde_step_ps": SDE_STEP_DEFAULT * 1e12,
    },
    "sampling": {"rate_gsps": SAMPLE_RATE_DEFAULT / 1e9},
    "roi": {"x_um": 150.0, "y_um": 150.0, "z_um": 25.0},
    "slowflow": {"gamma_per_s": 0.0},
    "experiment": {},
}


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, overlaid with a YAML file and programmatic overrides."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                loaded = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ValueError(f"cannot parse {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        cfg = deep_merge(cfg, loaded)
    if overrides:
        cfg = deep_merge(cfg, overrides)
    return cfg


def apply_key_overrides(cfg: dict, pairs) -> dict:
    """Apply ``section.key=value`` strings (CLI --override) onto a config."""
    out = copy.deepcopy(cfg)
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not of the form key=value")
        dotted, raw = pair.split("=", 1)
        node = out
        keys = dotted.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ValueError(f"override {pair!r}: {key} is not a section")
        node[keys[-1]] = yaml.safe_load(raw)
    return out


# -- validation ---------------------------------------------------------------


def _positive(report, value, name):
    if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        report.errors.append(f"{name} must be a positive finite number, got {value!r}")
        return False
    return True


def validate_config(cfg: dict) -> ValidationReport:
    """Schema and physics checks; never executes an experiment."""
    report = ValidationReport()
    trap = cfg.get("trap", {})
    res = cfg.get("resonator", {})
    drive = cfg.get("drive", {})
    integ = cfg.get("integrator", {})
    anh = cfg.get("anharmonics", {})

    for key in ("omega_x_mhz", "omega_y_mhz", "omega_z_mhz", "omega_rf_mhz", "d_eff_mm"):
        _positive(report, trap.get(key), f"trap.{key}")
    _positive(report, res.get("q_factor"), "resonator.q_factor")
    _positive(report, res.get("z0_ohm"), "resonator.z0_ohm")
    _positive(report, res.get("f_res_mhz"), "resonator.f_res_mhz")
    if isinstance(res.get("temperature_k"), (int, float)) and res["temperature_k"] < 0:
        report.errors.append("resonator.temperature_k must be non-negative")

    if report.errors:
        return report

    wx, wy = trap["omega_x_mhz"], trap["omega_y_mhz"]
    if trap["omega_rf_mhz"] <= 2.0 * max(wx, wy):
        report.errors.append(
            "trap.omega_rf_mhz must exceed twice the largest radial secular frequency"
        )
    if wx == wy:
        report.warnings.append(
            "trap.omega_y_mhz equals omega_x_mhz: the intentional detuning of the "
            "y mode is lost, so the y component of the parametric drive becomes "
            "resonant and can excite the y axis"
        )

    eps = drive.get("epsilon_max")
    if not isinstance(eps, (int, float)) or not 0.0 <= eps < 1.0:
        report.errors.append(f"drive.epsilon_max must lie in [0, 1), got {eps!r}")
    if drive.get("ramp_us", 0.0) < 0:
        report.errors.append("drive.ramp_us must be non-negative")

    for key in ("abstol", "reltol", "sde_abstol", "sde_reltol"):
        tol = integ.get(key)
        if not isinstance(tol, (int, float)) or not 0.0 < tol <= 1e-3:
            report.errors.append(f"integrator.{key} must lie in (0, 1e-3], got {tol!r}")

    convention = anh.get("unit_convention")
    if convention not in ("hz", "rad"):
        report.errors.append(
            f"anharmonics.unit_convention must be 'hz' or 'rad', got {convention!r}"
        )
    for ax in anh.get("axes", []):
        if ax not in AXIS_INDEX:
            report.errors.append(f"anharmonics.axes entries must be x/y/z, got {ax!r}")

    noise = cfg.get("noise", {})
    for ax in noise.get("surface", {}).get("axes", []):
        if ax not in AXIS_INDEX:
            report.errors.append(f"noise.surface.axes entries must be x/y/z, got {ax!r}")
    if noise.get("rf_walk", {}).get("horizon_ms", 10.0) <= 0:
        report.errors.append("noise.rf_walk.horizon_ms must be positive")

    rate = cfg.get("sampling", {}).get("rate_gsps")
    if _positive(report, rate, "sampling.rate_gsps"):
        nyquist_mhz = (trap["omega_rf_mhz"] + max(wx, wy)) * 2.0
        if rate * 1e3 < nyquist_mhz:
            report.errors.append(
                f"sampling.rate_gsps={rate} aliases the upper micromotion sideband; "
                f"need at least {nyquist_mhz / 1e3:.3f} GS/s"
            )
    return report


# -- object construction ------------------------------------------------------


@dataclass
class SimulationSetup:
    """All parameter objects resolved from one configuration."""

    constants: PhysicalConstants
    trap: TrapParams
    resonator: ResonatorParams
    schedule: DriveSchedule
    fieldmodel: FieldModel
    noise: NoiseConfig
    ode_settings: IntegratorSettings
    sde_settings: IntegratorSettings
    sample_rate: float
    seed: int
    slowflow_gamma: float
    config: dict


def build_setup(cfg: dict) -> SimulationSetup:
    report = validate_config(cfg)
    if not report.ok:
        raise ValueError("invalid configuration: " + "; ".join(report.errors))

    trap_cfg = cfg["trap"]
    anh_cfg = cfg["anharmonics"]
    convention = anh_cfg["unit_convention"]
    omega_x = TWO_PI * 1e6 * trap_cfg["omega_x_mhz"]
    lam4 = lambda4_si(anh_cfg["lambda4_khz_um2"], convention)
    lam6 = lambda6_si(anh_cfg["lambda6_khz_um4"], convention)
    trap = TrapParams.from_lambdas(
        lam4, lam6,
        omega_x=omega_x,
        omega_y=TWO_PI * 1e6 * trap_cfg["omega_y_mhz"],
        omega_z=TWO_PI * 1e6 * trap_cfg["omega_z_mhz"],
        omega_rf=TWO_PI * 1e6 * trap_cfg["omega_rf_mhz"],
        phi_rf=trap_cfg["phi_rf_rad"],
        d_eff=1e-3 * trap_cfg["d_eff_mm"],
    )
    res_cfg = cfg["resonator"]
    resonator = ResonatorParams(
        q_factor=res_cfg["q_factor"],
        z0=res_cfg["z0_ohm"],
        omega_res=TWO_PI * 1e6 * res_cfg["f_res_mhz"],
        temperature=res_cfg["temperature_k"],
    )
    drive_cfg = cfg["drive"]
    schedule = DriveSchedule(
        omega_d=TWO_PI * 1e6 * drive_cfg["f_d_mhz"],
        phi_d=drive_cfg["phi_d_rad"],
        epsilon_max=drive_cfg["epsilon_max"],
        ramp_duration=1e-6 * drive_cfg["ramp_us"],
        start_time=1e-6 * drive_cfg["start_us"],
    )
    roi_cfg = cfg["roi"]
    roi = (1e-6 * roi_cfg["x_um"], 1e-6 * roi_cfg["y_um"], 1e-6 * roi_cfg["z_um"])
    axes = tuple(AXIS_INDEX[a] for a in anh_cfg["axes"])
    anharmonics = AnharmonicSpec.from_lambdas(lam4, lam6, trap.omega_x, axes=axes)
    fieldmodel = calibrate(
        (trap.omega_x, trap.omega_y, trap.omega_z),
        trap.omega_rf,
        trap_cfg.get("dc_split", 0.5),
        phi_rf=trap.phi_rf,
        anharmonics=anharmonics,
        coupling=CouplingModel.constant(trap.d_eff),
        roi=roi,
    )

    noise_cfg = cfg["noise"]
    surf = noise_cfg["surface"]
    walk = noise_cfg["rf_walk"]
    noise = NoiseConfig(
        s_e_baseline=surf["baseline_v2_m2_hz"],
        ref_omega=TWO_PI * 1e6 * surf["ref_f_mhz"],
        ref_distance=1e-6 * surf["ref_distance_um"],
        ref_temperature=surf["ref_temperature_k"],
        electrode_distance=1e-6 * surf["electrode_distance_um"],
        temperature=surf["temperature_k"],
        eval_omega=TWO_PI * 1e6 * surf["eval_f_mhz"],
        surface_enabled=surf["enabled"],
        johnson_enabled=noise_cfg["johnson"]["enabled"],
        rf_walk_enabled=walk["enabled"],
        surface_axes=tuple(a in surf["axes"] for a in ("x", "y", "z")),
        rf_walk_sigma=walk["sigma"],
        rf_walk_horizon=1e-3 * walk["horizon_ms"],
        rng_seed=cfg["seed"],
    )

    integ = cfg["integrator"]
    ode_settings = IntegratorSettings(abstol=integ["abstol"], reltol=integ["reltol"])
    sde_settings = IntegratorSettings.sde(
        abstol=integ["sde_abstol"], reltol=integ["sde_reltol"],
        sde_step=1e-12 * integ["sde_step_ps"],
    )
    return SimulationSetup(
        constants=CODATA,
        trap=trap,
        resonator=resonator,
        schedule=schedule,
        fieldmodel=fieldmodel,
        noise=noise,
        ode_settings=ode_settings,
        sde_settings=sde_settings,
        sample_rate=1e9 * cfg["sampling"]["rate_gsps"],
        seed=int(cfg["seed"]),
        slowflow_gamma=cfg["slowflow"]["gamma_per_s"],
        config=cfg,
    )
