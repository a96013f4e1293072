"""Experiment orchestration and the ``paratrap`` command-line interface.

Subcommands:

* ``validate``  -- schema/physics checks of a configuration file.
* ``run``       -- execute one experiment from a config, preset or manifest.
* ``list-presets``

Every run writes a ``manifest.json`` (resolved configuration, seed plan,
metrics, artifact list) next to its outputs; re-running from the manifest
reproduces all artifacts bit-identically, and the worker count never changes
numerical results, only wall-clock time.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import apply_key_overrides, build_setup, load_config, validate_config
from .core import TWO_PI
from .dynamics import (
    InitCondition,
    IntegrationError,
    Oscillator1D,
    TrapEscapeError,
    detuning_scan,
    integrate_1d,
    integrate_3d,
)
from .noise import STREAMS_PER_TRAJECTORY, NoiseStreams, RngStream, init_stream
from .slowflow import (
    SlowFlowParams,
    attracting_points,
    evolve_ensemble,
    fixed_points,
    portrait_grid,
    thermal_slow_states,
)
from .spectral import (
    amplitude_at,
    ensemble_stats,
    ks_against_noncentral,
    noncentral_power_stats,
    psd,
    snr,
    snr_vs_time,
)
from .trajio import write_columns, write_matrix_csv, write_trajectory

OUT_ROOT_ENV = "PARATRAP_OUT_ROOT"

EXPERIMENT_KINDS = (
    "slowflow_portrait",
    "slowflow_ensemble",
    "sim_1d",
    "sim_3d",
    "detuning_scan",
    "noisy_ensemble",
    "snr_curve",
    "burst_stats",
)

EXPERIMENT_DEFAULTS = {
    "slowflow_portrait": {"extent_um": 120.0, "points": 1001, "epsilon": None},
    "slowflow_ensemble": {"n_states": 1000, "t_end_us": 20.0, "temperature_k": 4.0},
    "sim_1d": {"x0_um": None, "v0": 0.0, "t_end_us": 5.0, "gamma_per_s": 0.0,
               "csv_rows": 2000},
    "sim_3d": {"phi_x_rad": [0.0, math.pi / 2], "protocols": ["ramp", "step"],
               "t_end_us": 20.0, "temperature_k": 4.0, "store": "full"},
    "detuning_scan": {"omega_x_mhz": [196.0, 198.0, 200.0, 202.0, 204.0],
                      "phi_x_rad": [0.0, math.pi / 4, math.pi / 2],
                      "t_end_us": 20.0, "temperature_k": 4.0},
    "noisy_ensemble": {"n_trajectories": 20, "t_end_ms": 0.2,
                       "temperature_k": 4.0, "band_mhz": [190.0, 210.0]},
    "snr_curve": {"n_trajectories": 20, "t_end_ms": 0.2, "temperature_k": 4.0,
                  "detection_times_ms": [0.04, 0.08, 0.12, 0.16, 0.2],
                  "band_mhz": [190.0, 210.0]},
    "burst_stats": {"snr_db_values": [0.0, 3.0], "n_samples": 1_000_000,
                    "series_points": 200},
}

# The paper-scale parameter sets are encoded verbatim in the full presets;
# the desk variants cut trajectory counts and durations for CI.
PRESETS = {
    "fig1-portrait": {"experiment": {"kind": "slowflow_portrait"}},
    "fig1-ensemble": {"experiment": {"kind": "slowflow_ensemble", "n_states": 10000}},
    "fig1-ensemble-desk": {"experiment": {"kind": "slowflow_ensemble", "n_states": 1000}},
    "fig2-locking": {"experiment": {"kind": "sim_3d"}},
    "fig3-detuning": {"experiment": {
        "kind": "detuning_scan",
        "omega_x_mhz": [190.0, 192.0, 194.0, 196.0, 198.0, 200.0,
                        202.0, 204.0, 206.0, 208.0, 210.0],
        "phi_x_rad": [0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi],
    }},
    "fig3-detuning-desk": {"experiment": {"kind": "detuning_scan"}},
    "fig4-snr": {"experiment": {
        "kind": "snr_curve", "n_trajectories": 200, "t_end_ms": 1.0,
        "detection_times_ms": [0.2, 0.4, 0.6, 0.8, 1.0],
    }},
    "fig4-snr-desk": {"experiment": {"kind": "snr_curve"}},
    "burst-stats": {"experiment": {"kind": "burst_stats"}},
}


def seed_plan(base_seed: int, count: int) -> list:
    """Per-trajectory (seed, stream) table; streams never collide.

    Each trajectory owns a block of stream ids: surface, johnson, rf walk
    and initial-condition draws.  The same base seed always yields the same
    table; different base seeds yield disjoint (seed, stream) key sets.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rows = []
    for i in range(count):
        base = i * STREAMS_PER_TRAJECTORY
        rows.append({
            "trajectory": i,
            "seed": int(base_seed),
            "streams": {
                "surface": base + 0,
                "johnson": base + 1,
                "rf_walk": base + 2,
                "init": base + 3,
            },
        })
    return rows


@dataclass
class RunManifest:
    experiment: str
    config: dict
    seed: int
    workers: int
    seed_plan: list
    package_version: str
    metrics: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def write(self, path: Path):
        payload = {
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "workers": self.workers,
            "seed_plan": self.seed_plan,
            "package_version": self.package_version,
            "metrics": self.metrics,
            "artifacts": self.artifacts,
            "failures": self.failures,
        }
        path.write_text(json.dumps(_jsonify(payload), sort_keys=True, indent=2))


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


def _write_summary(out: Path, summary: dict) -> str:
    path = out / "summary.json"
    path.write_text(json.dumps(_jsonify(summary), sort_keys=True, indent=2))
    return path.name


def _spectrum_csv(path: Path, spectrum, band=None):
    sel = slice(None)
    if band is not None:
        lo, hi = band
        sel = (spectrum.frequencies >= lo) & (spectrum.frequencies <= hi)
    write_matrix_csv(path, ["frequency_Hz", "psd_V2_per_Hz"],
                     zip(spectrum.frequencies[sel], spectrum.psd[sel]))
    return path.name


# -- experiment runners -------------------------------------------------------


def _run_slowflow_portrait(setup, exp, out, workers):
    params = SlowFlowParams.from_trap(setup.trap, setup.schedule,
                                      gamma=setup.slowflow_gamma)
    epsilon = exp["epsilon"]
    if epsilon is None:
        epsilon = setup.schedule.epsilon_max
    extent = 1e-6 * exp["extent_um"]
    n = int(exp["points"])
    axis, x, y, dx, dy = portrait_grid(params, epsilon, extent, n)
    artifacts = []
    write_columns(out / "portrait.cols", ("x", "y", "dxdt", "dydt"),
                  [x.ravel(), y.ravel(), dx.ravel(), dy.ravel()],
                  sample_rate=1.0,
                  meta={"grid_points": n, "extent_m": extent, "epsilon": epsilon})
    artifacts.append("portrait.cols")
    points = fixed_points(params, epsilon)
    write_matrix_csv(out / "fixed_points.csv",
                     ["amplitude_m", "phase_rad", "kind"],
                     [(p.amplitude, p.phase, p.kind) for p in points])
    artifacts.append("fixed_points.csv")
    attractors = attracting_points(params, epsilon)
    summary = {
        "epsilon": epsilon,
        "grid_points": n,
        "extent_m": extent,
        "fixed_points": [{"amplitude_m": p.amplitude, "phase_rad": p.phase,
                          "kind": p.kind} for p in points],
        "attractor_amplitude_m": attractors[0].amplitude if attractors else None,
    }
    artifacts.append(_write_summary(out, summary))
    return summary, artifacts, [], {}


def _run_slowflow_ensemble(setup, exp, out, workers):
    params = SlowFlowParams.from_trap(setup.trap, setup.schedule,
                                      gamma=setup.slowflow_gamma)
    n = int(exp["n_states"])
    rng = init_stream(setup.seed, 0)
    states = thermal_slow_states(n, exp["temperature_k"], setup.trap.omega_x,
                                 setup.schedule.omega_d, rng)
    t_end = 1e-6 * exp["t_end_us"]
    result = evolve_ensemble(states, params, t_end)
    result.to_csv(out / "ensemble.csv")
    artifacts = ["ensemble.csv"]
    attractors = attracting_points(params, setup.schedule.epsilon_max)
    a_star = attractors[0].amplitude if attractors else float("nan")
    locked = [r for r in result.records if r.ok and abs(r.mean_x) > 0.5 * a_star]
    summary = {
        "n_states": n,
        "t_end_s": t_end,
        "window_s": list(result.window),
        "cluster_positive_m": result.cluster_positive,
        "cluster_negative_m": result.cluster_negative,
        "attractor_amplitude_m": a_star,
        "locked_fraction": len(locked) / n if n else 0.0,
        "failures": result.failure_count,
    }
    artifacts.append(_write_summary(out, summary))
    failures = [{"trajectory": r.index, "reason": "integration failure"}
                for r in result.records if not r.ok]
    return summary, artifacts, failures, {}


def _run_sim_1d(setup, exp, out, workers):
    trap = setup.trap
    osc = Oscillator1D.from_trap(trap, gamma=exp["gamma_per_s"])
    if exp["x0_um"] is None:
        x0 = math.sqrt(setup.constants.boltzmann * 4.0
                       / setup.constants.electron_mass) / trap.omega_x
    else:
        x0 = 1e-6 * exp["x0_um"]
    t_end = 1e-6 * exp["t_end_us"]
    traj = integrate_1d(x0, exp["v0"], osc, setup.schedule, t_end,
                        setup.ode_settings, sample_rate=setup.sample_rate)
    artifacts = []
    write_trajectory(out / "trajectory.cols", traj, meta={"seed": setup.seed})
    artifacts.append("trajectory.cols")
    from .trajio import trajectory_to_csv
    trajectory_to_csv(out / "trajectory.csv", traj, max_rows=int(exp["csv_rows"]))
    artifacts.append("trajectory.csv")
    spectrum = psd(traj.record("x"), setup.sample_rate)
    artifacts.append(_spectrum_csv(out / "spectrum_x.csv", spectrum))
    f_half = setup.schedule.omega_d / (2 * TWO_PI)
    summary = {
        "t_end_s": t_end,
        "x0_m": x0,
        "steps_accepted": traj.stats.steps_accepted,
        "steps_rejected": traj.stats.steps_rejected,
        "amplitude_at_half_drive_m": amplitude_at(spectrum, f_half),
    }
    artifacts.append(_write_summary(out, summary))
    return summary, artifacts, [], {"steps_accepted": traj.stats.steps_accepted}


def _run_sim_3d(setup, exp, out, workers):
    t_end = 1e-6 * exp["t_end_us"]
    artifacts = []
    failures = []
    variants = {}
    metrics = {}
    f_half = setup.schedule.omega_d / (2 * TWO_PI)
    for protocol in exp["protocols"]:
        schedule = setup.schedule if protocol == "ramp" else setup.schedule.stepped()
        for j, phi_x in enumerate(exp["phi_x_rad"]):
            tag = f"{protocol}_phi{j}"
            init = InitCondition(temperature=exp["temperature_k"], phi_x=phi_x)
            try:
                traj = integrate_3d(init, setup.fieldmodel, setup.resonator,
                                    schedule, t_end, setup.ode_settings,
                                    sample_rate=setup.sample_rate,
                                    store=exp["store"])
            except (TrapEscapeError, IntegrationError) as exc:
                failures.append({"variant": tag, "reason": str(exc)})
                continue
            write_trajectory(out / f"trajectory_{tag}.cols", traj,
                             meta={"seed": setup.seed, "protocol": protocol,
                                   "phi_x_rad": phi_x})
            artifacts.append(f"trajectory_{tag}.cols")
            spec_x = psd(traj.record("x"), setup.sample_rate)
            spec_v = psd(traj.record("V"), setup.sample_rate)
            artifacts.append(_spectrum_csv(out / f"spectrum_x_{tag}.csv", spec_x))
            artifacts.append(_spectrum_csv(out / f"spectrum_v_{tag}.csv", spec_v))
            variants[tag] = {
                "protocol": protocol,
                "phi_x_rad": phi_x,
                "x_amplitude_at_half_drive_m": amplitude_at(spec_x, f_half),
                "voltage_amplitude_at_half_drive_V": amplitude_at(spec_v, f_half),
            }
            metrics[f"steps_{tag}"] = traj.stats.steps_accepted
    summary = {"t_end_s": t_end, "variants": variants}
    artifacts.append(_write_summary(out, summary))
    return summary, artifacts, failures, metrics


def _run_detuning_scan(setup, exp, out, workers):
    trap = setup.trap
    omega_x_values = [TWO_PI * 1e6 * v for v in exp["omega_x_mhz"]]
    result = detuning_scan(
        omega_x_values, exp["phi_x_rad"], setup.resonator, setup.schedule,
        omega_y=trap.omega_y, omega_z=trap.omega_z, omega_rf=trap.omega_rf,
        anharmonics=setup.fieldmodel.anharmonics,
        t_end=1e-6 * exp["t_end_us"], settings=setup.ode_settings,
        sample_rate=setup.sample_rate, temperature=exp["temperature_k"],
        detect_frequency=setup.schedule.omega_d / (2 * TWO_PI),
    )
    write_matrix_csv(out / "detuning.csv",
                     ["omega_x_rad_s", "phi_x_rad", "voltage_amplitude_V"],
                     result.rows())
    artifacts = ["detuning.csv"]
    amps = result.voltage_amplitude
    i_res = int(np.argmin(np.abs(result.omega_x_values - setup.schedule.omega_d / 2)))
    summary = {
        "detect_frequency_hz": result.detect_frequency,
        "omega_x_rad_s": list(result.omega_x_values),
        "phi_x_rad": list(result.phi_x_values),
        "voltage_amplitude_V": [list(row) for row in amps],
        "on_resonance_row": i_res,
        "min_over_max_ratio": float(amps.min() / amps.max()) if amps.size else None,
    }
    artifacts.append(_write_summary(out, summary))
    return summary, artifacts, [], {}


def _noisy_trajectory(setup, exp, index):
    """One stochastic trajectory; returns (index, voltage record or None, reason)."""
    streams = NoiseStreams.for_trajectory(setup.seed, index)
    rng = init_stream(setup.seed, index)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=3)
    init = InitCondition(temperature=exp["temperature_k"], phi_x=phases[0],
                         phi_y=phases[1], phi_z=phases[2])
    try:
        traj = integrate_3d(init, setup.fieldmodel, setup.resonator,
                            setup.schedule, 1e-3 * exp["t_end_ms"],
                            setup.sde_settings, sample_rate=setup.sample_rate,
                            store="voltage", noise=setup.noise, streams=streams)
    except TrapEscapeError as exc:
        return index, None, f"escape at t={exc.event.time:.3e} s"
    except IntegrationError as exc:
        return index, None, str(exc)
    return index, traj.record("V"), None


def _noisy_worker(payload):
    cfg, index = payload
    setup = build_setup(cfg)
    exp = _merged_experiment(cfg)
    return _noisy_trajectory(setup, exp, index)


def _collect_noisy_records(setup, exp, cfg, workers):
    n = int(exp["n_trajectories"])
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, record, reason in pool.map(
                    _noisy_worker, [(cfg, i) for i in range(n)]):
                results[index] = (record, reason)
    else:
        for i in range(n):
            index, record, reason = _noisy_trajectory(setup, exp, i)
            results[index] = (record, reason)
    records = []
    failures = []
    for i in range(n):
        record, reason = results[i]
        if record is None:
            failures.append({"trajectory": i, "reason": reason})
        else:
            records.append((i, record))
    return records, failures


def _write_noisy_outputs(setup, exp, out, records):
    artifacts = []
    for i, record in records:
        name = f"voltage_{i:04d}.cols"
        write_columns(out / name, ("V",), [record], setup.sample_rate,
                      t0=1.0 / setup.sample_rate,
                      meta={"seed": setup.seed, "trajectory": i})
        artifacts.append(name)
    spectra = [psd(rec, setup.sample_rate) for _, rec in records]
    f_res = setup.resonator.omega_res / TWO_PI
    stats = ensemble_stats(spectra, f_res)
    band = [1e6 * b for b in exp["band_mhz"]]
    sel = (stats.frequencies >= band[0]) & (stats.frequencies <= band[1])
    write_matrix_csv(out / "ensemble_spectrum.csv",
                     ["frequency_Hz", "mean_psd_V2_per_Hz", "std_psd_V2_per_Hz"],
                     zip(stats.frequencies[sel], stats.mean_psd[sel],
                         stats.std_psd[sel]))
    artifacts.append("ensemble_spectrum.csv")
    write_matrix_csv(out / "resonance_powers.csv",
                     ["trajectory", "psd_V2_per_Hz"],
                     [(i, p) for (i, _), p in zip(records, stats.resonance_powers)])
    artifacts.append("resonance_powers.csv")
    return artifacts, stats


def _run_noisy_ensemble(setup, exp, out, workers, cfg):
    records, failures = _collect_noisy_records(setup, exp, cfg, workers)
    if not records:
        raise RuntimeError("every trajectory failed")
    artifacts, stats = _write_noisy_outputs(setup, exp, out, records)
    snr_db = snr(stats.resonance_mean, setup.resonator)
    ks_stat, ks_p = ks_against_noncentral(stats.resonance_powers, setup.resonator)
    summary = {
        "n_trajectories": int(exp["n_trajectories"]),
        "t_end_s": 1e-3 * exp["t_end_ms"],
        "resonance_mean_psd_V2_per_Hz": stats.resonance_mean,
        "noise_floor_V2_per_Hz": setup.resonator.johnson_floor(),
        "snr_db": snr_db,
        "ks_statistic": ks_stat,
        "ks_pvalue": ks_p,
        "failed_trajectories": len(failures),
    }
    artifacts.append(_write_summary(out, summary))
    return summary, artifacts, failures, {}


def _run_snr_curve(setup, exp, out, workers, cfg):
    records, failures = _collect_noisy_records(setup, exp, cfg, workers)
    if not records:
        raise RuntimeError("every trajectory failed")
    artifacts, stats = _write_noisy_outputs(setup, exp, out, records)
    times = [1e-3 * t for t in exp["detection_times_ms"]]
    curve = snr_vs_time([rec for _, rec in records], setup.sample_rate, times,
                        setup.resonator,
                        resonance_frequency=setup.resonator.omega_res / TWO_PI)
    write_matrix_csv(out / "snr_curve.csv",
                     ["detection_time_s", "snr_db", "signal_power_V2_per_Hz",
                      "mean_power_V2_per_Hz"],
                     [(t, "" if s is None else s, sp, mp)
                      for t, s, sp, mp in zip(curve.detection_times, curve.snr_db,
                                              curve.signal_power, curve.mean_power)])
    artifacts.append("snr_curve.csv")
    write_matrix_csv(out / "snr_theory.csv", ["detection_time_s", "snr_db"],
                     zip(curve.theory_times, curve.theory_snr_db))
    artifacts.append("snr_theory.csv")
    summary = {
        "detection_times_s": list(curve.detection_times),
        "snr_db": ["signal-absent" if s is None else s for s in curve.snr_db],
        "signal_power_V2_per_Hz": list(curve.signal_power),
        "noise_floor_V2_per_Hz": curve.noise_floor,
        "failed_trajectories": len(failures),
    }
    artifacts.append(_write_summary(out, summary))
    return summary, artifacts, failures, {}


def _run_burst_stats(setup, exp, out, workers):
    resonator = setup.resonator
    floor = resonator.johnson_floor()
    stream = RngStream(setup.seed, 0).generator()
    artifacts = []
    cases = {}
    for snr_db in exp["snr_db_values"]:
        vs = math.sqrt(floor * 10.0 ** (snr_db / 10.0))
        stats = noncentral_power_stats(vs, resonator, int(exp["n_samples"]), stream)
        tag = f"snr{snr_db:g}"
        write_columns(out / f"burst_samples_{tag}.cols", ("power",),
                      [stats.samples], sample_rate=1.0,
                      meta={"snr_db": snr_db, "scale": stats.scale,
                            "noncentrality": stats.noncentrality})
        artifacts.append(f"burst_samples_{tag}.cols")
        grid = np.linspace(0.0, float(stats.samples.mean() + 6 * stats.samples.std()),
                           512)[1:]
        write_matrix_csv(out / f"burst_pdf_{tag}.csv",
                         ["power_V2_per_Hz", "pdf"], zip(grid, stats.pdf(grid)))
        artifacts.append(f"burst_pdf_{tag}.csv")
        series = stats.samples[: int(exp["series_points"])]
        write_matrix_csv(out / f"burst_series_{tag}.csv",
                         ["sample", "power_V2_per_Hz"], enumerate(series))
        artifacts.append(f"burst_series_{tag}.csv")
        cases[tag] = {
            "snr_db": snr_db,
            "signal_amplitude_density": vs,
            "sample_mean": float(stats.samples.mean()),
            "theoretical_mean": stats.theoretical_mean(),
            "fraction_below_floor_mean": float(np.mean(stats.samples < floor)),
        }
    summary = {"noise_floor_V2_per_Hz": floor, "cases": cases}
    artifacts.append(_write_summary(out, summary))
    return summary, artifacts, [], {}


def _merged_experiment(cfg: dict) -> dict:
    exp = dict(cfg.get("experiment", {}))
    kind = exp.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ValueError(
            f"unknown experiment kind {kind!r}; allowed kinds: "
            + ", ".join(EXPERIMENT_KINDS)
        )
    merged = dict(EXPERIMENT_DEFAULTS[kind])
    merged.update(exp)
    return merged


def run_experiment(cfg: dict, out_dir, workers: int = 1) -> RunManifest:
    """Execute the experiment named in ``cfg['experiment']['kind']``.

    Returns the manifest (also written to ``out_dir/manifest.json``).
    Composes the other modules; all artifacts land in ``out_dir``.
    """
    exp = _merged_experiment(cfg)
    kind = cfg["experiment"]["kind"]
    setup = build_setup(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ensemble_kinds = {"noisy_ensemble": None, "snr_curve": None}
    plan = []
    if kind in ensemble_kinds:
        plan = seed_plan(setup.seed, int(exp["n_trajectories"]))
    elif kind == "slowflow_ensemble":
        plan = seed_plan(setup.seed, 1)

    t0 = time.perf_counter()
    if kind == "slowflow_portrait":
        summary, artifacts, failures, metrics = _run_slowflow_portrait(setup, exp, out, workers)
    elif kind == "slowflow_ensemble":
        summary, artifacts, failures, metrics = _run_slowflow_ensemble(setup, exp, out, workers)
    elif kind == "sim_1d":
        summary, artifacts, failures, metrics = _run_sim_1d(setup, exp, out, workers)
    elif kind == "sim_3d":
        summary, artifacts, failures, metrics = _run_sim_3d(setup, exp, out, workers)
    elif kind == "detuning_scan":
        summary, artifacts, failures, metrics = _run_detuning_scan(setup, exp, out, workers)
    elif kind == "noisy_ensemble":
        summary, artifacts, failures, metrics = _run_noisy_ensemble(setup, exp, out, workers, cfg)
    elif kind == "snr_curve":
        summary, artifacts, failures, metrics = _run_snr_curve(setup, exp, out, workers, cfg)
    else:
        summary, artifacts, failures, metrics = _run_burst_stats(setup, exp, out, workers)
    metrics = dict(metrics)
    metrics["wall_time_s"] = time.perf_counter() - t0

    manifest = RunManifest(
        experiment=kind,
        config=cfg,
        seed=setup.seed,
        workers=workers,
        seed_plan=plan,
        package_version=__version__,
        metrics=metrics,
        artifacts=sorted(artifacts),
        failures=failures,
    )
    manifest.write(out / "manifest.json")
    return manifest


# -- command line -------------------------------------------------------------


@click.group()
@click.version_option(version=__version__)
def main():
    """Parametric-drive electron detection simulations."""


@main.command("validate")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Configuration file to check.")
def validate_cmd(config_path):
    """Validate a configuration file without running anything."""
    try:
        cfg = load_config(config_path)
    except ValueError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(1)
    report = validate_config(cfg)
    for err in report.errors:
        click.echo(f"error: {err}")
    for warning in report.warnings:
        click.echo(f"warning: {warning}")
    if report.ok:
        click.echo(f"valid ({len(report.warnings)} warning(s))")
    else:
        sys.exit(1)


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Configuration file.")
@click.option("--preset", type=str, default=None,
              help="Named preset (see list-presets).")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False),
              help="Re-run an earlier experiment from its manifest.")
@click.option("--seed", type=int, default=None, help="Override the RNG base seed.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Parallel workers for ensembles (never changes results).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help=f"Output directory (default under ${OUT_ROOT_ENV} or ./paratrap-runs).")
@click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Dotted config override, e.g. drive.epsilon_max=0.05 (repeatable).")
def run_cmd(config_path, preset, manifest_path, seed, workers, out_dir, overrides):
    """Run one experiment and write its artifact set plus manifest."""
    try:
        if manifest_path:
            if preset or config_path:
                raise ValueError("--manifest excludes --config/--preset")
            manifest = json.loads(Path(manifest_path).read_text())
            cfg = manifest["config"]
        else:
            cfg = load_config(config_path)
            if preset:
                if preset not in PRESETS:
                    raise ValueError(
                        f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
                    )
                from .config import deep_merge
                cfg = deep_merge(cfg, PRESETS[preset])
        if overrides:
            cfg = apply_key_overrides(cfg, overrides)
        if seed is not None:
            cfg["seed"] = seed
        report = validate_config(cfg)
        if not report.ok:
            for err in report.errors:
                click.echo(f"error: {err}", err=True)
            sys.exit(1)
        for warning in report.warnings:
            click.echo(f"warning: {warning}", err=True)

        kind = cfg.get("experiment", {}).get("kind")
        if kind not in EXPERIMENT_KINDS:
            raise ValueError(
                f"unknown experiment kind {kind!r}; allowed kinds: "
                + ", ".join(EXPERIMENT_KINDS)
            )
        if out_dir is None:
            root = Path(os.environ.get(OUT_ROOT_ENV, "paratrap-runs"))
            out_dir = root / f"{kind}-seed{cfg['seed']}"
        manifest = run_experiment(cfg, out_dir, workers=workers)
    except (ValueError, RuntimeError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    click.echo(f"experiment: {manifest.experiment}")
    click.echo(f"output:     {out_dir}")
    for artifact in manifest.artifacts:
        click.echo(f"artifact:   {artifact}")
    if manifest.failures:
        click.echo(f"partial: {len(manifest.failures)} trajectory failure(s)", err=True)
        for failure in manifest.failures:
            click.echo(f"  {failure}", err=True)
        sys.exit(2)


@main.command("list-presets")
def list_presets_cmd():
    """Show the named experiment presets."""
    for name in sorted(PRESETS):
        kind = PRESETS[name]["experiment"]["kind"]
        click.echo(f"{name:24s} {kind}")


if __name__ == "__main__":
    main()
