"""Power spectral density estimation, SNR extraction, and burst statistics.

PSDs are one-sided periodograms with a rectangular window (no tapering, so
the Johnson floor calibrates directly against 4 k_B T R without coherent-gain
corrections).  Normalization satisfies Parseval: sum(psd) * bin_width equals
the mean-square of the record.

The detection statistic at the resonance bin follows the non-central
chi-squared family: the bin power is P = (V_s + V_n)^2 with
V_n ~ N(0, 4 k_B T R), one degree of freedom, non-centrality
V_s^2 / (4 k_B T R).  Individual records therefore show power "bursts" even
at healthy mean SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _stats

from .core import ResonatorParams


@dataclass
class SpectrumResult:
    """One-sided voltage PSD with bin metadata."""

    frequencies: np.ndarray
    psd: np.ndarray
    bin_width: float
    window: str
    record_length: float
    sample_rate: float

    def bin_index(self, frequency: float) -> int:
        """Index of the bin containing ``frequency``."""
        idx = int(round(frequency / self.bin_width))
        if not 0 <= idx < self.frequencies.size:
            raise ValueError(f"frequency {frequency} outside the spectrum")
        return idx

    def value_at(self, frequency: float) -> float:
        return float(self.psd[self.bin_index(frequency)])

    def mean_square(self) -> float:
        return float(np.sum(self.psd) * self.bin_width)


def psd(series: np.ndarray, sample_rate: float, *, t=None,
        window: str = "rectangular") -> SpectrumResult:
    """One-sided periodogram of a uniformly sampled record.

    ``t`` may be passed to assert uniform sampling.  Records shorter than
    2^10 samples are refused; detection statistics need the resolution.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise ValueError("series must be one-dimensional")
    n = series.size
    if n < 1 << 10:
        raise ValueError("record too short: need at least 1024 samples")
    if t is not None:
        dt = np.diff(np.asarray(t, dtype=float))
        if dt.size and (dt.max() - dt.min()) > 1e-9 * dt.mean():
            raise ValueError("non-uniform sampling")
    if window == "rectangular":
        tapered = series
    elif window == "hann":
        taper = np.hanning(n)
        # normalize to preserve noise power
        tapered = series * taper / math.sqrt(np.mean(taper**2))
    else:
        raise ValueError(f"unknown window {window!r}")

    spec = np.fft.rfft(tapered)
    scale = 1.0 / (sample_rate * n)
    p = scale * np.abs(spec) ** 2
    p[1:] *= 2.0
    if n % 2 == 0:
        p[-1] /= 2.0
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    return SpectrumResult(
        frequencies=freqs,
        psd=p,
        bin_width=sample_rate / n,
        window=window,
        record_length=n / sample_rate,
        sample_rate=sample_rate,
    )


def amplitude_at(spectrum: SpectrumResult, frequency: float) -> float:
    """Equivalent sinusoid amplitude sqrt(2 P df) of a single bin."""
    return math.sqrt(2.0 * spectrum.value_at(frequency) * spectrum.bin_width)


def snr(mean_psd_at_resonance: float, resonator: ResonatorParams) -> float | None:
    """SNR = 10 log10[(P - 4 k_B T R) / (4 k_B T R)] in dB.

    Returns ``None`` (signal absent) when the mean power does not exceed the
    thermal floor; that is a legitimate statistical outcome, not an error.
    """
    if mean_psd_at_resonance < 0:
        raise ValueError("mean PSD must be non-negative")
    floor = resonator.johnson_floor()
    if mean_psd_at_resonance <= floor:
        return None
    return 10.0 * math.log10((mean_psd_at_resonance - floor) / floor)


@dataclass
class EnsembleSpectrumStats:
    """Per-bin mean/std over an ensemble plus the resonance-bin samples."""

    frequencies: np.ndarray
    mean_psd: np.ndarray
    std_psd: np.ndarray
    resonance_bin: int
    resonance_powers: np.ndarray
    trajectory_count: int

    @property
    def resonance_mean(self) -> float:
        return float(self.mean_psd[self.resonance_bin])


def ensemble_stats(spectra: list[SpectrumResult],
                   resonance_frequency: float = 200e6) -> EnsembleSpectrumStats:
    if not spectra:
        raise ValueError("need at least one spectrum")
    ref = spectra[0]
    if any(s.psd.size != ref.psd.size or s.bin_width != ref.bin_width for s in spectra):
        raise ValueError("spectra are not on a common grid")
    grid = np.stack([s.psd for s in spectra])
    idx = ref.bin_index(resonance_frequency)
    std = grid.std(axis=0, ddof=1) if len(spectra) > 1 else np.zeros_like(ref.psd)
    return EnsembleSpectrumStats(
        frequencies=ref.frequencies,
        mean_psd=grid.mean(axis=0),
        std_psd=std,
        resonance_bin=idx,
        resonance_powers=grid[:, idx].copy(),
        trajectory_count=len(spectra),
    )


@dataclass
class SnrCurve:
    detection_times: np.ndarray
    snr_db: list            # entries are float dB or None (signal absent)
    signal_power: np.ndarray
    mean_power: np.ndarray
    noise_floor: float
    theory_times: np.ndarray
    theory_snr_db: np.ndarray


def snr_vs_time(records: list[np.ndarray], sample_rate: float,
                detection_times, resonator: ResonatorParams,
                resonance_frequency: float = 200e6) -> SnrCurve:
    """Truncate the ensemble records to each detection time and extract SNR.

    Also emits the theoretical line obtained by anchoring the signal power at
    the longest detection time and scaling it linearly with time.
    """
    detection_times = np.asarray(sorted(detection_times), dtype=float)
    n_total = records[0].size
    floor = resonator.johnson_floor()
    mean_power = np.empty(detection_times.size)
    for i, t_det in enumerate(detection_times):
        n = int(round(t_det * sample_rate))
        if n > n_total:
            raise ValueError(f"detection time {t_det} exceeds the record length")
        powers = []
        for rec in records:
            spectrum = psd(rec[:n], sample_rate)
            powers.append(spectrum.value_at(resonance_frequency))
        mean_power[i] = float(np.mean(powers))
    signal_power = mean_power - floor
    snr_db = [snr(p, resonator) for p in mean_power]

    anchor = signal_power[-1]
    t_max = detection_times[-1]
    theory_times = np.linspace(detection_times[0], t_max, 64)
    with np.errstate(divide="ignore", invalid="ignore"):
        theory = 10.0 * np.log10(np.maximum(anchor * theory_times / t_max, 0.0) / floor)
    return SnrCurve(detection_times, snr_db, signal_power, mean_power, floor,
                    theory_times, theory)


@dataclass
class BurstStats:
    """Samples and density of the resonance-bin power statistic."""

    samples: np.ndarray
    scale: float            # 4 k_B T R
    noncentrality: float    # V_s^2 / scale

    def pdf(self, power):
        """Density of P = (V_s + V_n)^2 evaluated at ``power`` (V^2/Hz)."""
        power = np.asarray(power, dtype=float)
        return _stats.ncx2.pdf(power / self.scale, df=1, nc=self.noncentrality) / self.scale

    def cdf(self, power):
        power = np.asarray(power, dtype=float)
        return _stats.ncx2.cdf(power / self.scale, df=1, nc=self.noncentrality)

    def theoretical_mean(self) -> float:
        return self.scale * (1.0 + self.noncentrality)


def noncentral_power_stats(signal_amplitude_density: float,
                           resonator: ResonatorParams, n_samples: int,
                           stream: np.random.Generator) -> BurstStats:
    """Draw resonance-bin powers P = (V_s + V_n)^2, V_n ~ N(0, 4 k_B T R).

    ``signal_amplitude_density`` is V_s in V/sqrt(Hz).  Consecutive samples
    model independent time points of the bin power (the burst time series).
    """
    if signal_amplitude_density < 0:
        raise ValueError("signal amplitude density must be non-negative")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    scale = resonator.johnson_floor()
    noise = stream.normal(0.0, math.sqrt(scale), size=n_samples)
    samples = (signal_amplitude_density + noise) ** 2
    return BurstStats(samples, scale, signal_amplitude_density**2 / scale)


def ks_against_noncentral(powers: np.ndarray, resonator: ResonatorParams,
                          noncentrality: float | None = None) -> tuple[float, float]:
    """Kolmogorov-Smirnov test of bin powers against the burst model.

    When ``noncentrality`` is None it is matched from the sample mean,
    nc = max(mean/scale - 1, 0).  Returns (statistic, p_value).
    """
    powers = np.asarray(powers, dtype=float)
    scale = resonator.johnson_floor()
    if noncentrality is None:
        noncentrality = max(float(powers.mean()) / scale - 1.0, 0.0)
    result = _stats.kstest(powers / scale, _stats.ncx2(df=1, nc=noncentrality).cdf)
    return float(result.statistic), float(result.pvalue)
