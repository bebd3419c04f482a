"""Homodyne time traces and spectrum-analyzer style power spectra.

Units: a trace is the normalised difference signal in shot-noise units, with
per-sample noise variance ``noise_variance``. Spectra are reported in dB
relative to the shot-noise power contained in one resolution bandwidth, so
an undriven trace reads 0 dB and a tone reads its signal-to-noise ratio
above that floor.

The resolution bandwidth is the equivalent noise bandwidth of the window:
the Welch segment length is chosen so that ``fs * sum(w**2) / sum(w)**2``
equals the requested RBW.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal as sps

from .detection import PhotonBudget
from .errors import AliasingError, ConfigError, FirstOrderRegimeError, InsufficientData, OutOfBand
from .hg_pointer import Deflection
from .wva_pipeline import DarkPortState, SystemConfig, dark_port_I, dark_port_II

WINDOWS = ("hann", "rectangular")
MIN_SEGMENTS = 8
#: Bins closer than this to a detected tone are excluded from the floor.
PEAK_GUARD_BINS = 3
PEAK_THRESHOLD_DB = 6.0


@dataclass(frozen=True)
class TraceConfig:
    sample_rate: float = 100e3
    duration: float = 10.0
    rbw: float = 10.0
    seed: int = 0
    window: str = "hann"

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ConfigError("must be positive", "sample_rate")
        if not self.rbw > 0:
            raise ConfigError("must be positive", "rbw")
        if self.duration < 4 / self.rbw:
            raise ConfigError(f"must be at least 4/rbw = {4 / self.rbw:g} s", "duration")
        if self.window not in WINDOWS:
            raise ConfigError(f"must be one of {WINDOWS}", "window")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("must be a 64-bit unsigned integer", "seed")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.duration))


@dataclass
class TimeTrace:
    samples: np.ndarray
    sample_rate: float
    noise_variance: float = 1.0

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class PowerSpectrum:
    freqs: np.ndarray
    psd: np.ndarray
    rbw: float
    floor_db: float
    peaks: list = field(default_factory=list)
    n_segments: int = 0

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def _window(name: str, n: int) -> np.ndarray:
    return sps.get_window("boxcar" if name == "rectangular" else name, n)


def enbw_bins(name: str, n: int = 4096) -> float:
    w = _window(name, n)
    return n * float(np.sum(w**2)) / float(np.sum(w)) ** 2


def segment_length(tc: TraceConfig) -> int:
    return int(round(enbw_bins(tc.window) * tc.sample_rate / tc.rbw))


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def tone_amplitude(signal: float, tc: TraceConfig) -> float:
    """Per-sample tone amplitude whose spectral power is ``signal**2`` floors.

    The floor of unit-variance white noise in one ENBW is ``2 rbw / fs``, a
    tone of amplitude ``A`` reads ``A**2 / 2``.
    """
    return 2 * abs(signal) * math.sqrt(tc.rbw / tc.sample_rate)


def port_gain(state: DarkPortState, budget: PhotonBudget) -> float:
    """Normalised signal per unit transverse wavenumber, ``2 sqrt(N) |A_w| w0``."""
    n_port = budget.photons_at(state.port)
    return 2 * math.sqrt(n_port) * abs(state.weak_value) * state.geom.waist


def _drive(tc: TraceConfig, mod_freq: float, angle_amplitude: float, wavelength: float):
    t = np.arange(tc.n_samples) / tc.sample_rate
    angle = angle_amplitude * np.sin(2 * np.pi * mod_freq * t)
    return 2 * np.pi * np.sin(angle) / wavelength


def _check_nyquist(tc: TraceConfig, *freqs):
    for f in freqs:
        if f >= tc.sample_rate / 2:
            raise AliasingError(f"modulation {f:g} Hz at or above Nyquist {tc.sample_rate / 2:g} Hz")


def synthesize_trace(
    state: DarkPortState,
    budget: PhotonBudget,
    mod_freq: float,
    angle_amplitude: float,
    tc: TraceConfig,
    rng: np.random.Generator | None = None,
) -> TimeTrace:
    """Difference signal of one BHD under a sinusoidal deflection.

    ``state`` fixes the port, weak value and geometry; its own kick is
    ignored. The deflection ``angle_amplitude * sin(2 pi f t)`` is applied on
    the port's axis. With a fixed ``tc.seed`` (and no ``rng``) the output is
    bit-for-bit reproducible.
    """
    _check_nyquist(tc, mod_freq)
    lam = state.geom.wavelength
    k_amp = 2 * math.pi * math.sin(angle_amplitude) / lam
    if abs(k_amp * state.geom.waist) > 0.2:
        raise FirstOrderRegimeError("drive amplitude outside the first-order regime")
    rng = _rng(tc.seed) if rng is None else rng
    noise = rng.standard_normal(tc.n_samples)
    gain = port_gain(state, budget)
    scale = tone_amplitude(1.0, tc)
    samples = noise + scale * gain * _drive(tc, mod_freq, angle_amplitude, lam)
    return TimeTrace(samples, tc.sample_rate)


def synthesize_dual_port(
    cfg: SystemConfig,
    budget: PhotonBudget,
    yaw_amplitude: float,
    pitch_amplitude: float,
    tc: TraceConfig,
) -> tuple[TimeTrace, TimeTrace]:
    """One run with both PZT pairs driven; returns the traces of BHD I and BHD II.

    Each detector's mean follows its dark-port state under the full
    two-axis deflection. The two detectors get independent noise streams
    spawned from ``tc.seed``.
    """
    _check_nyquist(tc, cfg.mod_freq_yaw, cfg.mod_freq_pitch)
    lam = cfg.geom.wavelength
    at_amplitude = Deflection(yaw_amplitude, pitch_amplitude, lam)
    state_i = dark_port_I(cfg, at_amplitude)
    state_ii = dark_port_II(cfg, at_amplitude)
    kx = _drive(tc, cfg.mod_freq_yaw, yaw_amplitude, lam)
    ky = _drive(tc, cfg.mod_freq_pitch, pitch_amplitude, lam)
    scale = tone_amplitude(1.0, tc)
    rng_i, rng_ii = (np.random.default_rng(s) for s in np.random.SeedSequence(tc.seed).spawn(2))
    # Port I follows the horizontal kick only, port II the vertical one (after the Dove prism).
    trace_i = rng_i.standard_normal(tc.n_samples) + scale * port_gain(state_i, budget) * kx
    trace_ii = rng_ii.standard_normal(tc.n_samples) + scale * port_gain(state_ii, budget) * ky
    return TimeTrace(trace_i, tc.sample_rate), TimeTrace(trace_ii, tc.sample_rate)


def welch_psd(trace: TimeTrace, tc: TraceConfig) -> PowerSpectrum:
    """Averaged, windowed periodogram with 50 % overlap, in dB re shot noise per RBW."""
    nperseg = segment_length(tc)
    step = nperseg - nperseg // 2
    n = trace.samples.size
    n_segments = 0 if n < nperseg else 1 + (n - nperseg) // step
    if n_segments < MIN_SEGMENTS:
        raise InsufficientData(
            f"{n} samples give {n_segments} segments of {nperseg}; need {MIN_SEGMENTS}"
        )
    win = _window(tc.window, nperseg)
    freqs, pxx = sps.welch(
        trace.samples,
        fs=trace.sample_rate,
        window=win,
        nperseg=nperseg,
        noverlap=nperseg // 2,
        detrend=False,
        scaling="spectrum",
    )
    rbw = trace.sample_rate * float(np.sum(win**2)) / float(np.sum(win)) ** 2
    reference = 2 * trace.noise_variance * rbw / trace.sample_rate
    psd = 10 * np.log10(np.maximum(pxx / reference, 1e-300))
    floor, peaks = _floor_and_peaks(freqs, psd)
    return PowerSpectrum(freqs, psd, rbw, floor, peaks, n_segments)


def _floor_and_peaks(freqs, psd_db):
    interior = np.ones(psd_db.size, dtype=bool)
    interior[0] = interior[-1] = False
    first = float(np.median(psd_db[interior]))
    hot = np.flatnonzero(interior & (psd_db > first + PEAK_THRESHOLD_DB))
    mask = interior.copy()
    for i in hot:
        mask[max(0, i - PEAK_GUARD_BINS) : i + PEAK_GUARD_BINS + 1] = False
    floor = float(np.median(psd_db[mask])) if mask.any() else first
    peaks = []
    for i in hot:
        if psd_db[i] >= psd_db[max(0, i - 1)] and psd_db[i] >= psd_db[min(psd_db.size - 1, i + 1)]:
            peaks.append((float(freqs[i]), float(psd_db[i] - floor)))
    return floor, peaks


def _nearest_bin(ps: PowerSpectrum, at: float) -> int:
    if not ps.freqs[0] <= at <= ps.freqs[-1]:
        raise OutOfBand(f"{at:g} Hz outside [{ps.freqs[0]:g}, {ps.freqs[-1]:g}] Hz")
    return int(np.argmin(np.abs(ps.freqs - at)))


def peak_snr_db(ps: PowerSpectrum, at: float) -> float:
    """Level of the bin nearest ``at`` above the noise floor [dB].

    This is the raw analyzer reading: the bin holds tone plus noise, so an
    SNR of 1 reads about 3 dB.
    """
    return float(ps.psd[_nearest_bin(ps, at)] - ps.floor_db)


def reading_to_snr(reading_db) -> np.ndarray:
    """Noise-subtracted linear SNR from peak-over-floor readings (may go negative)."""
    return np.power(10.0, np.asarray(reading_db) / 10) - 1


def expected_reading_db(snr_linear: float) -> float:
    """Analyzer reading predicted for a tone of linear SNR ``snr_linear``."""
    return 10 * math.log10(1 + snr_linear)


def export_psd(ps: PowerSpectrum, path, metadata: dict | None = None) -> None:
    """Two-column text ``frequency_hz psd_db`` with ``#`` metadata lines."""
    lines = ["# columns: frequency_hz psd_db", f"# rbw_hz: {ps.rbw!r}", f"# floor_db: {ps.floor_db!r}"]
    if metadata:
        lines.append("# config: " + json.dumps(metadata, sort_keys=True, default=str))
    lines.extend(f"{f!r} {p!r}" for f, p in zip(ps.freqs.tolist(), ps.psd.tolist()))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def trace_config_dict(tc: TraceConfig) -> dict:
    return asdict(tc)

