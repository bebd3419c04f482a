"""Balanced homodyne detection: photon budgets, SNR and minimum angles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK
from scipy.optimize import brentq

from .errors import NonPositiveLO
from .hg_pointer import Deflection
from .wva_pipeline import DarkPort, DarkPortState, SystemConfig, dark_port

#: Photon integration time: one resolution bandwidth of 10 Hz.
DEFAULT_INTEGRATION_TIME = 0.1


@dataclass(frozen=True)
class PhotonBudget:
    photons_in: float
    photons_lo: float
    photons_darkI: float
    photons_darkII: float
    integration_time: float

    def __post_init__(self):
        for name in ("photons_in", "photons_lo", "photons_darkI", "photons_darkII"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def photons_at(self, port) -> float:
        return self.photons_darkI if DarkPort(port) is DarkPort.I else self.photons_darkII


@dataclass(frozen=True)
class DetectionResult:
    signal_mean: float
    noise_std: float
    snr_linear: float
    snr_db: float


@dataclass(frozen=True)
class MinAngleResult:
    yaw_min: float
    pitch_min: float
    displacement_yaw: float
    displacement_pitch: float


def to_db(x: float) -> float:
    return 10 * math.log10(x) if x > 0 else -math.inf


def photons_from_power(power: float, wavelength: float, integration_time: float) -> float:
    """Photon count ``P T lambda / (h c)`` delivered in ``integration_time``."""
    if power < 0 or wavelength <= 0 or integration_time <= 0:
        raise ValueError("power must be >= 0; wavelength and integration time > 0")
    return power * integration_time * wavelength / (PLANCK * SPEED_OF_LIGHT)


def photon_budget(cfg: SystemConfig, integration_time: float = DEFAULT_INTEGRATION_TIME) -> PhotonBudget:
    lam = cfg.geom.wavelength
    n_in = photons_from_power(cfg.input_power, lam, integration_time)
    return PhotonBudget(
        photons_in=n_in,
        photons_lo=photons_from_power(cfg.lo_power, lam, integration_time),
        photons_darkI=n_in * cfg.p_yaw,
        photons_darkII=n_in * cfg.effective_eta * cfg.p_pitch,
        integration_time=integration_time,
    )


def photon_number_difference(state: DarkPortState, budget: PhotonBudget) -> DetectionResult:
    """Mean and shot noise of the homodyne difference count.

    The signal is read from the post-selected pointer: the first-order
    coefficient times ``sqrt(p)`` is the dark-port TEM10 amplitude per
    input photon. Noise is the coherent-state unit quadrature scaled by the
    local oscillator.
    """
    n_lo = budget.photons_lo
    if n_lo <= 0:
        raise NonPositiveLO("local oscillator photon number must be positive")
    n_port = budget.photons_at(state.port)
    c1 = state.pointer.coefficient(1)
    amplitude = abs(c1) * math.sqrt(state.postselection_probability)
    signal = math.sqrt(n_lo) * 2 * math.sqrt(n_port) * amplitude * math.copysign(1.0, state.kick)
    noise = math.sqrt(n_lo)
    ratio = (signal / noise) ** 2
    return DetectionResult(signal, noise, ratio, to_db(ratio))


def snr(state: DarkPortState, budget: PhotonBudget) -> DetectionResult:
    """Shot-noise-limited SNR ``(2 sqrt(N_port) |A_w| k w0)^2`` in normalised units."""
    n_port = budget.photons_at(state.port)
    amplitude = 2 * math.sqrt(n_port) * abs(state.weak_value) * abs(state.kick) * state.geom.waist
    ratio = amplitude**2
    return DetectionResult(amplitude, 1.0, ratio, to_db(ratio))


def angle_to_displacement(angle: float, lever_arm: float) -> float:
    if not lever_arm > 0:
        raise ValueError("lever arm must be positive")
    return float(lever_arm * np.sin(angle) / 2)


def displacement_to_angle(displacement: float, lever_arm: float) -> float:
    if not lever_arm > 0:
        raise ValueError("lever arm must be positive")
    return float(np.arcsin(2 * displacement / lever_arm))


def min_angles(cfg: SystemConfig, budget: PhotonBudget) -> MinAngleResult:
    """Closed-form angles at unit SNR for both ports (small-angle form)."""
    if not budget.photons_in > 0:
        raise ValueError("photons_in must be positive")
    lam, w0 = cfg.geom.wavelength, cfg.geom.waist
    n_in = budget.photons_in
    yaw = lam / (4 * math.pi * w0 * math.sqrt(n_in) * abs(math.cos(cfg.phi1 / 2)))
    pitch = lam / (4 * math.pi * w0 * math.sqrt(n_in * cfg.effective_eta) * abs(math.cos(cfg.phi2 / 2)))
    return MinAngleResult(
        yaw_min=yaw,
        pitch_min=pitch,
        displacement_yaw=angle_to_displacement(yaw, cfg.lever_arm),
        displacement_pitch=angle_to_displacement(pitch, cfg.lever_arm),
    )


def _deflection(cfg: SystemConfig, port, angle: float) -> Deflection:
    lam = cfg.geom.wavelength
    if DarkPort(port) is DarkPort.I:
        return Deflection(yaw=angle, wavelength=lam)
    return Deflection(pitch=angle, wavelength=lam)


def snr_at_angle(cfg: SystemConfig, budget: PhotonBudget, port, angle: float) -> float:
    """Linear SNR at ``port`` for a static deflection ``angle`` on that port's axis."""
    return snr(dark_port(cfg, _deflection(cfg, port, angle), port), budget).snr_linear


def min_angle_numeric(cfg: SystemConfig, budget: PhotonBudget, port) -> float:
    """Solve ``SNR(angle) = 1`` through the full state pipeline."""

    def f(angle):
        return snr_at_angle(cfg, budget, port, angle) - 1.0

    # SNR grows as angle**2 in the small-angle regime; one probe sets the scale,
    # then widen until the root is bracketed.
    probe = 1e-12
    guess = probe / math.sqrt(max(f(probe) + 1.0, 1e-300))
    lo, hi = guess / 2, guess * 2
    while f(lo) > 0:
        lo /= 4
    while f(hi) < 0:
        hi *= 4
    return float(brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))


def angle_from_snr(cfg: SystemConfig, budget: PhotonBudget, port, snr_linear: float) -> float:
    """Invert the SNR law: deflection angle that yields ``snr_linear``."""
    state = dark_port(cfg, _deflection(cfg, port, 0.0), port)
    n_port = budget.photons_at(port)
    k = math.sqrt(max(snr_linear, 0.0)) / (2 * math.sqrt(n_port) * abs(state.weak_value) * cfg.geom.waist)
    return float(np.arcsin(k * cfg.geom.wavelength / (2 * math.pi)))
