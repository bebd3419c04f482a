"""Double weak-value chain: Sagnac dark port (yaw) and UMZ dark port (pitch)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

from .errors import ConfigError, FirstOrderRegimeError
from .hg_pointer import (
    FIRST_ORDER_LIMIT,
    Axis,
    BeamGeometry,
    Deflection,
    PointerExpansion,
    apply_deflection_first_order,
)
from .selection_states import (
    SAGNAC_WHICH_PATH,
    Port,
    composite_selection,
    phase_for_probability,
    postselection_probability,
    sagnac_postselection,
    sagnac_preselection,
    umz_postselection,
    umz_preselection,
    weak_value,
)


class DarkPort(str, enum.Enum):
    I = "I"  # noqa: E741
    II = "II"


@dataclass(frozen=True)
class SystemConfig:
    """Physical parameters of the double interferometer.

    ``eta`` is the optical transmission between the interferometers. The
    efficiency that enters the pitch photon budget is
    ``eta * cos(phi1/2)**2`` (Sagnac bright-port fraction included) unless
    ``eta_effective`` pins it directly.
    """

    geom: BeamGeometry = field(default_factory=BeamGeometry)
    phi1: float = math.pi / 2
    phi2: float = math.pi / 2
    eta: float = 1.0
    input_power: float = 50e-6
    lo_power: float = 1e-3
    lever_arm: float = 19e-3
    mod_freq_yaw: float = 5e3
    mod_freq_pitch: float = 6e3
    eta_effective: Optional[float] = None

    def __post_init__(self):
        for name in ("input_power", "lo_power", "lever_arm", "mod_freq_yaw", "mod_freq_pitch"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"must be positive, got {getattr(self, name)}", name)
        if not 0 < self.eta <= 1:
            raise ConfigError(f"must lie in (0, 1], got {self.eta}", "eta")
        if self.eta_effective is not None and not 0 < self.eta_effective <= 1:
            raise ConfigError(f"must lie in (0, 1], got {self.eta_effective}", "eta_effective")
        for name in ("phi1", "phi2"):
            if not 0 <= getattr(self, name) <= 2 * math.pi:
                raise ConfigError(f"must lie in [0, 2pi], got {getattr(self, name)}", name)

    @classmethod
    def from_postselection(cls, p_yaw: float, p_pitch: float, **kwargs) -> "SystemConfig":
        return cls(phi1=phase_for_probability(p_yaw), phi2=phase_for_probability(p_pitch), **kwargs)

    @property
    def p_yaw(self) -> float:
        return math.sin(self.phi1 / 2) ** 2

    @property
    def p_pitch(self) -> float:
        return math.sin(self.phi2 / 2) ** 2

    @property
    def effective_eta(self) -> float:
        if self.eta_effective is not None:
            return self.eta_effective
        return self.eta * math.cos(self.phi1 / 2) ** 2

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass
class DarkPortState:
    """Post-selected pointer at one dark port.

    ``kick`` is the transverse wavenumber that produced the pointer; it is
    carried so that detection can evaluate the signal both from the pointer
    and from the weak value.
    """

    port: DarkPort
    pointer: PointerExpansion
    postselection_probability: float
    weak_value: complex
    kick: float
    geom: BeamGeometry

    @property
    def first_order_weight(self) -> float:
        return abs(self.pointer.coefficient(1)) ** 2


class StagePowers(NamedTuple):
    dark_I: float
    to_umz: float
    dark_II: float


def _check_inputs(cfg: SystemConfig, d: Deflection, k: float, what: str):
    if not math.isclose(d.wavelength, cfg.geom.wavelength, rel_tol=1e-12):
        raise ValueError("deflection and beam geometry disagree on the wavelength")
    waist = cfg.geom.waist
    if abs(k * waist) > FIRST_ORDER_LIMIT:
        raise FirstOrderRegimeError(f"|{what}*waist| = {abs(k * waist):.3g} exceeds {FIRST_ORDER_LIMIT}")


def _postselected_pointer(axis: Axis, k_axis_deflection: Deflection, geom, a_w, p):
    kicked = apply_deflection_first_order(PointerExpansion.tem00(axis, geom.waist), k_axis_deflection)
    c = kicked.coefficients.copy()
    # (1 - i A_w k x) psi_0 -> c1 = -A_w * (i k w0), amplified by 1/sqrt(p)
    c[1] = -a_w * c[1] / math.sqrt(p)
    return PointerExpansion(axis, c, geom.waist)


def dark_port_I(cfg: SystemConfig, d: Deflection) -> DarkPortState:
    """Yaw-bearing output of the Sagnac dark port."""
    geom = cfg.geom
    k = d.kx
    _check_inputs(cfg, d, k, "kx")
    pre = sagnac_preselection(cfg.phi1)
    post = sagnac_postselection(Port.DARK)
    a_w = weak_value(SAGNAC_WHICH_PATH, pre, post)
    p = postselection_probability(pre, post)
    pointer = _postselected_pointer(Axis.HORIZONTAL, d, geom, a_w, p)
    return DarkPortState(DarkPort.I, pointer, p, a_w, k, geom)


def dove_prism(p: PointerExpansion) -> PointerExpansion:
    """Rotate the image by 90 degrees: TEM01 content becomes TEM10."""
    swapped = Axis.HORIZONTAL if p.axis is Axis.VERTICAL else Axis.VERTICAL
    return p.relabeled(swapped)


def dark_port_II(cfg: SystemConfig, d: Deflection) -> DarkPortState:
    """Pitch-bearing output of the UMZ dark port, after the Dove prism.

    The reported probability is the UMZ-local one, ``sin^2(phi2/2)``; the
    Sagnac bright-port fraction is accounted for by the effective efficiency.
    """
    geom = cfg.geom
    k = d.ky
    _check_inputs(cfg, d, k, "ky")
    pre, post, op = composite_selection(cfg.phi1, cfg.phi2)
    a_w = weak_value(op, pre, post)
    p = postselection_probability(umz_preselection(cfg.phi2), umz_postselection())
    pointer = _postselected_pointer(Axis.VERTICAL, d, geom, a_w, p)
    return DarkPortState(DarkPort.II, dove_prism(pointer), p, a_w, k, geom)


def dark_port(cfg: SystemConfig, d: Deflection, port) -> DarkPortState:
    return dark_port_I(cfg, d) if DarkPort(port) is DarkPort.I else dark_port_II(cfg, d)


def stage_power_budget(cfg: SystemConfig) -> StagePowers:
    """Optical power at dark port I, entering the UMZ, and at dark port II [W]."""
    dark_i = cfg.input_power * math.sin(cfg.phi1 / 2) ** 2
    to_umz = cfg.input_power * cfg.effective_eta
    dark_ii = to_umz * math.sin(cfg.phi2 / 2) ** 2
    return StagePowers(dark_i, to_umz, dark_ii)


def bright_port_I_power(cfg: SystemConfig) -> float:
    return cfg.input_power * math.cos(cfg.phi1 / 2) ** 2

