"""Simulation of two-axis beam-deflection sensing with a double weak-value
amplification interferometer read out by balanced homodyne detection."""

from .detection import (
    DetectionResult,
    MinAngleResult,
    PhotonBudget,
    angle_to_displacement,
    min_angles,
    photon_budget,
    photon_number_difference,
    photons_from_power,
    snr,
)
from .hg_pointer import Axis, BeamGeometry, Deflection, PointerExpansion
from .wva_pipeline import DarkPort, DarkPortState, SystemConfig, dark_port_I, dark_port_II, stage_power_budget

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "BeamGeometry",
    "DarkPort",
    "DarkPortState",
    "Deflection",
    "DetectionResult",
    "MinAngleResult",
    "PhotonBudget",
    "PointerExpansion",
    "SystemConfig",
    "angle_to_displacement",
    "dark_port_I",
    "dark_port_II",
    "min_angles",
    "photon_budget",
    "photon_number_difference",
    "photons_from_power",
    "snr",
    "stage_power_budget",
]
