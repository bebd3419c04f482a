"""Path-space pre/post-selection states, measurement operators and weak values.

Basis ordering: Sagnac ``(cw, ccw)``, UMZ ``(T, R)``; the composite space is
``kron(sagnac, umz)``, i.e. ``(cw T, cw R, ccw T, ccw R)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ZeroOverlap

#: Overlaps below this magnitude are treated as exact orthogonality.
ZERO_OVERLAP = 1e-15
_NORM_TOL = 1e-12


class Basis(str, enum.Enum):
    SAGNAC = "sagnac"
    UMZ = "umz"
    COMPOSITE = "composite"


class Port(str, enum.Enum):
    BRIGHT = "bright"
    DARK = "dark"


@dataclass
class PathState:
    amplitudes: np.ndarray
    basis: Basis

    def __post_init__(self):
        self.basis = Basis(self.basis)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        expected = 4 if self.basis is Basis.COMPOSITE else 2
        if self.amplitudes.shape != (expected,):
            raise ValueError(f"{self.basis.value} state needs {expected} amplitudes")
        if abs(np.vdot(self.amplitudes, self.amplitudes).real - 1) > _NORM_TOL:
            raise ValueError("selection states must be unit-norm")

    def overlap(self, other: "PathState") -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self, other: "PathState") -> "PathState":
        # outer().ravel() is kron for vectors, at a fraction of the cost
        return PathState(np.outer(self.amplitudes, other.amplitudes).ravel(), Basis.COMPOSITE)

    def with_phase(self, alpha: float) -> "PathState":
        return PathState(np.exp(1j * alpha) * self.amplitudes, self.basis)


@dataclass
class PathOperator:
    matrix: np.ndarray
    hermitian: bool = True

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape not in ((2, 2), (4, 4)):
            raise ValueError("path operators are 2x2 or 4x4")
        is_herm = np.allclose(self.matrix, self.matrix.conj().T, rtol=0, atol=1e-12)
        if is_herm != self.hermitian:
            raise ValueError(f"hermitian flag {self.hermitian} contradicts the matrix")

    def kron(self, other: "PathOperator") -> "PathOperator":
        return PathOperator(np.kron(self.matrix, other.matrix), self.hermitian and other.hermitian)


def _two_path(phi: float, basis: Basis) -> PathState:
    return PathState(np.array([np.exp(-0.5j * phi), np.exp(0.5j * phi)]) / np.sqrt(2), basis)


def sagnac_preselection(phi1: float) -> PathState:
    return _two_path(phi1, Basis.SAGNAC)


def umz_preselection(phi2: float) -> PathState:
    return _two_path(phi2, Basis.UMZ)


def sagnac_postselection(port) -> PathState:
    sign = 1.0 if Port(port) is Port.BRIGHT else -1.0
    return PathState(np.array([1.0, sign]) / np.sqrt(2), Basis.SAGNAC)


def umz_postselection() -> PathState:
    """Dark port of the unbalanced Mach-Zehnder, ``(T - R)/sqrt(2)``."""
    return PathState(np.array([1.0, -1.0]) / np.sqrt(2), Basis.UMZ)


# Yaw couples with opposite sign to the two Sagnac circulations.
SAGNAC_WHICH_PATH = PathOperator(np.diag([1.0, -1.0]))
# Sagnac-side factor of the pitch operator; it is the identity.
SAGNAC_IDENTITY = PathOperator(np.eye(2))
UMZ_WHICH_PATH = PathOperator(np.diag([1.0, -1.0]))
PITCH_OPERATOR = SAGNAC_IDENTITY.kron(UMZ_WHICH_PATH)


def weak_value(op: PathOperator, pre: PathState, post: PathState) -> complex:
    """``<post|op|pre> / <post|pre>``.

    Raises ``ZeroOverlap`` when the pre- and post-selection states are
    orthogonal.
    """
    overlap = post.overlap(pre)
    if abs(overlap) < ZERO_OVERLAP:
        raise ZeroOverlap(f"|<post|pre>| = {abs(overlap):.3g}: post-selection probability is zero")
    return complex(np.vdot(post.amplitudes, op.matrix @ pre.amplitudes)) / overlap


def postselection_probability(pre: PathState, post: PathState) -> float:
    if pre.amplitudes.shape != post.amplitudes.shape:
        raise ValueError("states live in different spaces")
    return float(min(1.0, abs(post.overlap(pre)) ** 2))


def phase_for_probability(p: float) -> float:
    """Relative phase giving dark-port probability ``p``: ``2 arcsin(sqrt(p))``."""
    if not 0 <= p <= 1:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    return 2 * float(np.arcsin(np.sqrt(p)))


def composite_selection(phi1: float, phi2: float):
    """Pre-state, post-state and operator for the pitch measurement.

    Returns ``(pre, post, op)`` on the Sagnac x UMZ space, with the Sagnac
    bright port and the UMZ dark port selected.
    """
    pre = sagnac_preselection(phi1).tensor(umz_preselection(phi2))
    post = sagnac_postselection(Port.BRIGHT).tensor(umz_postselection())
    return pre, post, PITCH_OPERATOR
