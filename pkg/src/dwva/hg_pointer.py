"""Hermite-Gaussian pointer states and transverse momentum kicks.

Convention: the TEM00 intensity has per-axis variance ``waist**2``, so that
``psi_1(x) = (x / waist) * psi_0(x)`` is unit-norm. In this convention the
position operator is ``x = waist * (a + a^dagger)`` and a kick ``exp(i k x)``
is a displacement operator with amplitude ``alpha = i k waist``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_genlaguerre, eval_hermite, gammaln

from .errors import FirstOrderRegimeError

#: Largest |k * waist| accepted by the first-order expansion.
FIRST_ORDER_LIMIT = 0.2
DEFAULT_MAX_ORDER = 8


class Axis(str, enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class BeamGeometry:
    """Waist and wavelength of the pointer beam, both in metres."""

    waist: float = 1.0e-3
    wavelength: float = 1064e-9

    def __post_init__(self):
        if not self.waist > 0:
            raise ValueError(f"waist must be positive, got {self.waist}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")


@dataclass(frozen=True)
class Deflection:
    """Yaw and pitch tilt of the beam.

    The transverse wavenumbers are derived on access so they can never
    disagree with the angles.
    """

    yaw: float = 0.0
    pitch: float = 0.0
    wavelength: float = 1064e-9

    @property
    def kx(self) -> float:
        return 2 * np.pi * np.sin(self.yaw) / self.wavelength

    @property
    def ky(self) -> float:
        return 2 * np.pi * np.sin(self.pitch) / self.wavelength

    def k(self, axis: Axis) -> float:
        return self.kx if Axis(axis) is Axis.HORIZONTAL else self.ky


@dataclass
class PointerExpansion:
    """Coefficients of a one-axis transverse profile in the HG basis.

    ``coefficients[n]`` multiplies ``psi_n``; the truncation order is
    ``len(coefficients) - 1``.
    """

    axis: Axis
    coefficients: np.ndarray
    waist: float
    norm_tolerance: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        self.axis = Axis(self.axis)
        self.coefficients = np.atleast_1d(np.asarray(self.coefficients, dtype=complex))
        if self.coefficients.ndim != 1 or self.coefficients.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if not self.waist > 0:
            raise ValueError(f"waist must be positive, got {self.waist}")

    @classmethod
    def tem00(cls, axis, waist, max_order=1):
        c = np.zeros(max_order + 1, dtype=complex)
        c[0] = 1.0
        return cls(axis, c, waist)

    @property
    def max_order(self) -> int:
        return self.coefficients.size - 1

    @property
    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def is_subnormalized(self, tol=None) -> bool:
        tol = self.norm_tolerance if tol is None else tol
        return self.norm_squared <= 1 + tol

    def coefficient(self, n: int) -> complex:
        return complex(self.coefficients[n]) if n <= self.max_order else 0j

    def padded(self, max_order: int) -> np.ndarray:
        c = np.zeros(max(max_order, self.max_order) + 1, dtype=complex)
        c[: self.coefficients.size] = self.coefficients
        return c

    def relabeled(self, axis) -> "PointerExpansion":
        return PointerExpansion(axis, self.coefficients.copy(), self.waist)


def tem00_amplitude(x, y, geom: BeamGeometry):
    """Separable TEM00 amplitude, unit-normalised over the plane."""
    w2 = geom.waist**2
    return np.exp(-(np.square(x) + np.square(y)) / (4 * w2)) / np.sqrt(2 * np.pi * w2)


def hg_mode(n: int, x, waist: float):
    """One-axis HG amplitude of order ``n`` in the variance-``waist**2`` convention."""
    if n < 0:
        raise ValueError("mode order must be non-negative")
    x = np.asarray(x, dtype=float)
    lognorm = -0.25 * math.log(2 * math.pi * waist**2) - 0.5 * (n * math.log(2) + gammaln(n + 1))
    u = x / (math.sqrt(2) * waist)
    return math.exp(lognorm) * eval_hermite(n, u) * np.exp(-np.square(x) / (4 * waist**2))


def fundamental_mode(x, geom: BeamGeometry):
    return hg_mode(0, x, geom.waist)


def first_order_mode(x, geom: BeamGeometry):
    """``psi_1(x) = (x / waist) * psi_0(x)``."""
    return np.asarray(x, dtype=float) / geom.waist * hg_mode(0, x, geom.waist)


def coherent_coefficients(k_waist: float, max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    """HG coefficients of ``exp(i k x) psi_0`` for ``k_waist = k * waist``."""
    alpha = 1j * k_waist
    n = np.arange(max_order + 1)
    logfact = gammaln(n + 1)
    return np.exp(-0.5 * k_waist**2) * alpha**n / np.exp(0.5 * logfact)


def kick_matrix(k_waist: float, max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    """Truncated matrix elements ``<psi_m| exp(i k x) |psi_n>``.

    Uses the closed form of displacement-operator matrix elements in terms of
    generalized Laguerre polynomials, so each element is exact (only the
    basis is truncated).
    """
    alpha = 1j * k_waist
    a2 = k_waist**2
    size = max_order + 1
    out = np.empty((size, size), dtype=complex)
    pref = math.exp(-0.5 * a2)
    for m in range(size):
        for n in range(size):
            if m >= n:
                d = m - n
                scale = math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
                out[m, n] = scale * alpha**d * eval_genlaguerre(n, d, a2)
            else:
                d = n - m
                scale = math.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
                out[m, n] = scale * (-np.conj(alpha)) ** d * eval_genlaguerre(m, d, a2)
    return pref * out


def _is_pure_tem00(p: PointerExpansion, tol=1e-15) -> bool:
    c = p.coefficients
    return abs(c[0] - 1) <= tol and bool(np.all(np.abs(c[1:]) <= tol))


def apply_deflection_first_order(p: PointerExpansion, d: Deflection) -> PointerExpansion:
    """Linearised kick ``(1 + i k x) psi_0 = psi_0 + i k waist psi_1``.

    The result is not renormalised. Raises ``FirstOrderRegimeError`` when
    ``|k * waist|`` exceeds ``FIRST_ORDER_LIMIT``.
    """
    if not _is_pure_tem00(p):
        raise ValueError("first-order kick requires a pure TEM00 pointer")
    kw = d.k(p.axis) * p.waist
    if abs(kw) > FIRST_ORDER_LIMIT:
        raise FirstOrderRegimeError(
            f"|k*waist| = {abs(kw):.3g} exceeds {FIRST_ORDER_LIMIT}; use apply_deflection_exact"
        )
    c = p.padded(1)
    c[1] = 1j * kw
    return PointerExpansion(p.axis, c, p.waist)


def apply_deflection_exact(
    p: PointerExpansion, d: Deflection, max_order: int = DEFAULT_MAX_ORDER
) -> PointerExpansion:
    """Exact kick ``exp(i k x)`` applied to ``p``, truncated at ``max_order``."""
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    kw = d.k(p.axis) * p.waist
    c = p.padded(max_order)
    if _is_pure_tem00(p):
        out = coherent_coefficients(kw, c.size - 1)
    else:
        out = kick_matrix(kw, c.size - 1) @ c
    return PointerExpansion(p.axis, out, p.waist)


def apply_kick_2d(
    coeffs: np.ndarray, d: Deflection, waist: float, order: str = "yaw-pitch"
) -> np.ndarray:
    """Apply both kicks to a 2-D coefficient array ``C[m, n]`` (x index, y index).

    ``order`` selects which operator acts first; the two must agree because
    the kicks act on different axes.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    kx_mat = kick_matrix(d.kx * waist, coeffs.shape[0] - 1)
    ky_mat = kick_matrix(d.ky * waist, coeffs.shape[1] - 1)
    if order == "yaw-pitch":
        return (kx_mat @ coeffs) @ ky_mat.T
    if order == "pitch-yaw":
        return kx_mat @ (coeffs @ ky_mat.T)
    raise ValueError(f"unknown order {order!r}")
