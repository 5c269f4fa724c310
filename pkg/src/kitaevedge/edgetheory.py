"""Closed-form edge-mode results used as oracles for the numerics.

All energies are in units of J unless a ``J`` argument says otherwise.
Momentum ``qx`` runs along the edge in inverse lattice constants.  Signs of
the edge energies depend on unstated chirality conventions; comparisons
against strip numerics should use magnitudes and crossing locations.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np

SQRT3 = math.sqrt(3.0)

TWO_MODE_LO = 2.0 * math.pi / 3.0
TWO_MODE_HI = 4.0 * math.pi / 3.0


class DomainError(ValueError):
    """Momentum outside the validity window of a closed form."""


def _kappas(kappa: Optional[float], kappa_xyz) -> tuple[float, float, float]:
    if kappa_xyz is not None:
        kx, ky, kz = kappa_xyz
        return float(kx), float(ky), float(kz)
    if kappa is None:
        raise ValueError("provide kappa or kappa_xyz")
    return float(kappa), float(kappa), float(kappa)


def bulk_gap(kappa: Optional[float] = None, kappa_xyz=None) -> float:
    """Bulk gap: 6*sqrt(3)*kappa isotropic, 2*sqrt(3)|kx+ky+kz| in general."""
    kx, ky, kz = _kappas(kappa, kappa_xyz)
    return 2.0 * SQRT3 * abs(kx + ky + kz)


def node_exclusion_window(kappa: Optional[float] = None, kappa_xyz=None,
                          J: float = 1.0, factor: float = 3.0) -> float:
    """Half-width (in qx) of the region near a node where edge formulas fail."""
    return factor * bulk_gap(kappa, kappa_xyz) / J


def zigzag_two_mode_energy(qx: float, h_z: float) -> tuple[float, float]:
    """Field splitting of the two flat zigzag modes, +-2 h_z sqrt(1 - 4 cos^2(qx/2)).

    Real-valued only for 2pi/3 < qx < 4pi/3.
    """
    if not (TWO_MODE_LO <= qx <= TWO_MODE_HI):
        raise DomainError(f"qx={qx:.4f} outside the two-mode range "
                          f"({TWO_MODE_LO:.4f}, {TWO_MODE_HI:.4f})")
    arg = 1.0 - 4.0 * math.cos(qx / 2.0) ** 2
    val = 2.0 * h_z * math.sqrt(max(arg, 0.0))
    return (val, -val)


def zigzag_single_mode_energy(qx: float, h_z: float,
                              kappa: Optional[float] = None,
                              kappa_xyz=None, J: float = 1.0,
                              enforce_window: bool = True) -> float:
    """Single-mode zigzag branch under a uniform field.

    Isotropic form ``-(h_z^2 kappa / J^2) (sin qx + tan(qx/2)) /
    (cos^2(qx/2) - 1/4 + h_z^2/(4J^2))``; the anisotropic numerator is
    ``kappa_z sin qx + (kappa_x + kappa_y)/2 * tan(qx/2)``.
    """
    kx, ky, kz = _kappas(kappa, kappa_xyz)
    if enforce_window:
        w = TWO_MODE_LO - node_exclusion_window(kappa, kappa_xyz, J)
        if abs(qx) > w:
            raise DomainError(
                f"|qx|={abs(qx):.4f} is inside the node exclusion window; "
                f"the formula is valid for |qx| <= {w:.4f}")
    num = kz * math.sin(qx) + 0.5 * (kx + ky) * math.tan(qx / 2.0)
    den = math.cos(qx / 2.0) ** 2 - 0.25 + h_z ** 2 / (4.0 * J ** 2)
    return -(h_z ** 2 / J ** 2) * num / den


class UniformFieldVelocity(NamedTuple):
    """The two analytic values for the uniform-field zigzag velocity.

    ``stated``: the quoted closed form -h_z^2 kappa / (2 J^2).
    ``spectrum_slope``: the slope of the single-mode branch at qx = 0,
    -(3/2) h_z^2 kappa/J^2 / (3/4 + h_z^2/(4 J^2)) -> -2 h_z^2 kappa / J^2
    for weak fields.  The two differ by a constant factor; strip
    diagonalization arbitrates.
    """

    stated: float
    spectrum_slope: float


def zigzag_vgr_uniform_field(h_z: float, kappa: Optional[float] = None,
                             kappa_xyz=None, J: float = 1.0) -> UniformFieldVelocity:
    kx, ky, kz = _kappas(kappa, kappa_xyz)
    k_iso = (kx + ky + kz) / 3.0
    stated = -h_z ** 2 * k_iso / (2.0 * J ** 2)
    # d/dqx of kz sin(qx) + (kx+ky)/2 tan(qx/2) at qx = 0
    num_slope = kz + 0.25 * (kx + ky)
    den0 = 0.75 + h_z ** 2 / (4.0 * J ** 2)
    spectrum_slope = -(h_z ** 2 / J ** 2) * num_slope / den0
    return UniformFieldVelocity(stated=stated, spectrum_slope=spectrum_slope)


def zigzag_zero_field_energy(qx: float, kappa: Optional[float] = None,
                             kappa_xyz=None,
                             enforce_window: bool = True) -> float:
    """Zero-boundary-field zigzag branch, -12 kappa sin qx
    (anisotropic: -4 (kx+ky+kz) sin qx), on 2pi/3 < qx < 4pi/3."""
    if enforce_window and not (TWO_MODE_LO <= qx <= TWO_MODE_HI):
        raise DomainError(f"qx={qx:.4f} outside the branch domain")
    kx, ky, kz = _kappas(kappa, kappa_xyz)
    return -4.0 * (kx + ky + kz) * math.sin(qx)


def zigzag_zero_field_slope(qx: float, kappa: Optional[float] = None,
                            kappa_xyz=None) -> float:
    """d/dqx of the zero-field branch; magnitude 12 kappa at the qx=pi crossing."""
    kx, ky, kz = _kappas(kappa, kappa_xyz)
    return -4.0 * (kx + ky + kz) * math.cos(qx)


def armchair_mode_profile(y, delta: float, J: float = 1.0,
                          h_b: float = 0.0) -> np.ndarray:
    """Sublattice amplitudes (black, white) of the armchair edge mode at depth y.

    ``y`` is measured from the first non-existent row outside the edge, so the
    outermost sites sit at y = 1/2.  For ``h_b = 0`` this is
    ``(1, -1) sin(4 pi y / 3) exp(-|delta| y / (sqrt(3) J))``; for ``h_b > 0``
    the lattice part is ``-(2 h_b / sqrt(3) J) (1, -1) sin((4 pi y - 2 pi)/3)``
    with the same envelope (it vanishes at y = 1/2, where the mode instead
    lives on the free b sites with equal weights).
    """
    y = np.asarray(y, dtype=float)
    env = np.exp(-abs(delta) * y / (SQRT3 * J))
    spinor = np.array([1.0, -1.0])
    if h_b == 0.0:
        amp = np.sin(4.0 * np.pi * y / 3.0) * env
    else:
        amp = -(2.0 * h_b / (SQRT3 * J)) * np.sin((4.0 * np.pi * y - 2.0 * np.pi) / 3.0) * env
    return np.multiply.outer(amp, spinor)


def armchair_b_weights(h_b: float) -> np.ndarray:
    """Free-b-site components (b_x, b_y) of the armchair mode, equal weights."""
    return np.array([1.0, 1.0])


def armchair_vgr(h_b: float, delta: float, J: float = 1.0) -> float:
    """Armchair edge velocity -sqrt(3) J * 2 h_b^2 / (2 h_b^2 + sqrt(3)|delta| J).

    Vanishes at h_b = 0 and saturates at -sqrt(3) J for boundary fields of
    order sqrt(|delta| J).
    """
    if h_b < 0:
        raise ValueError("h_b must be >= 0")
    num = 2.0 * h_b ** 2
    return -SQRT3 * J * num / (num + SQRT3 * abs(delta) * J)


def armchair_decay_length(delta: float, J: float = 1.0) -> float:
    """Amplitude penetration depth sqrt(3) J / |delta| of the armchair mode."""
    return SQRT3 * J / abs(delta)
