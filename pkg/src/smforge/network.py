"""Lossless two-port building blocks in ABCD form.

Matrices are complex arrays of shape ``(..., 2, 2)``; a leading axis runs
over frequency so that one call covers a whole grid.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .microstrip import CoupledParams

C0 = 299_792_458.0
# GHz * mm -> radians per unit sqrt(eeff): 2*pi*f*L/c0
_PHASE_SCALE = 2 * np.pi * 1e9 * 1e-3 / C0

SINGULAR_GUARD = 1e-9


class SingularSectionError(ValueError):
    pass


def electrical_length(eeff, length_mm, f_ghz):
    return _PHASE_SCALE * np.asarray(f_ghz, dtype=float) * np.sqrt(eeff) * length_mm


def line_two_port(z0: float, eeff, length_mm: float, f_ghz) -> np.ndarray:
    """ABCD matrix of a lossless uniform line."""
    if z0 <= 0 or np.any(np.asarray(eeff) < 1) or length_mm < 0:
        raise ValueError(f"invalid line z0={z0}, eeff={eeff}, L={length_mm}")
    if np.any(np.asarray(f_ghz) <= 0):
        raise ValueError("frequency must be positive")
    bl = electrical_length(eeff, length_mm, f_ghz)
    c, s = np.cos(bl), np.sin(bl)
    out = np.empty(np.shape(bl) + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = 1j * z0 * s
    out[..., 1, 0] = 1j * s / z0
    out[..., 1, 1] = c
    return out


def _check_theta(theta, f_ghz, mode):
    theta = np.atleast_1d(theta)
    dist = np.abs(theta - np.pi * np.round(theta / np.pi))
    bad = np.flatnonzero(dist <= SINGULAR_GUARD)
    if bad.size:
        f = np.broadcast_to(np.atleast_1d(f_ghz), theta.shape)[bad[0]]
        raise SingularSectionError(
            f"{mode}-mode electrical length {theta[bad[0]]:.12g} rad is a multiple of pi at {f} GHz")


def coupled_section_impedance(params: CoupledParams, length_mm: float, f_ghz,
                              eeff_scale=1.0) -> np.ndarray:
    """Two-port impedance matrix of an open-circuited coupled-line section.

    Ports are the diagonal ends of the pair; the other two ends are open.
    Even and odd modes are superposed with their own electrical lengths.
    ``eeff_scale`` multiplies both effective permittivities (dispersion).
    """
    if length_mm <= 0:
        raise ValueError(f"section length must be positive, got {length_mm}")
    if np.any(np.asarray(f_ghz) <= 0):
        raise ValueError("frequency must be positive")
    te = electrical_length(params.eeff_e * eeff_scale, length_mm, f_ghz)
    to = electrical_length(params.eeff_o * eeff_scale, length_mm, f_ghz)
    _check_theta(te, f_ghz, "even")
    _check_theta(to, f_ghz, "odd")
    ze, zo = params.z0e, params.z0o
    z11 = -0.5j * (ze / np.tan(te) + zo / np.tan(to))
    z21 = -0.5j * (ze / np.sin(te) - zo / np.sin(to))
    out = np.empty(np.shape(te) + (2, 2), dtype=complex)
    out[..., 0, 0] = z11
    out[..., 0, 1] = z21
    out[..., 1, 0] = z21
    out[..., 1, 1] = z11
    return out


def z_to_abcd(z: np.ndarray) -> np.ndarray:
    z11, z12, z21, z22 = z[..., 0, 0], z[..., 0, 1], z[..., 1, 0], z[..., 1, 1]
    if np.any(z21 == 0):
        raise SingularSectionError(
            "transfer impedance is zero (fully decoupled section); use the impedance form")
    out = np.empty_like(z)
    out[..., 0, 0] = z11 / z21
    out[..., 0, 1] = (z11 * z22 - z12 * z21) / z21
    out[..., 1, 0] = 1 / z21
    out[..., 1, 1] = z22 / z21
    return out


def coupled_section_two_port(params: CoupledParams, length_mm: float, f_ghz,
                             eeff_scale=1.0) -> np.ndarray:
    """ABCD matrix of an open-circuited parallel coupled-line section."""
    return z_to_abcd(coupled_section_impedance(params, length_mm, f_ghz, eeff_scale))


def cascade(sections: Sequence[np.ndarray]) -> np.ndarray:
    """Ordered product of ABCD matrices, first element nearest port 1."""
    if len(sections) == 0:
        raise ValueError("cannot cascade an empty list of sections")
    out = np.asarray(sections[0])
    for m in sections[1:]:
        out = out @ m
    return out


def to_scattering(m: np.ndarray, z_ref: float = 50.0, reciprocal: bool = False):
    """Convert ABCD matrices to ``(s11, s12, s21, s22)`` at a real reference impedance.

    With ``reciprocal=True`` the determinant is taken as exactly one, so
    ``s12`` equals ``s21`` bit for bit instead of up to rounding in ``AD - BC``.
    """
    if z_ref <= 0:
        raise ValueError(f"reference impedance must be positive, got {z_ref}")
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    den = a + b / z_ref + c * z_ref + d
    if np.any(den == 0):
        raise ZeroDivisionError("ABCD to S conversion has a zero denominator")
    s11 = (a + b / z_ref - c * z_ref - d) / den
    s21 = 2 / den
    s12 = s21 if reciprocal else 2 * (a * d - b * c) / den
    s22 = (-a + b / z_ref - c * z_ref + d) / den
    return s11, s12, s21, s22


def z_to_scattering(z: np.ndarray, z_ref: float = 50.0):
    """Convert impedance matrices to S-parameters; valid for a zero transfer term."""
    z11, z12, z21, z22 = z[..., 0, 0], z[..., 0, 1], z[..., 1, 0], z[..., 1, 1]
    den = (z11 + z_ref) * (z22 + z_ref) - z12 * z21
    s11 = ((z11 - z_ref) * (z22 + z_ref) - z12 * z21) / den
    s12 = 2 * z12 * z_ref / den
    s21 = 2 * z21 * z_ref / den
    s22 = ((z11 + z_ref) * (z22 - z_ref) - z12 * z21) / den
    return s11, s12, s21, s22
