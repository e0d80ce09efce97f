"""Quasi-static microstrip line parameters.

Single lines follow Hammerstad and Jensen (1980); coupled lines follow the
zero-thickness, zero-dispersion part of Kirschning and Jansen (1984).

References
----------
E. Hammerstad and O. Jensen, "Accurate Models for Microstrip Computer-Aided
Design", IEEE MTT-S Int. Microwave Symp. Digest, 1980, pp. 407-409.

M. Kirschning and R. H. Jansen, "Accurate Wide-Range Design Equations for the
Frequency-Dependent Characteristic of Parallel Coupled Microstrip Lines",
IEEE Trans. MTT 32(1), 1984, pp. 83-90.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ETA0 = 376.730313668

# validity window of the coupled-line approximation
W_OVER_H = (0.1, 10.0)
S_OVER_H = (0.05, 10.0)


class ValidityError(ValueError):
    pass


@dataclass(frozen=True)
class CoupledParams:
    z0e: float
    z0o: float
    eeff_e: float
    eeff_o: float


def _a(u):
    return (1 + np.log((u**4 + (u / 52) ** 2) / (u**4 + 0.432)) / 49
            + np.log(1 + (u / 18.1) ** 3) / 18.7)


def _b(er):
    return 0.564 * ((er - 0.9) / (er + 3)) ** 0.053


def _eeff(u, er):
    return (er + 1) / 2 + (er - 1) / 2 * (1 + 10 / u) ** (-_a(u) * _b(er))


def _z01(u):
    fu = 6 + (2 * np.pi - 6) * np.exp(-((30.666 / u) ** 0.7528))
    return ETA0 / (2 * np.pi) * np.log(fu / u + np.sqrt(1 + (2 / u) ** 2))


def microstrip_params(w: float, h: float, er: float) -> tuple[float, float]:
    """Characteristic impedance (ohm) and effective permittivity of a single line."""
    if w <= 0 or h <= 0 or er < 1:
        raise ValueError(f"invalid microstrip w={w}, h={h}, er={er}")
    u = w / h
    eeff = _eeff(u, er)
    return float(_z01(u) / np.sqrt(eeff)), float(eeff)


def microstrip_coupled_params(w: float, s: float, h: float, er: float) -> CoupledParams:
    """Even/odd mode impedances and effective permittivities of a symmetric pair."""
    if w <= 0 or s <= 0 or h <= 0:
        raise ValueError(f"dimensions must be positive: w={w}, s={s}, h={h}")
    if er < 1:
        raise ValueError(f"relative permittivity below 1: {er}")
    u = w / h
    g = s / h
    if not W_OVER_H[0] <= u <= W_OVER_H[1]:
        raise ValidityError(f"w/h = {u:.4g} outside [{W_OVER_H[0]}, {W_OVER_H[1]}]")
    if not S_OVER_H[0] <= g <= S_OVER_H[1]:
        raise ValidityError(f"s/h = {g:.4g} outside [{S_OVER_H[0]}, {S_OVER_H[1]}]")

    z0, eeff = microstrip_params(w, h, er)

    v = u * (20 + g**2) / (10 + g**2) + g * np.exp(-g)
    eeff_e = (er + 1) / 2 + (er - 1) / 2 * (1 + 10 / v) ** (-_a(v) * _b(er))

    a_o = 0.7287 * (eeff - (er + 1) / 2) * (1 - np.exp(-0.179 * u))
    b_o = 0.747 * er / (0.15 + er)
    c_o = b_o - (b_o - 0.207) * np.exp(-0.414 * u)
    d_o = 0.593 + 0.694 * np.exp(-0.562 * u)
    eeff_o = ((er + 1) / 2 + a_o - eeff) * np.exp(-c_o * g**d_o) + eeff

    q1 = 0.8695 * u**0.194
    q2 = 1 + 0.7519 * g + 0.189 * g**2.31
    q3 = 0.1975 + (16.6 + (8.4 / g) ** 6) ** -0.387 + np.log(g**10 / (1 + (g / 3.4) ** 10)) / 241
    q4 = 2 * q1 / q2 / (np.exp(-g) * u**q3 + (2 - np.exp(-g)) * u**-q3)
    q5 = 1.794 + 1.14 * np.log(1 + 0.638 / (g + 0.517 * g**2.43))
    q6 = 0.2305 + np.log(g**10 / (1 + (g / 5.8) ** 10)) / 281.3 + np.log(1 + 0.598 * g**1.154) / 5.1
    q7 = (10 + 190 * g**2) / (1 + 82.3 * g**3)
    q8 = np.exp(-6.5 - 0.95 * np.log(g) - (g / 0.15) ** 5)
    q9 = np.log(q7) * (q8 + 1 / 16.5)
    q10 = (q2 * q4 - q5 * np.exp(np.log(u) * q6 * u**-q9)) / q2

    z0e = z0 * np.sqrt(eeff / eeff_e) / (1 - z0 / ETA0 * np.sqrt(eeff) * q4)
    z0o = z0 * np.sqrt(eeff / eeff_o) / (1 - z0 / ETA0 * np.sqrt(eeff) * q10)
    return CoupledParams(float(z0e), float(z0o), float(eeff_e), float(eeff_o))
