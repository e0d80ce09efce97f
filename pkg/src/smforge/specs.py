"""Band-wise dB upper-limit specifications and the minimax objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .response import CHANNELS, FrequencyGrid, Response, to_db_array

BAND_TOL = 1e-12


@dataclass(frozen=True)
class SpecBand:
    """``|channel| <= limit`` dB for ``f_lo <= f <= f_hi``.

    Open band edges are given as ``-inf``/``inf`` and clip to the grid.
    """

    channel: str
    f_lo: float
    f_hi: float
    limit: float

    def __post_init__(self):
        ch = self.channel.upper()
        if ch not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}")
        object.__setattr__(self, "channel", ch)
        if not self.f_lo <= self.f_hi:
            raise ValueError(f"band edges reversed: {self.f_lo} > {self.f_hi}")

    def mask(self, grid: FrequencyGrid) -> np.ndarray:
        f = grid.points
        return (f >= self.f_lo - BAND_TOL) & (f <= self.f_hi + BAND_TOL)

    def label(self) -> str:
        lo = "-inf" if math.isinf(self.f_lo) else f"{self.f_lo:g}"
        hi = "inf" if math.isinf(self.f_hi) else f"{self.f_hi:g}"
        return f"|{self.channel}| <= {self.limit:g} dB on [{lo}, {hi}] GHz"

    def to_dict(self) -> dict:
        def edge(v):
            return None if math.isinf(v) else v
        return {"channel": self.channel, "f_lo_ghz": edge(self.f_lo),
                "f_hi_ghz": edge(self.f_hi), "limit_db": self.limit}


@dataclass(frozen=True)
class DesignSpec:
    bands: tuple[SpecBand, ...]

    def __post_init__(self):
        bands = tuple(self.bands)
        if not bands:
            raise ValueError("a design spec needs at least one band")
        object.__setattr__(self, "bands", bands)

    def to_list(self) -> list[dict]:
        return [b.to_dict() for b in self.bands]


def filter_spec() -> DesignSpec:
    """Return-loss and rejection template of the coupled-line filter case."""
    return DesignSpec((
        SpecBand("S11", 8.9, 10.1, -12.0),
        SpecBand("S12", -math.inf, 8.2, -30.0),
        SpecBand("S12", 11.4, math.inf, -30.0),
    ))


@dataclass(frozen=True)
class Violation:
    margins: tuple[np.ndarray, ...]   # per band, dB above limit at in-band points
    worst: float
    band_worst: tuple[float, ...]


def violation(r: Response, spec: DesignSpec) -> Violation:
    """Per-point margins (positive = violated) and the worst one."""
    margins, band_worst = [], []
    for band in spec.bands:
        mask = band.mask(r.grid)
        if not mask.any():
            raise ValueError(f"band {band.label()} contains no grid points")
        m = to_db_array(r.channel(band.channel)[mask]) - band.limit
        margins.append(m)
        band_worst.append(float(np.max(m)))
    return Violation(tuple(margins), float(max(band_worst)), tuple(band_worst))


def objective(r: Response, spec: DesignSpec) -> float:
    """Minimax spec violation; the spec is met iff this is ``<= 0``."""
    return violation(r, spec).worst


def soft_objective(r: Response, spec: DesignSpec, tau: float) -> float:
    """Log-sum-exp smoothing of :func:`objective` with temperature ``tau`` dB.

    Overestimates the minimax value by at most ``tau*log(N)`` for N in-band
    points; used to give the quasi-Newton search a differentiable target.
    """
    m = np.concatenate(violation(r, spec).margins)
    top = np.max(m)
    return float(top + tau * np.log(np.sum(np.exp((m - top) / tau))))
