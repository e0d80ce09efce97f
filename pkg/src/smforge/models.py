"""Built-in coarse model and fine-model emulator of the coupled-line filter.

The filter is a feed line, five parallel coupled sections in 1-2-3-2-1
order and a second feed line. Section ``i`` (and its mirror) uses width
``w_i``, gap ``s_i`` and length ``l_i``; feed lines use width ``w0`` and
length ``L0``. Auxiliary (preassigned) parameters are the per-element
substrate heights and permittivities ``p = [h0 h1 h2 h3 er0 er1 er2 er3]``,
index 0 belonging to the feed lines.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import numpy as np

from .microstrip import microstrip_coupled_params, microstrip_params
from .network import (cascade, coupled_section_two_port, line_two_port,
                      to_scattering)
from .response import FrequencyGrid, Response

N_DESIGN = 6
N_AUX = 8
DESIGN_NAMES = ("S1", "L1", "S2", "L2", "S3", "L3")
AUX_NAMES = ("h0", "h1", "h2", "h3", "er0", "er1", "er2", "er3")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class FilterGeometry:
    w0: float = 0.59
    w1: float = 0.383
    w2: float = 0.575
    w3: float = 0.595
    L0: float = 3.0
    h: float = 0.635
    er: float = 10.2
    z_ref: float = 50.0

    def __post_init__(self):
        for name in ("w0", "w1", "w2", "w3", "L0", "h", "z_ref"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.er < 1:
            raise ValueError("er must be at least 1")

    @property
    def widths(self) -> tuple[float, float, float]:
        return (self.w1, self.w2, self.w3)

    def nominal_aux(self) -> np.ndarray:
        return np.array([self.h] * 4 + [self.er] * 4)


@dataclass(frozen=True)
class EmulatorTruth:
    """Hidden perturbation that turns the coarse model into a fine-model stand-in.

    ``d_er`` and ``d_h`` are added to the auxiliary vector (scalars broadcast
    to all four elements), ``d_length`` (mm) extends every coupled section and
    ``kappa`` inflates every effective permittivity by ``1 + kappa*(f/10 GHz)**2``.
    """

    d_er: float | tuple = 0.3
    d_h: float | tuple = -0.02
    d_length: float = 0.05
    kappa: float = 0.01

    @classmethod
    def zero(cls) -> EmulatorTruth:
        return cls(0.0, 0.0, 0.0, 0.0)

    def aux_offset(self) -> np.ndarray:
        dh = np.broadcast_to(np.asarray(self.d_h, dtype=float), (4,))
        de = np.broadcast_to(np.asarray(self.d_er, dtype=float), (4,))
        return np.concatenate([dh, de])

    def scaled(self, factor: float) -> EmulatorTruth:
        def sc(v):
            return tuple(factor * np.asarray(v, dtype=float).ravel()) if np.ndim(v) else factor * v
        return EmulatorTruth(sc(self.d_er), sc(self.d_h), factor * self.d_length, factor * self.kappa)

    def to_dict(self) -> dict:
        def js(v):
            return list(v) if np.ndim(v) else v
        return {"d_er": js(self.d_er), "d_h": js(self.d_h),
                "d_length": self.d_length, "kappa": self.kappa}


class EvalCounter:
    """Thread-safe coarse/fine evaluation counts."""

    def __init__(self):
        self._lock = threading.Lock()
        self.coarse_evals = 0
        self.fine_evals = 0

    def add(self, kind: str, n: int = 1) -> None:
        with self._lock:
            if kind == "coarse":
                self.coarse_evals += n
            elif kind == "fine":
                self.fine_evals += n
            else:
                raise ValueError(kind)

    def snapshot(self) -> dict:
        with self._lock:
            return {"coarse_evals": self.coarse_evals, "fine_evals": self.fine_evals}


def _filter_response(x, p, geom: FilterGeometry, grid: FrequencyGrid,
                     d_length: float = 0.0, kappa: float = 0.0) -> Response:
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape != (N_DESIGN,):
        raise ModelError(f"design vector must have {N_DESIGN} entries, got shape {x.shape}")
    if p.shape != (N_AUX,):
        raise ModelError(f"aux vector must have {N_AUX} entries, got shape {p.shape}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ModelError(f"design entries must be positive and finite: {x}")
    if np.any(p[:4] <= 0) or np.any(p[4:] < 1):
        raise ModelError(f"aux vector has non-physical entries: {p}")

    f = grid.points
    disp = 1.0 + kappa * (f / 10.0) ** 2
    h, er = p[:4], p[4:]

    z0, eeff0 = microstrip_params(geom.w0, h[0], er[0])
    feed = line_two_port(z0, eeff0 * disp, geom.L0, f)

    sections = []
    for i, w in enumerate(geom.widths):
        s, length = x[2 * i], x[2 * i + 1] + d_length
        try:
            cp = microstrip_coupled_params(w, s, h[i + 1], er[i + 1])
            sections.append(coupled_section_two_port(cp, length, f, disp))
        except ValueError as exc:
            raise ModelError(f"section {i + 1}: {exc}") from exc

    m = cascade([feed, sections[0], sections[1], sections[2], sections[1], sections[0], feed])
    s11, s12, s21, s22 = to_scattering(m, geom.z_ref, reciprocal=True)
    return Response(grid, s11, s12, s21, s22)


class Model(Protocol):
    """Anything that maps a design vector to a response on a fixed grid."""

    grid: FrequencyGrid

    def __call__(self, x) -> Response: ...


@dataclass
class CoarseModel:
    """Analytic coarse model ``R_c(x, p)``."""

    geometry: FilterGeometry
    grid: FrequencyGrid
    counter: EvalCounter = field(default_factory=EvalCounter)

    def __call__(self, x, p=None) -> Response:
        if p is None:
            p = self.geometry.nominal_aux()
        r = _filter_response(x, p, self.geometry, self.grid)
        self.counter.add("coarse")
        return r

    def on_grid(self, grid: FrequencyGrid) -> CoarseModel:
        return replace(self, grid=grid)

    def with_aux(self, p) -> Callable:
        p = np.asarray(p, dtype=float).copy()
        return lambda x: self(x, p)


@dataclass
class FineEmulator:
    """Perturbed copy of the coarse model standing in for the expensive simulator."""

    geometry: FilterGeometry
    grid: FrequencyGrid
    truth: EmulatorTruth = field(default_factory=EmulatorTruth)
    counter: EvalCounter = field(default_factory=EvalCounter)

    def __call__(self, x) -> Response:
        p = self.geometry.nominal_aux() + self.truth.aux_offset()
        r = _filter_response(x, p, self.geometry, self.grid,
                             self.truth.d_length, self.truth.kappa)
        self.counter.add("fine")
        return r


def eval_coarse(x, p, geom: FilterGeometry, grid: FrequencyGrid,
                counter: EvalCounter | None = None) -> Response:
    r = _filter_response(x, p, geom, grid)
    if counter is not None:
        counter.add("coarse")
    return r


def eval_fine_emulator(x, truth: EmulatorTruth, geom: FilterGeometry, grid: FrequencyGrid,
                       counter: EvalCounter | None = None) -> Response:
    p = geom.nominal_aux() + truth.aux_offset()
    r = _filter_response(x, p, geom, grid, truth.d_length, truth.kappa)
    if counter is not None:
        counter.add("fine")
    return r


@dataclass
class CountingModel:
    """Wrap any response function as a counted fine model."""

    fn: Callable[[np.ndarray], Response]
    grid: FrequencyGrid
    counter: EvalCounter = field(default_factory=EvalCounter)

    def __call__(self, x) -> Response:
        r = self.fn(np.asarray(x, dtype=float))
        self.counter.add("fine")
        return r
