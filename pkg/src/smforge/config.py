"""JSON run configuration: schema, validation and conversion to domain objects."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .explicit import RegionOfInterest
from .implicit import RrsmSettings, default_aux_bounds
from .models import N_AUX, N_DESIGN, EmulatorTruth, FilterGeometry
from .optimize import Bounds, OptimizerSettings
from .response import ChannelSelector, FrequencyGrid, make_grid
from .specs import DesignSpec, SpecBand

ENGINES = ("explicit-sm", "ism-rrsm", "coarse-opt", "eval")


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryConfig(_Strict):
    w0: float = 0.59
    w1: float = 0.383
    w2: float = 0.575
    w3: float = 0.595
    L0: float = 3.0
    h: float = 0.635
    er: float = 10.2
    z_ref: float = 50.0


class EmulatorConfig(_Strict):
    d_er: float | list[float] = 0.3
    d_h: float | list[float] = -0.02
    d_length: float = 0.05
    kappa: float = 0.01


class AffineConfig(_Strict):
    """Synthetic fine model ``scale*coarse(x + shift) + offset`` on one channel (dB)."""

    scale: float = 0.9
    offset: float = 0.05
    shift: list[float] = Field(default_factory=lambda: [0.0] * N_DESIGN)
    channel: Literal["S11", "S12", "S21", "S22"] = "S12"


class BoxConfig(_Strict):
    lower: list[float]
    upper: list[float]
    reference: Optional[list[float]] = None


class GridConfig(_Strict):
    f_min: float = 8.0
    f_max: float = 12.0
    step: float = 0.25


class BandConfig(_Strict):
    channel: Literal["S11", "S12", "S21", "S22"]
    f_lo_ghz: Optional[float] = None
    f_hi_ghz: Optional[float] = None
    limit_db: float


class ChannelConfig(_Strict):
    channels: list[Literal["S11", "S12", "S21", "S22"]] = ["S12"]
    representation: Literal["db", "ri"] = "db"


class OptimizerConfig(_Strict):
    max_iterations: int = Field(100, ge=0)
    gradient_step: float = Field(1e-7, gt=0)
    convergence_tol: float = Field(1e-8, gt=0)
    regularization_weight: float = Field(1e-6, ge=0)
    central_differences: bool = False


class ExtractionConfig(_Strict):
    max_iterations: int = Field(200, ge=0)
    gradient_step: float = Field(1e-8, gt=0)
    convergence_tol: float = Field(1e-12, gt=0)
    regularization_weight: float = Field(1e-6, ge=0)
    central_differences: bool = False


class ExplicitConfig(_Strict):
    channel: ChannelConfig = ChannelConfig()
    include_corners: bool = False
    test_points: int = Field(4, ge=1)
    dense_step: Optional[float] = Field(None, gt=0)
    extraction: ExtractionConfig = ExtractionConfig()


class RrsmConfig(_Strict):
    lam: float | list[float] = 0.5
    max_fine_evals: int = Field(10, ge=1)
    aux_bound_fraction: float = Field(0.1, gt=0, lt=1)
    switch_threshold: Optional[float] = Field(None, ge=0)
    switch_fraction: float = Field(0.1, ge=0)
    channel: ChannelConfig = ChannelConfig(channels=["S11", "S12"], representation="ri")


class RunConfigSchema(_Strict):
    engine: Optional[Literal["explicit-sm", "ism-rrsm", "coarse-opt", "eval"]] = None
    geometry: GeometryConfig = GeometryConfig()
    aux_nominal: Optional[list[float]] = None
    emulator: Optional[EmulatorConfig] = None
    touchstone: Optional[str] = None
    affine: Optional[AffineConfig] = None
    region: BoxConfig
    start: Optional[list[float]] = None
    design_bounds: Optional[BoxConfig] = None
    spec: list[BandConfig] = Field(min_length=1)
    grid: GridConfig = GridConfig()
    explicit: ExplicitConfig = ExplicitConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    rrsm: RrsmConfig = RrsmConfig()
    seed: int = 1234

    @model_validator(mode="after")
    def _one_fine_source(self):
        given = [k for k in ("emulator", "touchstone", "affine") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(
                "exactly one fine-model source (emulator, touchstone or affine) is required, "
                f"got {given or 'none'}")
        return self


@dataclass
class RunConfig:
    engine: str | None
    geometry: FilterGeometry
    aux_nominal: np.ndarray
    fine_kind: str
    truth: EmulatorTruth | None
    touchstone_dir: str | None
    affine: AffineConfig | None
    region: RegionOfInterest
    start: np.ndarray
    design_bounds: Bounds
    spec: DesignSpec
    grid: FrequencyGrid
    explicit: ExplicitConfig
    optimizer: OptimizerSettings
    extraction: OptimizerSettings
    rrsm: RrsmSettings
    seed: int
    source_bytes: bytes = b""
    source_path: str = ""


def _loc(err) -> str:
    parts = ["$"]
    for p in err["loc"]:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def _vec(values, n, where):
    v = np.asarray(values, dtype=float)
    if v.shape != (n,):
        raise ConfigError(f"{where}: expected {n} entries, got {len(values)}")
    return v


def parse_config(data: dict, base_dir: str = ".") -> RunConfig:
    try:
        cfg = RunConfigSchema.model_validate(data)
    except ValidationError as exc:
        msgs = [f"{_loc(e)}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs)) from None

    try:
        geom = FilterGeometry(**cfg.geometry.model_dump())
        grid = make_grid(cfg.grid.f_min, cfg.grid.f_max, cfg.grid.step)
        lo = _vec(cfg.region.lower, N_DESIGN, "$.region.lower")
        hi = _vec(cfg.region.upper, N_DESIGN, "$.region.upper")
        ref = None if cfg.region.reference is None else _vec(
            cfg.region.reference, N_DESIGN, "$.region.reference")
        region = RegionOfInterest(lo, hi, ref)
        if cfg.design_bounds is None:
            dbounds = region.bounds()
        else:
            dbounds = Bounds(_vec(cfg.design_bounds.lower, N_DESIGN, "$.design_bounds.lower"),
                             _vec(cfg.design_bounds.upper, N_DESIGN, "$.design_bounds.upper"))
        start = region.reference.copy() if cfg.start is None else _vec(
            cfg.start, N_DESIGN, "$.start")
        if not dbounds.contains(start):
            raise ConfigError("$.start: start point lies outside the design bounds")
        aux = geom.nominal_aux() if cfg.aux_nominal is None else _vec(
            cfg.aux_nominal, N_AUX, "$.aux_nominal")
        bands = []
        for b in cfg.spec:
            f_lo = -math.inf if b.f_lo_ghz is None else b.f_lo_ghz
            f_hi = math.inf if b.f_hi_ghz is None else b.f_hi_ghz
            bands.append(SpecBand(b.channel, f_lo, f_hi, b.limit_db))
        spec = DesignSpec(tuple(bands))
        for band in spec.bands:
            if not band.mask(grid).any():
                raise ConfigError(f"$.spec: band {band.label()} has no grid points")
        truth = None
        if cfg.emulator is not None:
            e = cfg.emulator
            truth = EmulatorTruth(
                tuple(e.d_er) if isinstance(e.d_er, list) else e.d_er,
                tuple(e.d_h) if isinstance(e.d_h, list) else e.d_h,
                e.d_length, e.kappa)
            truth.aux_offset()
        ts_dir = None
        if cfg.touchstone is not None:
            ts_dir = os.path.normpath(os.path.join(base_dir, cfg.touchstone))
            if not os.path.isfile(os.path.join(ts_dir, "designs.json")):
                raise ConfigError(f"$.touchstone: {ts_dir} has no designs.json index")
        if cfg.affine is not None:
            _vec(cfg.affine.shift, N_DESIGN, "$.affine.shift")
        opt = OptimizerSettings(**cfg.optimizer.model_dump())
        ext = OptimizerSettings(**cfg.explicit.extraction.model_dump())
        r = cfg.rrsm
        lam = tuple(r.lam) if isinstance(r.lam, list) else r.lam
        rr = RrsmSettings(lam, r.max_fine_evals, default_aux_bounds(aux, r.aux_bound_fraction),
                          r.switch_threshold, r.switch_fraction,
                          ChannelSelector(tuple(r.channel.channels), r.channel.representation))
        rr.weights(grid.m)
        ChannelSelector(tuple(cfg.explicit.channel.channels), cfg.explicit.channel.representation)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc

    fine_kind = "emulator" if truth is not None else ("touchstone" if ts_dir else "affine")
    return RunConfig(cfg.engine, geom, aux, fine_kind, truth, ts_dir, cfg.affine, region, start,
                     dbounds, spec, grid, cfg.explicit, opt, ext, rr, cfg.seed)


def load_config(path) -> RunConfig:
    """Read and validate a JSON run configuration."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    cfg = parse_config(data, os.path.dirname(os.path.abspath(path)))
    cfg.source_bytes = raw
    cfg.source_path = str(path)
    return cfg
