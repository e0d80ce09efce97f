"""Implicit space mapping with response-residual correction.

The loop calibrates the preassigned (auxiliary) parameters of the coarse
model against each new fine response, re-optimizes the calibrated model,
and, once calibration alone stops closing the gap, adds a frozen,
per-frequency weighted residual ``lambda*(R_f - R_c)`` taken at the last
fine evaluation point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .design import optimize_design
from .models import CoarseModel
from .optimize import (Bounds, OptimizationError, OptimizerSettings, OptReport,
                       least_squares)
from .response import (ChannelSelector, Response, check_same_grid, response_distance)
from .specs import DesignSpec, objective

log = logging.getLogger(__name__)

ISM = "ISM"
RRSM = "RRSM"

CALIBRATION_CHANNEL = ChannelSelector(("S11", "S12"), "ri")


def default_aux_bounds(p_nominal, fraction: float = 0.1) -> Bounds:
    p = np.asarray(p_nominal, dtype=float)
    return Bounds(p * (1 - fraction), p * (1 + fraction))


@dataclass(frozen=True)
class RrsmSettings:
    """Loop settings.

    ``switch_threshold`` is an absolute calibration-residual level; when
    ``None`` it is ``switch_fraction`` times the uncalibrated residual at
    the first fine evaluation.
    """

    lam: float | tuple = 0.5
    max_fine_evals: int = 10
    aux_bounds: Bounds | None = None
    switch_threshold: float | None = None
    switch_fraction: float = 0.1
    channel: ChannelSelector = CALIBRATION_CHANNEL

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if np.any(lam < 0) or np.any(lam > 1):
            raise ValueError("residual weights must lie in [0, 1]")
        if self.max_fine_evals < 1:
            raise ValueError("max_fine_evals must be positive")

    def weights(self, m: int) -> np.ndarray:
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim == 0:
            return np.full(m, float(lam))
        if lam.shape != (m,):
            raise ValueError(f"need {m} residual weights, got {lam.shape}")
        return lam


@dataclass(frozen=True, eq=False)
class RrsmState:
    k: int
    x: np.ndarray
    p: np.ndarray
    mode: str = ISM
    delta_r: Response | None = None
    fine: Response | None = None

    def __post_init__(self):
        if self.mode not in (ISM, RRSM):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == RRSM and self.delta_r is None:
            raise ValueError("RRSM mode needs a residual")


def response_difference(a: Response, b: Response) -> Response:
    check_same_grid(a.grid, b.grid)
    return Response(a.grid, a.s11 - b.s11, a.s12 - b.s12, a.s21 - b.s21, a.s22 - b.s22)


def calibrate_aux(x_k, fine_r: Response, coarse: CoarseModel, p_init, bounds: Bounds | None = None,
                  channel: ChannelSelector = CALIBRATION_CHANNEL,
                  settings: OptimizerSettings = OptimizerSettings()):
    """Fit the auxiliary vector so the coarse model matches ``fine_r`` at ``x_k``.

    Returns ``(p, residual_norm)``. No regularization is applied.
    """
    check_same_grid(fine_r.grid, coarse.grid)
    x_k = np.asarray(x_k, dtype=float)
    p_init = np.asarray(p_init, dtype=float)
    if bounds is not None and not bounds.contains(p_init, 1e-12):
        raise ValueError("initial aux vector lies outside the aux bounds")
    target = channel.values(fine_r).ravel()

    def residuals(p):
        return target - channel.values(coarse(x_k, p)).ravel()

    cal_settings = OptimizerSettings(settings.max_iterations, settings.gradient_step,
                                     min(settings.convergence_tol, 1e-12), 0.0,
                                     settings.central_differences)
    try:
        rep = least_squares(residuals, p_init, settings=cal_settings, bounds=bounds)
    except OptimizationError as exc:
        raise OptimizationError(f"aux calibration failed: {exc}", p_init) from exc
    return rep.minimizer, float(np.sqrt(rep.objective_value))


def rrsm_response(x, p, state: RrsmState, lam, coarse: CoarseModel) -> Response:
    """Calibrated coarse response plus the weighted frozen residual."""
    rc = coarse(x, p)
    if state.mode == ISM or state.delta_r is None:
        return rc
    dr = state.delta_r
    check_same_grid(rc.grid, dr.grid)
    w = np.asarray(lam, dtype=float)
    if w.ndim == 0:
        w = np.full(rc.grid.m, float(w))
    return Response(rc.grid, rc.s11 + w * dr.s11, rc.s12 + w * dr.s12,
                    rc.s21 + w * dr.s21, rc.s22 + w * dr.s22)


def optimize_calibrated(state: RrsmState, spec: DesignSpec, bounds: Bounds,
                        settings: OptimizerSettings, coarse: CoarseModel, lam=0.5,
                        x_start=None) -> OptReport:
    """Re-optimize the design with the aux vector (and residual) held fixed."""
    x0 = state.x if x_start is None else x_start
    return optimize_design(lambda x: rrsm_response(x, state.p, state, lam, coarse),
                           spec, x0, bounds, settings)


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray
    p: np.ndarray
    mode: str
    calibration_residual: float | None
    fine_objective: float
    surrogate_objective: float | None = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "design": [float(v) for v in self.x],
            "aux": [float(v) for v in self.p],
            "mode": self.mode,
            "calibration_residual": self.calibration_residual,
            "fine_objective": self.fine_objective,
            "surrogate_objective": self.surrogate_objective,
        }


@dataclass
class RunReport:
    records: list[IterationRecord]
    fine_evals: int
    outcome: str
    initial_residual: float
    switch_threshold: float
    fine_responses: list[Response] = field(default_factory=list, repr=False)
    states: list[RrsmState] = field(default_factory=list, repr=False)

    @property
    def rrsm_iterations(self) -> int:
        return sum(1 for s in self.states if s.mode == RRSM)

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "fine_evals": self.fine_evals,
            "rrsm_iterations": self.rrsm_iterations,
            "initial_residual": self.initial_residual,
            "switch_threshold": self.switch_threshold,
            "iterations": [r.to_dict() for r in self.records],
        }


def run_ism_rrsm(coarse: CoarseModel, fine: Callable[[np.ndarray], Response], spec: DesignSpec,
                 x_start, p0, settings: RrsmSettings = RrsmSettings(),
                 opt_settings: OptimizerSettings = OptimizerSettings(),
                 design_bounds: Bounds | None = None) -> RunReport:
    """Fine-model design loop: check, calibrate, re-optimize, repeat.

    The first iteration always uses plain calibration. From then on, if the
    previous calibrated model misses the new fine response by more than the
    switch threshold, residual correction is switched on and stays on.
    Stops when the fine response meets ``spec`` or the fine-evaluation
    budget is spent.
    """
    x = np.asarray(x_start, dtype=float).copy()
    p = np.asarray(p0, dtype=float).copy()
    channel = settings.channel
    aux_bounds = settings.aux_bounds or default_aux_bounds(p0)
    if design_bounds is None:
        design_bounds = Bounds.unbounded(len(x))
    lam = settings.weights(coarse.grid.m)

    fine_counter = getattr(fine, "counter", None)
    start_count = fine_counter.fine_evals if fine_counter is not None else 0
    n_fine = 0

    def call_fine(xx):
        nonlocal n_fine
        n_fine += 1
        return fine(xx)

    fine_r = call_fine(x)
    fine_obj = objective(fine_r, spec)
    initial_residual = response_distance(fine_r, coarse(x, p), channel)
    threshold = (settings.switch_threshold if settings.switch_threshold is not None
                 else settings.switch_fraction * initial_residual)
    records = [IterationRecord(0, x.copy(), p.copy(), ISM, initial_residual, fine_obj)]
    fine_responses = [fine_r]
    states: list[RrsmState] = []
    mode = ISM
    k = 0
    outcome = "budget-exhausted"
    while True:
        if fine_obj <= 0:
            outcome = "spec-satisfied"
            break
        if n_fine >= settings.max_fine_evals:
            break
        if k > 0 and mode == ISM:
            mismatch = response_distance(fine_r, coarse(x, p), channel)
            if mismatch > threshold:
                mode = RRSM
                log.info("iteration %d: calibrated-model mismatch %.4g above %.4g, "
                         "switching to residual correction", k, mismatch, threshold)
        p, residual = calibrate_aux(x, fine_r, coarse, p, aux_bounds, channel, opt_settings)
        delta_r = response_difference(fine_r, coarse(x, p)) if mode == RRSM else None
        state = RrsmState(k, x.copy(), p.copy(), mode, delta_r, fine_r)
        states.append(state)
        rep = optimize_calibrated(state, spec, design_bounds, opt_settings, coarse, lam, x)
        x = rep.minimizer.copy()
        fine_r = call_fine(x)
        fine_obj = objective(fine_r, spec)
        fine_responses.append(fine_r)
        k += 1
        records[-1].calibration_residual = residual
        records.append(IterationRecord(k, x.copy(), p.copy(), mode, None, fine_obj,
                                       rep.objective_value))
        log.info("iteration %d (%s): fine objective %.4g dB, surrogate %.4g dB",
                 k, mode, fine_obj, rep.objective_value)

    fine_evals = n_fine
    if fine_counter is not None:
        fine_evals = fine_counter.fine_evals - start_count
    return RunReport(records, fine_evals, outcome, initial_residual, threshold,
                     fine_responses, states)
