"""Minimax design optimization over any response function."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .optimize import Bounds, OptimizerSettings, OptReport, minimize
from .response import Response
from .specs import DesignSpec, objective, soft_objective

# soft-max temperatures in dB, coarse to fine
ANNEAL_TAUS = (1.0, 0.3, 0.1, 0.03, 0.01)


def optimize_design(response_fn: Callable[[np.ndarray], Response], spec: DesignSpec, x0,
                    bounds: Bounds, settings: OptimizerSettings = OptimizerSettings(),
                    taus=ANNEAL_TAUS) -> OptReport:
    """Minimize the minimax spec violation of ``response_fn`` inside ``bounds``.

    The max over in-band points is not differentiable, so the quasi-Newton
    search runs on a log-sum-exp surrogate whose temperature shrinks stage
    by stage. The reported value is the exact minimax objective, and the
    best stage end point (or ``x0``) is returned.
    """
    x0 = bounds.project(np.asarray(x0, dtype=float))

    def true_obj(x):
        return objective(response_fn(x), spec)

    best_x, best_f = x0, true_obj(x0)
    evals, iters = 1, 0
    x = x0
    converged = False
    history = [best_f]
    for tau in taus:
        rep = minimize(lambda xx, t=tau: soft_objective(response_fn(xx), spec, t),
                       x, bounds, settings)
        evals += rep.objective_evals + 1
        iters += rep.iterations
        x = rep.minimizer
        fx = true_obj(x)
        history.append(fx)
        converged = rep.converged
        if fx < best_f:
            best_x, best_f = x, fx
    return OptReport(best_x, best_f, iters, converged, evals,
                     "annealed minimax search", history)
