"""Finite-difference quasi-Newton and Levenberg-Marquardt solvers.

Model evaluations are the cost unit here, so gradients and Jacobians use
forward differences unless ``central`` is requested. Box bounds are
handled by projection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("bound vectors differ in shape")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, n: int) -> Bounds:
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    def project(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 200
    gradient_step: float = 1e-8
    convergence_tol: float = 1e-8
    regularization_weight: float = 1e-6
    central_differences: bool = False

    def __post_init__(self):
        if self.gradient_step <= 0:
            raise ValueError("gradient_step must be positive")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.regularization_weight < 0:
            raise ValueError("regularization_weight must be non-negative")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


@dataclass
class OptReport:
    minimizer: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    objective_evals: int
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "minimizer": [float(v) for v in self.minimizer],
            "objective_value": float(self.objective_value),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "objective_evals": int(self.objective_evals),
            "message": self.message,
        }


class _Counted:
    def __init__(self, fn):
        self.fn = fn
        self.n = 0

    def __call__(self, x):
        self.n += 1
        return self.fn(x)


def _steps(x, step):
    # powers of two keep x + h exact, so only f's own rounding remains
    return 2.0 ** np.round(np.log2(step * np.maximum(np.abs(x), 1.0)))


def fd_gradient(f: Callable, x, step: float = 1e-8, f0: float | None = None,
                central: bool = False, bounds: Bounds | None = None) -> np.ndarray:
    """Finite-difference gradient with per-coordinate step ``step*max(|x_i|, 1)``,
    rounded to the nearest power of two.

    Near an upper bound the forward step is taken backward so the
    perturbed point stays feasible.
    """
    x = np.asarray(x, dtype=float)
    h = _steps(x, step)
    if not central and f0 is None:
        f0 = f(x)
    g = np.empty_like(x)
    for i in range(len(x)):
        hi = h[i]
        if central:
            xp, xm = x.copy(), x.copy()
            xp[i] += hi
            xm[i] -= hi
            fp, fm = f(xp), f(xm)
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise ValueError(f"non-finite objective perturbing coordinate {i}")
            g[i] = (fp - fm) / (xp[i] - xm[i])
            continue
        if bounds is not None and x[i] + hi > bounds.upper[i]:
            hi = -hi
        xp = x.copy()
        xp[i] += hi
        fp = f(xp)
        if not np.isfinite(fp):
            raise ValueError(f"non-finite objective perturbing coordinate {i}")
        g[i] = (fp - f0) / (xp[i] - x[i])
    return g


def fd_jacobian(fun: Callable, x, step: float, r0=None, central: bool = False,
                bounds: Bounds | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if r0 is None:
        r0 = fun(x)
    h = _steps(x, step)
    J = np.empty((len(r0), len(x)))
    for i in range(len(x)):
        hi = h[i]
        if not central and bounds is not None and x[i] + hi > bounds.upper[i]:
            hi = -hi
        xp = x.copy()
        xp[i] += hi
        rp = fun(xp)
        if central:
            xm = x.copy()
            xm[i] -= hi
            J[:, i] = (rp - fun(xm)) / (xp[i] - xm[i])
        else:
            J[:, i] = (rp - r0) / (xp[i] - x[i])
        if not np.all(np.isfinite(J[:, i])):
            raise ValueError(f"non-finite residual perturbing coordinate {i}")
    return J


def _safe(f, x):
    try:
        v = float(f(x))
    except (ValueError, ArithmeticError):
        return np.inf
    return v if np.isfinite(v) else np.inf


def minimize(f: Callable, x0, bounds: Bounds | None = None,
             settings: OptimizerSettings = OptimizerSettings()) -> OptReport:
    """Projected BFGS with finite-difference gradients and Armijo backtracking.

    Stops when the projected gradient's infinity norm drops below
    ``convergence_tol`` or after ``max_iterations``. The returned
    minimizer never has a larger objective than ``x0``.
    """
    fc = _Counted(f)
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    if bounds is None:
        bounds = Bounds.unbounded(n)
    if not bounds.contains(x):
        raise ValueError("starting point lies outside the bounds")
    fx = _safe(fc, x)
    if not np.isfinite(fx):
        raise OptimizationError("objective is not finite at the starting point", x)

    def grad(xx, fxx):
        return fd_gradient(fc, xx, settings.gradient_step, fxx,
                           settings.central_differences, bounds)

    g = grad(x, fx)
    H = np.eye(n)
    scaled = False
    converged = False
    message = "iteration limit reached"
    history = [fx]
    it = 0
    for it in range(1, settings.max_iterations + 1):
        at_lo = (x <= bounds.lower) & (g > 0)
        at_hi = (x >= bounds.upper) & (g < 0)
        free = ~(at_lo | at_hi)
        pg = np.where(free, g, 0.0)
        if np.max(np.abs(pg), initial=0.0) < settings.convergence_tol:
            converged = True
            message = "projected gradient below tolerance"
            it -= 1
            break

        d = np.zeros(n)
        d[free] = -H[np.ix_(free, free)] @ g[free]
        if d @ g >= 0:
            H = np.eye(n)
            d = -pg

        alpha = 1.0
        accepted = False
        for _ in range(60):
            xn = bounds.project(x + alpha * d)
            fn = _safe(fc, xn)
            if fn < np.inf and fn <= fx + 1e-4 * min(g @ (xn - x), 0.0):
                accepted = True
                break
            alpha *= 0.5
        if not accepted or np.array_equal(xn, x):
            message = "line search found no decrease"
            converged = np.max(np.abs(pg)) < 1e3 * settings.convergence_tol
            it -= 1
            break

        try:
            gn = grad(xn, fn)
        except ValueError:
            x, fx = xn, fn
            message = "non-finite gradient at accepted point"
            break
        s, y = xn - x, gn - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                H = (sy / (y @ y)) * np.eye(n)
                scaled = True
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x, fx, g = xn, fn, gn
        history.append(fx)

    return OptReport(x, float(fx), max(it, 0), converged, fc.n, message, history)


def least_squares(residuals: Callable, theta0, reg_target=None,
                  settings: OptimizerSettings = OptimizerSettings(),
                  bounds: Bounds | None = None, jacobian_fn: Callable | None = None) -> OptReport:
    """Levenberg-Marquardt on ``|r(theta)|^2 + w*|theta - target|^2``.

    Marquardt damping ``mu*diag(J'J)`` starts at 1e-3 and moves by factors
    of ten. Stops when an accepted step lowers the cost by less than
    ``convergence_tol`` relative, when the cost is exactly zero, or after
    ``max_iterations``. ``jacobian_fn(theta, r)`` may replace the built-in
    forward-difference Jacobian (it must still be a finite-difference one).
    """
    w = settings.regularization_weight
    rc = _Counted(residuals)
    theta = np.asarray(theta0, dtype=float).copy()
    n = len(theta)
    if bounds is None:
        bounds = Bounds.unbounded(n)
    theta = bounds.project(theta)
    target = None if reg_target is None else np.asarray(reg_target, dtype=float)
    sw = np.sqrt(w) if (target is not None and w > 0) else 0.0

    def full(th, r=None):
        if r is None:
            r = np.asarray(rc(th), dtype=float)
        if sw:
            return np.concatenate([r, sw * (th - target)])
        return r

    try:
        r = full(theta)
    except (ValueError, ArithmeticError) as exc:
        raise OptimizationError(f"residuals fail at the starting point: {exc}", theta) from exc
    if not np.all(np.isfinite(r)):
        raise OptimizationError("residuals are not finite at the starting point", theta)
    cost = float(r @ r)
    mu = 1e-3
    converged = cost == 0.0
    message = "zero residual" if converged else "iteration limit reached"
    history = [cost]
    it = 0
    while not converged and it < settings.max_iterations:
        it += 1
        if jacobian_fn is not None:
            J = jacobian_fn(theta, r[:len(r) - (n if sw else 0)])
            if sw:
                J = np.vstack([J, sw * np.eye(n)])
        else:
            J = fd_jacobian(full, theta, settings.gradient_step, r,
                            settings.central_differences, bounds)
        JTJ = J.T @ J
        grad = J.T @ r
        diag = np.diag(JTJ).copy()
        diag[diag <= 0] = 1.0
        stepped = False
        while mu < 1e20:
            try:
                delta = np.linalg.solve(JTJ + mu * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                mu *= 10
                continue
            tn = bounds.project(theta + delta)
            try:
                rn = full(tn)
                cn = float(rn @ rn)
            except (ValueError, ArithmeticError):
                cn = np.inf
            if np.isfinite(cn) and cn < cost:
                stepped = True
                break
            mu *= 10
        if not stepped:
            converged = True
            message = "no further decrease possible"
            it -= 1
            break
        rel = (cost - cn) / cost
        theta, r, cost = tn, rn, cn
        mu = max(mu / 10, 1e-15)
        history.append(cost)
        if cost == 0.0:
            converged, message = True, "zero residual"
        elif rel < settings.convergence_tol:
            converged, message = True, "relative cost decrease below tolerance"

    return OptReport(theta, cost, it, converged, rc.n, message, history)
