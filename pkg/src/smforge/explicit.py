"""Explicit space mapping: surrogate ``A*R_c(B*x + c) + d`` built on a star base set."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .design import optimize_design
from .models import CoarseModel, ModelError
from .optimize import (Bounds, OptimizationError, OptimizerSettings, OptReport,
                       least_squares)
from .response import (ChannelSelector, FrequencyGrid, Response, check_same_grid,
                       make_grid, response_distance)
from .specs import DesignSpec


class MappingError(ValueError):
    def __init__(self, msg, x=None, mapped=None):
        super().__init__(msg)
        self.x = x
        self.mapped = mapped


@dataclass(frozen=True, eq=False)
class RegionOfInterest:
    """Box ``[lower, upper]`` around a reference design.

    Stored by its bounds so configured intervals survive exactly; the
    reference defaults to the box centre.
    """

    lower: np.ndarray
    upper: np.ndarray
    reference: np.ndarray | None = None

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("region bounds must be equal-length vectors")
        if np.any(hi <= lo):
            raise ValueError("region half-widths must be positive")
        ref = (lo + hi) / 2 if self.reference is None else np.asarray(self.reference, dtype=float)
        if ref.shape != lo.shape or np.any(ref < lo) or np.any(ref > hi):
            raise ValueError("reference point lies outside the region")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "reference", ref)

    @classmethod
    def around(cls, reference, delta) -> RegionOfInterest:
        ref = np.asarray(reference, dtype=float)
        delta = np.asarray(delta, dtype=float)
        if np.any(delta <= 0):
            raise ValueError("region half-widths must be positive")
        return cls(ref - delta, ref + delta, ref)

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def delta(self) -> np.ndarray:
        return (self.upper - self.lower) / 2

    def bounds(self) -> Bounds:
        return Bounds(self.lower, self.upper)

    def contains(self, x, tol: float = 1e-12) -> bool:
        return self.bounds().contains(x, tol)

    def random_points(self, count: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.uniform(self.lower, self.upper, size=(count, self.n))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "reference": self.reference.tolist()}


@dataclass(frozen=True, eq=False)
class BaseSet:
    points: np.ndarray
    kinds: tuple[str, ...]

    def __len__(self):
        return len(self.points)


def star_base_set(region: RegionOfInterest, include_corners: bool = False) -> BaseSet:
    """Reference point, then ``x0 -/+ delta_i e_i`` per axis, then optional corners.

    Star points use the reference and half-widths; corner sign patterns
    follow a binary counter with axis 0 as the most significant digit
    (all-minus first).
    """
    x0, delta = region.reference, region.delta
    n = region.n
    pts, kinds = [x0.copy()], ["reference"]
    for i in range(n):
        for sign, kind in ((-1.0, "star-"), (1.0, "star+")):
            p = x0.copy()
            p[i] = x0[i] + sign * delta[i]
            p = np.clip(p, region.lower, region.upper)
            pts.append(p)
            kinds.append(kind)
    if include_corners:
        for signs in itertools.product((-1.0, 1.0), repeat=n):
            pts.append(np.clip(x0 + np.array(signs) * delta, region.lower, region.upper))
            kinds.append("corner")
    return BaseSet(np.array(pts), tuple(kinds))


@dataclass(frozen=True, eq=False)
class MappingSet:
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    d: np.ndarray
    grid: FrequencyGrid
    channel: ChannelSelector = field(default_factory=ChannelSelector)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        c = np.asarray(self.c, dtype=float)
        d = np.asarray(self.d, dtype=float)
        m, n = self.grid.m, len(c)
        if A.shape != (m,) or d.shape != (m,):
            raise ValueError(f"A and d need {m} entries, got {A.shape} and {d.shape}")
        if B.shape != (n, n):
            raise ValueError(f"B must be {n}x{n}, got {B.shape}")
        for name, v in (("A", A), ("B", B), ("c", c), ("d", d)):
            object.__setattr__(self, name, v)

    @classmethod
    def identity(cls, n: int, grid: FrequencyGrid,
                 channel: ChannelSelector = ChannelSelector()) -> MappingSet:
        return cls(np.ones(grid.m), np.eye(n), np.zeros(n), np.zeros(grid.m),
                   grid, channel)

    @property
    def n(self) -> int:
        return len(self.c)

    def map_input(self, x) -> np.ndarray:
        return self.B @ np.asarray(x, dtype=float) + self.c

    def pack(self) -> np.ndarray:
        return np.concatenate([self.A, self.B.ravel(), self.c, self.d])

    def unpack(self, theta) -> MappingSet:
        m, n = self.grid.m, self.n
        theta = np.asarray(theta, dtype=float)
        A = theta[:m]
        B = theta[m:m + n * n].reshape(n, n)
        c = theta[m + n * n:m + n * n + n]
        d = theta[m + n * n + n:]
        return MappingSet(A, B, c, d, self.grid, self.channel)

    def to_dict(self) -> dict:
        return {
            "channel": self.channel.to_dict(),
            "grid": self.grid.to_dict(),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "c": self.c.tolist(),
            "d": self.d.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> MappingSet:
        g = data["grid"]
        ch = data["channel"]
        return cls(np.array(data["A"]), np.array(data["B"]), np.array(data["c"]),
                   np.array(data["d"]), make_grid(g["f_min"], g["f_max"], g["step"]),
                   ChannelSelector(tuple(ch["channels"]), ch["representation"]))


def _coarse_at(coarse: CoarseModel, xc, p, x=None) -> Response:
    if not np.all(np.isfinite(xc)) or np.any(xc <= 0):
        raise MappingError(f"mapped point {xc} is not a physical design (from x = {x})", x, xc)
    try:
        return coarse(xc, p)
    except ModelError as exc:
        raise MappingError(f"coarse model rejects mapped point {xc} (from x = {x}): {exc}",
                           x, xc) from exc


def _output_map(values: np.ndarray, mapping: MappingSet) -> np.ndarray:
    return mapping.A[:, None] * values + mapping.d[:, None]


def surrogate_eval(x, mapping: MappingSet, coarse: CoarseModel, p=None) -> np.ndarray:
    """Surrogate channel values ``A_j*y_j + d_j`` at the input-mapped point."""
    check_same_grid(coarse.grid, mapping.grid)
    xc = mapping.map_input(x)
    rc = _coarse_at(coarse, xc, p, np.asarray(x, dtype=float))
    return _output_map(mapping.channel.values(rc), mapping)


def surrogate_response(x, mapping: MappingSet, coarse: CoarseModel, p=None) -> Response:
    """Full response of the surrogate: mapped channels replaced, others taken
    from the coarse model at the input-mapped point."""
    check_same_grid(coarse.grid, mapping.grid)
    xc = mapping.map_input(x)
    rc = _coarse_at(coarse, xc, p, np.asarray(x, dtype=float))
    return mapping.channel.apply(rc, _output_map(mapping.channel.values(rc), mapping))


@dataclass
class SurrogateReport:
    """Errors of coarse and surrogate against fine responses.

    Base errors are filled by extraction, test errors by validation.
    """

    channel: ChannelSelector
    base_points: np.ndarray | None = None
    base_before: np.ndarray | None = None
    base_after: np.ndarray | None = None
    test_points: np.ndarray | None = None
    test_coarse: np.ndarray | None = None
    test_surrogate: np.ndarray | None = None
    extraction: OptReport | None = None
    # per-point responses kept so every error can be recomputed
    responses: dict = field(default_factory=dict, repr=False)

    def summary(self) -> dict:
        out = {}
        for name in ("base_before", "base_after", "test_coarse", "test_surrogate"):
            v = getattr(self, name)
            if v is not None and len(v):
                out[name] = {"max": float(np.max(v)), "mean": float(np.mean(v)),
                             "per_point": [float(e) for e in v]}
        return out

    def to_dict(self) -> dict:
        out = {"channel": self.channel.to_dict(), "errors": self.summary()}
        if self.extraction is not None:
            out["extraction"] = self.extraction.to_dict()
        return out

    def error_table(self, which: str) -> str:
        """CSV of per-frequency error moduli |surrogate - fine| or |coarse - fine|."""
        key = {"base": "base", "test": "test"}[which]
        rows = self.responses.get(key + "_errors")
        if rows is None:
            raise ValueError(f"no {which} errors recorded")
        grid, table = rows
        header = ["freq_ghz"] + [f"{kind}_{k}" for kind in ("coarse", "surrogate")
                                 for k in range(table.shape[2])]
        lines = [",".join(header)]
        for j, f in enumerate(grid.points):
            vals = [repr(float(f))] + [repr(float(v)) for v in table[j].ravel()]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def _error_moduli(fine, other, channel):
    # per frequency modulus of the residual over the selected entries
    diff = channel.values(fine) - channel.values(other)
    return np.sqrt(np.sum(diff**2, axis=1))


def extract_mapping(base: BaseSet, fine_responses, coarse: CoarseModel, p=None,
                    channel: ChannelSelector = ChannelSelector(),
                    settings: OptimizerSettings = OptimizerSettings(),
                    initial: MappingSet | None = None):
    """Fit ``(A, B, c, d)`` so the surrogate matches all base responses at once.

    Squared residuals on ``channel`` are summed over the base set and
    regularized toward the identity mapping; the search starts at identity.
    Returns the mapping and a report with per-point errors before and after.
    """
    points = np.asarray(base.points if isinstance(base, BaseSet) else base, dtype=float)
    fine_responses = list(fine_responses)
    if len(fine_responses) != len(points):
        raise ValueError(f"{len(points)} base points but {len(fine_responses)} fine responses")
    grid = fine_responses[0].grid
    for r in fine_responses:
        check_same_grid(r.grid, grid)
    check_same_grid(coarse.grid, grid)
    n = points.shape[1]
    ident = MappingSet.identity(n, grid, channel)
    start = ident if initial is None else initial
    fine_vals = [channel.values(r) for r in fine_responses]

    cache: dict[bytes, np.ndarray] = {}

    def coarse_vals(xc):
        key = xc.tobytes()
        v = cache.get(key)
        if v is None:
            if len(cache) > 20000:
                cache.clear()
            v = channel.values(_coarse_at(coarse, xc, p))
            cache[key] = v
        return v

    def residuals(theta):
        mp = ident.unpack(theta)
        out = []
        for x, fv in zip(points, fine_vals):
            out.append((fv - _output_map(coarse_vals(mp.map_input(x)), mp)).ravel())
        return np.concatenate(out)

    coarse_before = [coarse(x, p) for x in points]
    before = np.array([response_distance(f, c, channel)
                       for f, c in zip(fine_responses, coarse_before)])
    try:
        rep = least_squares(residuals, start.pack(), reg_target=ident.pack(), settings=settings)
    except OptimizationError as exc:
        raise OptimizationError(f"parameter extraction failed: {exc}", exc.best) from exc
    mapping = ident.unpack(rep.minimizer)

    sur = [surrogate_response(x, mapping, coarse, p) for x in points]
    after = np.array([response_distance(f, s, channel) for f, s in zip(fine_responses, sur)])
    report = SurrogateReport(channel, base_points=points, base_before=before, base_after=after,
                             extraction=rep)
    report.responses.update(base_fine=fine_responses, base_coarse=coarse_before,
                            base_surrogate=sur)
    report.responses["base_errors"] = (grid, np.stack(
        [np.stack([_error_moduli(f, c, channel), _error_moduli(f, s, channel)])
         for f, c, s in zip(fine_responses, coarse_before, sur)], axis=-1).transpose(1, 0, 2))
    return mapping, report


def interpolate_output_mapping(mapping: MappingSet, dense: FrequencyGrid) -> MappingSet:
    """Piecewise-linear interpolation of ``A`` and ``d`` onto ``dense``; no extrapolation."""
    g = mapping.grid
    tol = 1e-12 * max(abs(g.f_max), 1.0)
    if dense.f_min < g.f_min - tol or dense.f_max > g.f_max + tol:
        raise ValueError(
            f"grid {dense.f_min}-{dense.f_max} GHz extends beyond the anchored range "
            f"{g.f_min}-{g.f_max} GHz")
    f = np.clip(dense.points, g.f_min, g.f_max)
    A = np.interp(f, g.points, mapping.A)
    d = np.interp(f, g.points, mapping.d)
    return MappingSet(A, mapping.B, mapping.c, d, dense, mapping.channel)


def validate_surrogate(mapping: MappingSet, test_points, fine_responses, coarse: CoarseModel,
                       p=None, channel: ChannelSelector | None = None,
                       report: SurrogateReport | None = None) -> SurrogateReport:
    """Coarse-vs-fine and surrogate-vs-fine errors at test points."""
    channel = mapping.channel if channel is None else channel
    test_points = np.asarray(test_points, dtype=float)
    fine_responses = list(fine_responses)
    if len(test_points) == 0:
        raise ValueError("no test points given")
    if len(fine_responses) != len(test_points):
        raise ValueError(f"{len(test_points)} test points but {len(fine_responses)} fine responses")
    for r in fine_responses:
        check_same_grid(r.grid, mapping.grid)
    cr = [coarse(x, p) for x in test_points]
    sr = [surrogate_response(x, mapping, coarse, p) for x in test_points]
    if report is None:
        report = SurrogateReport(channel)
    report.test_points = test_points
    report.test_coarse = np.array([response_distance(f, c, channel)
                                   for f, c in zip(fine_responses, cr)])
    report.test_surrogate = np.array([response_distance(f, s, channel)
                                      for f, s in zip(fine_responses, sr)])
    report.responses.update(test_fine=fine_responses, test_coarse=cr, test_surrogate=sr)
    report.responses["test_errors"] = (mapping.grid, np.stack(
        [np.stack([_error_moduli(f, c, channel), _error_moduli(f, s, channel)])
         for f, c, s in zip(fine_responses, cr, sr)], axis=-1).transpose(1, 0, 2))
    return report


def optimize_surrogate(mapping: MappingSet, spec: DesignSpec, region: RegionOfInterest,
                       settings: OptimizerSettings, coarse: CoarseModel, p=None,
                       x_start=None, dense: FrequencyGrid | None = None) -> OptReport:
    """Minimax design of the surrogate inside the region of interest.

    With ``dense`` the output mapping is interpolated onto that grid first
    and the coarse model is evaluated there.
    """
    if dense is not None:
        mapping = interpolate_output_mapping(mapping, dense)
        coarse = coarse.on_grid(dense)
    x0 = region.reference if x_start is None else x_start
    return optimize_design(lambda x: surrogate_response(x, mapping, coarse, p), spec, x0,
                           region.bounds(), settings)
