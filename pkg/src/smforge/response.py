"""Frequency grids, two-port responses and response metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CHANNELS = ("S11", "S12", "S21", "S22")
REPRESENTATIONS = ("db", "ri")

CSV_HEADER = (
    "freq_ghz",
    "s11_re", "s11_im",
    "s12_re", "s12_im",
    "s21_re", "s21_im",
    "s22_re", "s22_im",
)


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Uniform frequency grid in GHz, stored explicitly."""

    f_min: float
    f_max: float
    step: float
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, FrequencyGrid):
            return NotImplemented
        return (self.f_min == other.f_min and self.f_max == other.f_max
                and self.step == other.step
                and np.array_equal(self.points, other.points))

    def __hash__(self):
        return hash((self.f_min, self.f_max, self.step, self.m))

    def to_dict(self) -> dict:
        return {"f_min": self.f_min, "f_max": self.f_max, "step": self.step}


def make_grid(f_min: float, f_max: float, step: float) -> FrequencyGrid:
    """Build a uniform grid from ``f_min`` to ``f_max`` inclusive.

    The span must be an integral number of steps, to within 1e-9 plus the
    rounding error of the endpoints themselves; no silent rounding of a
    ragged span is done.
    """
    if not f_min < f_max:
        raise ValueError(f"f_min must be below f_max, got {f_min} >= {f_max}")
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    ratio = (f_max - f_min) / step
    n = round(ratio)
    tol = 1e-9 + 4 * np.finfo(float).eps * max(abs(f_min), abs(f_max)) / step
    if abs(ratio - n) > tol or n < 1:
        raise ValueError(
            f"span {f_max - f_min} GHz is not an integral number of {step} GHz steps "
            f"(ratio {ratio!r})")
    points = f_min + step * np.arange(n + 1, dtype=float)
    points[-1] = f_max
    return FrequencyGrid(float(f_min), float(f_max), float(step), points)


def grid_from_points(freqs: Sequence[float], rtol: float = 1e-9) -> FrequencyGrid:
    """Recover a uniform grid from explicit frequencies (e.g. a Touchstone column)."""
    f = np.asarray(freqs, dtype=float)
    if f.ndim != 1 or len(f) < 2:
        raise ValueError("need at least two frequency points")
    d = np.diff(f)
    step = (f[-1] - f[0]) / (len(f) - 1)
    if step <= 0 or np.max(np.abs(d - step)) > rtol * max(abs(f[-1]), 1.0):
        raise ValueError("frequency points are not uniformly spaced")
    return FrequencyGrid(float(f[0]), float(f[-1]), float(step), f.copy())


def to_db(v: complex) -> float:
    """Return ``20*log10(|v|)``; ``-inf`` for an exact zero."""
    a = abs(v)
    if a == 0:
        return -math.inf
    return 20.0 * math.log10(a)


def to_db_array(v) -> np.ndarray:
    a = np.abs(np.asarray(v))
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(a)


@dataclass(frozen=True, eq=False)
class Response:
    """Complex two-port scattering data sampled on a grid."""

    grid: FrequencyGrid
    s11: np.ndarray
    s12: np.ndarray
    s21: np.ndarray
    s22: np.ndarray

    def __post_init__(self):
        m = self.grid.m
        for name in ("s11", "s12", "s21", "s22"):
            arr = np.array(getattr(self, name), dtype=complex)
            if arr.shape != (m,):
                raise ValueError(f"{name} has shape {arr.shape}, grid has {m} points")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def channel(self, name: str) -> np.ndarray:
        try:
            return getattr(self, name.lower())
        except AttributeError:
            raise ValueError(f"unknown channel {name!r}; expected one of {CHANNELS}") from None

    def db(self, name: str) -> np.ndarray:
        return to_db_array(self.channel(name))

    def replace(self, **channels) -> Response:
        data = {c: self.channel(c) for c in ("s11", "s12", "s21", "s22")}
        for k, v in channels.items():
            data[k.lower()] = v
        return Response(self.grid, **data)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for j, f in enumerate(self.grid.points):
            row = [repr(float(f))]
            for c in (self.s11, self.s12, self.s21, self.s22):
                row += [repr(float(c[j].real)), repr(float(c[j].imag))]
            w.writerow(row)
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> Response:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValueError("unexpected response CSV header")
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        grid = grid_from_points(data[:, 0])
        ch = [data[:, 1 + 2 * i] + 1j * data[:, 2 + 2 * i] for i in range(4)]
        return cls(grid, *ch)


@dataclass(frozen=True)
class ChannelSelector:
    """Which channels enter a residual, and in what representation.

    ``db`` gives one entry per point and channel; ``ri`` gives two (real
    and imaginary part). Several channels are stacked in the given order.
    """

    channels: tuple[str, ...] = ("S12",)
    representation: str = "db"

    def __post_init__(self):
        chans = (self.channels,) if isinstance(self.channels, str) else tuple(self.channels)
        chans = tuple(c.upper() for c in chans)
        if not chans:
            raise ValueError("at least one channel is required")
        for c in chans:
            if c not in CHANNELS:
                raise ValueError(f"unknown channel {c!r}; expected one of {CHANNELS}")
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of {REPRESENTATIONS}")
        object.__setattr__(self, "channels", chans)

    @property
    def entries_per_point(self) -> int:
        return len(self.channels) * (2 if self.representation == "ri" else 1)

    def values(self, r: Response) -> np.ndarray:
        """Channel values as an ``(m, entries_per_point)`` real array."""
        cols = []
        for c in self.channels:
            v = r.channel(c)
            if self.representation == "db":
                cols.append(to_db_array(v))
            else:
                cols += [v.real, v.imag]
        return np.column_stack(cols)

    def apply(self, r: Response, values: np.ndarray) -> Response:
        """Inverse of :meth:`values`: write channel values back into ``r``.

        For dB the phase of the original channel is kept.
        """
        values = np.asarray(values, dtype=float).reshape(r.grid.m, self.entries_per_point)
        out = {}
        k = 0
        for c in self.channels:
            orig = r.channel(c)
            if self.representation == "db":
                # scale by the level change so unchanged levels stay bit-identical
                zero = orig == 0
                old = np.where(zero, 0.0, to_db_array(np.where(zero, 1.0, orig)))
                scale = 10.0 ** ((values[:, k] - old) / 20.0)
                out[c] = np.where(zero, scale + 0j, orig * scale)
                k += 1
            else:
                out[c] = values[:, k] + 1j * values[:, k + 1]
                k += 2
        return r.replace(**out)

    def to_dict(self) -> dict:
        return {"channels": list(self.channels), "representation": self.representation}


def check_same_grid(a: FrequencyGrid, b: FrequencyGrid) -> None:
    if a != b:
        raise GridMismatchError(
            f"grid mismatch: {a.f_min}-{a.f_max} GHz step {a.step} ({a.m} pts) "
            f"vs {b.f_min}-{b.f_max} GHz step {b.step} ({b.m} pts)")


def residual_vector(a: Response, b: Response, sel: ChannelSelector) -> np.ndarray:
    check_same_grid(a.grid, b.grid)
    va, vb = sel.values(a), sel.values(b)
    # equal entries (including -inf dB for exact zeros) contribute nothing
    with np.errstate(invalid="ignore"):
        return np.where(va == vb, 0.0, va - vb).ravel()


def response_distance(a: Response, b: Response, sel: ChannelSelector) -> float:
    """Euclidean norm of the selected channel residual between two responses."""
    return float(np.linalg.norm(residual_vector(a, b, sel)))


def stack_residuals(pairs: Iterable[tuple[Response, Response]], sel: ChannelSelector) -> np.ndarray:
    return np.concatenate([residual_vector(a, b, sel) for a, b in pairs])
