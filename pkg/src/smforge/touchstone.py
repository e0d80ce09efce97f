"""Touchstone v1 two-port (.s2p) reading and writing."""

from __future__ import annotations

import os

import numpy as np

from .response import Response, grid_from_points

_UNITS = {"HZ": 1e-9, "KHZ": 1e-6, "MHZ": 1e-3, "GHZ": 1.0}


class TouchstoneError(ValueError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def _parse_option_line(tokens, path, lineno):
    # "# <unit> S <RI|MA|DB> R <z_ref>"
    toks = [t.upper() for t in tokens]
    if len(toks) != 5 or toks[0] not in _UNITS or toks[1] != "S" \
            or toks[2] not in ("RI", "MA", "DB") or toks[3] != "R":
        raise TouchstoneError(path, lineno, f"malformed option line: {' '.join(tokens)!r}")
    try:
        z_ref = float(tokens[4])
    except ValueError:
        raise TouchstoneError(path, lineno, f"bad reference impedance {tokens[4]!r}") from None
    return _UNITS[toks[0]], toks[2], z_ref


def _to_complex(a, b, fmt):
    if fmt == "RI":
        return complex(a, b)
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    ang = np.deg2rad(b)
    return complex(mag * np.cos(ang), mag * np.sin(ang))


def load_touchstone(path) -> Response:
    """Read a 2-port Touchstone v1 file onto a uniform grid (GHz)."""
    option = None
    freqs, rows = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("!", 1)[0].strip()
            if not line:
                continue
            if line.startswith("#"):
                if option is not None:
                    raise TouchstoneError(path, lineno, "duplicate option line")
                option = _parse_option_line(line[1:].split(), path, lineno)
                continue
            if option is None:
                raise TouchstoneError(path, lineno, "data before option line")
            tokens = line.split()
            if len(tokens) != 9:
                raise TouchstoneError(path, lineno, f"expected 9 columns, found {len(tokens)}")
            try:
                vals = [float(t) for t in tokens]
            except ValueError as exc:
                raise TouchstoneError(path, lineno, str(exc)) from None
            scale, fmt, _ = option
            freqs.append(vals[0] * scale)
            rows.append([_to_complex(vals[k], vals[k + 1], fmt) for k in (1, 3, 5, 7)])
    if option is None:
        raise TouchstoneError(path, 0, "missing option line")
    if len(rows) < 2:
        raise TouchstoneError(path, 0, "need at least two frequency points")
    try:
        grid = grid_from_points(freqs)
    except ValueError as exc:
        raise TouchstoneError(path, 0, str(exc)) from None
    data = np.array(rows)
    # column order in the file is s11 s21 s12 s22
    return Response(grid, s11=data[:, 0], s21=data[:, 1], s12=data[:, 2], s22=data[:, 3])


def write_touchstone(r: Response, path, z_ref: float = 50.0) -> None:
    lines = [f"# GHZ S RI R {z_ref!r}"]
    for j, f in enumerate(r.grid.points):
        vals = [f]
        for c in (r.s11, r.s21, r.s12, r.s22):
            vals += [c[j].real, c[j].imag]
        lines.append(" ".join(repr(float(v)) for v in vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def touchstone_dir_model(directory):
    """Index a directory of ``.s2p`` files by design vector.

    The directory holds ``designs.json`` mapping file names to design
    vectors. Returns a lookup function raising ``KeyError`` for a design
    that has no file, naming the design so it can be simulated externally.
    """
    import json

    with open(os.path.join(directory, "designs.json")) as fh:
        index = json.load(fh)
    table = [(np.asarray(x, dtype=float), os.path.join(directory, name))
             for name, x in sorted(index.items())]

    def lookup(x):
        x = np.asarray(x, dtype=float)
        for xi, fname in table:
            if xi.shape == x.shape and np.allclose(xi, x, rtol=0, atol=1e-9):
                return load_touchstone(fname)
        raise KeyError(f"no Touchstone file for design {x.tolist()} in {directory}")

    return lookup, [x for x, _ in table]
