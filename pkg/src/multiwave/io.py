"""File formats: PGM images, field and trace CSV/binary, energy records.

Every reader checks the header it expects; malformed files raise
:class:`FormatError` (a ``ValueError``), missing files the usual ``OSError``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .boundary import SIDES, BoundaryTrace, GammaMask, n_perimeter
from .fields import GridSpec

TRACE_ORDER = "bottom->right->top->left (counterclockwise, each side closed-open)"


class FormatError(ValueError):
    pass


def _scale(field, vmin=None, vmax=None):
    a = np.asarray(field, dtype=float)
    lo = float(np.min(a)) if vmin is None else float(vmin)
    hi = float(np.max(a)) if vmax is None else float(vmax)
    if hi > lo:
        img = np.clip(np.round((a - lo) / (hi - lo) * 255.0), 0, 255)
    else:
        img = np.zeros_like(a)
    return img.astype(np.uint8), lo, hi


def write_pgm(path, field, vmin=None, vmax=None) -> tuple[float, float]:
    """8-bit binary PGM, ``vmin -> 0`` and ``vmax -> 255`` (data range by default).

    Row 0 of the image is the top of the domain (largest ``y``). Returns
    the scale actually used.
    """
    img, lo, hi = _scale(field, vmin, vmax)
    img = img[::-1]
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    return lo, hi


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM back into field orientation (row 0 = bottom)."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5" or int(tokens[3]) != 255:
        raise FormatError("only 8-bit binary PGM (P5, maxval 255) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    body = data[pos + 1:pos + 1 + w * h]
    if len(body) != w * h:
        raise FormatError("truncated PGM")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)[::-1].copy()


def write_png(path, field, vmin=None, vmax=None, cmap="gray") -> tuple[float, float]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    img, lo, hi = _scale(field, vmin, vmax)
    plt.imsave(path, img, cmap=cmap, vmin=0, vmax=255, origin="lower")
    return lo, hi


def _grid_header(grid: GridSpec) -> str:
    return json.dumps(grid.to_dict(), sort_keys=True)


def write_field_csv(path, field, grid: GridSpec) -> None:
    """Row-major CSV, one grid row (fixed ``y``) per line, after a ``#`` header."""
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise FormatError(f"field shape {field.shape} does not match grid {grid.shape}")
    with open(path, "w", newline="") as fh:
        fh.write(f"# field {_grid_header(grid)}\n")
        w = csv.writer(fh)
        for row in field:
            w.writerow([repr(float(v)) for v in row])


def _read_header(fh, tag):
    line = fh.readline()
    if not line.startswith(f"# {tag} "):
        raise FormatError(f"missing '# {tag}' header")
    return json.loads(line[len(tag) + 3:])


def read_field_csv(path) -> tuple[np.ndarray, GridSpec]:
    with open(path, newline="") as fh:
        grid = GridSpec.from_dict(_read_header(fh, "field"))
        rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
    field = np.array(rows)
    if field.shape != grid.shape:
        raise FormatError("field CSV body does not match its header")
    return field, grid


def write_field_binary(path, field, grid: GridSpec) -> None:
    """One JSON header line, then little-endian float64 values in row-major order."""
    field = np.asarray(field, dtype="<f8")
    if field.shape != grid.shape:
        raise FormatError(f"field shape {field.shape} does not match grid {grid.shape}")
    with open(path, "wb") as fh:
        fh.write((_grid_header(grid) + "\n").encode("ascii"))
        fh.write(field.tobytes(order="C"))


def read_field_binary(path) -> tuple[np.ndarray, GridSpec]:
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    grid = GridSpec.from_dict(json.loads(data[:nl]))
    body = np.frombuffer(data[nl + 1:], dtype="<f8")
    if body.size != grid.nx * grid.ny:
        raise FormatError("field binary body does not match its header")
    return body.reshape(grid.shape).copy(), grid


def _trace_meta(trace: BoundaryTrace) -> dict:
    return {"grid": trace.grid.to_dict(), "order": TRACE_ORDER, "sides": list(SIDES),
            "gamma": trace.gamma.flags.astype(int).tolist(), "t_max": trace.gamma.t_max}


def _trace_from_meta(meta, values) -> BoundaryTrace:
    grid = GridSpec.from_dict(meta["grid"])
    gamma = GammaMask(np.array(meta["gamma"], dtype=bool), meta.get("t_max"))
    return BoundaryTrace(grid, values, gamma)


def write_trace_csv(path, trace: BoundaryTrace) -> None:
    """Rows are time levels, columns perimeter nodes; the header records the ordering."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# trace {json.dumps(_trace_meta(trace), sort_keys=True)}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"p{j}" for j in range(n_perimeter(trace.grid))])
        for t, row in zip(trace.grid.t, trace.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def read_trace_csv(path) -> BoundaryTrace:
    with open(path, newline="") as fh:
        meta = _read_header(fh, "trace")
        reader = csv.reader(fh)
        next(reader)
        rows = [[float(v) for v in r[1:]] for r in reader if r]
    return _trace_from_meta(meta, np.array(rows))


def write_trace_binary(path, trace: BoundaryTrace) -> None:
    """Compressed ``.npz`` with the values (float64) and the JSON metadata."""
    with open(path, "wb") as fh:
        np.savez_compressed(fh, values=trace.values,
                            meta=np.array(json.dumps(_trace_meta(trace), sort_keys=True)))


def read_trace_binary(path) -> BoundaryTrace:
    with np.load(path, allow_pickle=False) as z:
        return _trace_from_meta(json.loads(str(z["meta"])), z["values"])


def write_energy_csv(path, energy, grid: GridSpec) -> None:
    """``step, time, energy``; entry ``n`` is the energy between levels ``n`` and ``n + 1``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "time", "energy"])
        for n, e in enumerate(np.asarray(energy)):
            w.writerow([n, repr(float((n + 0.5) * grid.dt)), repr(float(e))])


def write_frames_pgm(directory, fields, every: int = 1, prefix: str = "frame") -> list[Path]:
    """Dump time levels as PGM frames on a common scale."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    fields = np.asarray(fields)
    lo, hi = float(fields.min()), float(fields.max())
    out = []
    for n in range(0, fields.shape[0], every):
        p = d / f"{prefix}_{n:05d}.pgm"
        write_pgm(p, fields[n], lo, hi)
        out.append(p)
    return out
