"""Field serialization: CSV tables and a flat binary checkpoint.

CSV
    A leading ``#`` line carries the grid, e.g.
    ``# radial dim=3 n=4096 r_max=20 scheme=auto``; then a header and one row
    per node.  Radial files have columns ``r,u``; Cartesian files ``x,y,z,u``
    in row-major (C) order.  Floats use the shortest round-trip repr.

Binary checkpoint (little-endian)
    ========  =======  ==============================================
    offset    type     content
    ========  =======  ==============================================
    0         8 bytes  magic ``CHQFIELD``
    8         uint32   format version (1)
    12        uint32   grid kind: 0 radial, 1 Cartesian
    16        ...      grid block
    ...       uint64   length L of the metadata block
    ...       L bytes  metadata, UTF-8 JSON with sorted keys
    ...       float64  samples, row-major, count = prod(grid shape)
    ========  =======  ==============================================

    Radial grid block: uint64 dim, uint64 n, float64 r_max, uint32 scheme
    (0 auto, 1 spectral, 2 fd), uint32 padding.  Cartesian grid block:
    3 x uint64 node counts, 3 x float64 half widths, 3 x float64 centre,
    uint32 derivative (0 spectral, 1 fd), uint32 padding.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .fields import CartesianGrid, Field, RadialGrid

__all__ = [
    "write_field_csv",
    "read_field_csv",
    "save_checkpoint",
    "load_checkpoint",
    "save_minimizer",
    "load_minimizer",
    "fmt",
]

MAGIC = b"CHQFIELD"
VERSION = 1
_SCHEMES = ("auto", "spectral", "fd")
_DERIVS = ("spectral", "fd")


def fmt(x) -> str:
    """Shortest round-trip text for a float (deterministic across runs)."""
    return repr(float(x))


def _grid_line(grid) -> str:
    if isinstance(grid, RadialGrid):
        return f"# radial dim={grid.dim} n={grid.n} r_max={fmt(grid.r_max)} scheme={grid.scheme}"
    n = ",".join(str(m) for m in grid.n)
    L = ",".join(fmt(v) for v in grid.half_width)
    c = ",".join(fmt(v) for v in grid.center)
    return f"# cartesian n={n} half_width={L} center={c} derivative={grid.derivative}"


def _parse_grid_line(line: str):
    parts = line.lstrip("#").split()
    kind, kv = parts[0], dict(p.split("=", 1) for p in parts[1:])
    if kind == "radial":
        return RadialGrid(int(kv["dim"]), int(kv["n"]), float(kv["r_max"]), kv.get("scheme", "auto"))
    if kind == "cartesian":
        return CartesianGrid(
            tuple(int(v) for v in kv["n"].split(",")),
            tuple(float(v) for v in kv["half_width"].split(",")),
            tuple(float(v) for v in kv["center"].split(",")),
            kv.get("derivative", "spectral"),
        )
    raise ValueError(f"unknown grid kind {kind!r} in CSV header")


def write_field_csv(path, u: Field) -> None:
    buf = io.StringIO()
    buf.write(_grid_line(u.grid) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(u.grid, RadialGrid):
        w.writerow(["r", "u"])
        w.writerows((fmt(r), fmt(v)) for r, v in zip(u.grid.r, u.values))
    else:
        w.writerow(["x", "y", "z", "u"])
        ax = u.grid.axes()
        vals = u.values
        for i, x in enumerate(ax[0]):
            for j, y in enumerate(ax[1]):
                for k, z in enumerate(ax[2]):
                    w.writerow((fmt(x), fmt(y), fmt(z), fmt(vals[i, j, k])))
    Path(path).write_text(buf.getvalue())


def read_field_csv(path) -> Field:
    with open(path, newline="") as f:
        first = f.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing grid header line")
        grid = _parse_grid_line(first)
        rows = list(csv.reader(f))
    vals = np.array([float(r[-1]) for r in rows[1:]])
    return Field(grid, vals.reshape(grid.shape))


def _grid_block(grid) -> tuple[int, bytes]:
    if isinstance(grid, RadialGrid):
        return 0, struct.pack("<QQdII", grid.dim, grid.n, grid.r_max, _SCHEMES.index(grid.scheme), 0)
    return 1, struct.pack("<3Q3d3dII", *grid.n, *grid.half_width, *grid.center,
                          _DERIVS.index(grid.derivative), 0)


def save_checkpoint(path, u: Field, meta: dict | None = None) -> None:
    kind, block = _grid_block(u.grid)
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    payload = np.ascontiguousarray(u.values, dtype="<f8").tobytes()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, kind))
        f.write(block)
        f.write(struct.pack("<Q", len(meta_bytes)))
        f.write(meta_bytes)
        f.write(payload)


def load_checkpoint(path) -> tuple[Field, dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a field checkpoint")
    version, kind = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    if kind == 0:
        dim, n, r_max, scheme, _ = struct.unpack_from("<QQdII", data, pos)
        pos += struct.calcsize("<QQdII")
        grid = RadialGrid(int(dim), int(n), r_max, _SCHEMES[scheme])
    elif kind == 1:
        vals = struct.unpack_from("<3Q3d3dII", data, pos)
        pos += struct.calcsize("<3Q3d3dII")
        grid = CartesianGrid(tuple(int(v) for v in vals[:3]), vals[3:6], vals[6:9], _DERIVS[vals[9]])
    else:
        raise ValueError(f"{path}: unknown grid kind {kind}")
    (mlen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    meta = json.loads(data[pos : pos + mlen].decode())
    pos += mlen
    count = int(np.prod(grid.shape))
    if len(data) - pos != 8 * count:
        raise ValueError(f"{path}: payload holds {(len(data) - pos) // 8} samples, grid needs {count}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(grid.shape)
    return Field(grid, values), meta


_MINIMIZER_SCALARS = ("gamma", "a", "well", "scale", "energy", "multiplier", "potential_energy", "kinetic",
                      "hartree", "umax", "tie", "ground_mass", "reference_energy", "gap", "residual", "steps")


def save_minimizer(path, m) -> None:
    """Checkpoint a TrappedMinimizer: w on its rescaled lattice plus the scalars in the metadata."""
    meta = {k: getattr(m, k) for k in _MINIMIZER_SCALARS}
    meta.update({
        "kind": "trapped-minimizer",
        "potential": m.potential.describe(),
        "center": [float(v) for v in m.center],
        "zbar": [float(v) for v in m.zbar],
        "runs": [[int(i), float(e)] for i, e in m.runs],
    })
    save_checkpoint(path, m.w, meta)


def load_minimizer(path, potential=None):
    """Inverse of save_minimizer; ``potential`` overrides the stored description (tabulated V)."""
    from .potentials import parse_potential
    from .trapped import TrappedMinimizer

    w, meta = load_checkpoint(path)
    if meta.get("kind") != "trapped-minimizer":
        raise ValueError(f"{path}: not a trapped-minimizer checkpoint")
    V = potential or parse_potential(meta["potential"])
    kw = {k: meta[k] for k in _MINIMIZER_SCALARS}
    return TrappedMinimizer(potential=V, w=w, center=np.array(meta["center"]), zbar=np.array(meta["zbar"]),
                            runs=tuple((int(i), float(e)) for i, e in meta["runs"]), **kw)
