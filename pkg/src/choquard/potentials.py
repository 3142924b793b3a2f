"""Trapping potentials V >= 0 with isolated zeros, and their flatness data.

Product wells are  V(x) = scale * prod_i |x - x_i|^{p_i}.  Near x_i,
V ~ lambda_i |x - x_i|^{p_i} with lambda_i = scale * prod_{j != i} |x_i - x_j|^{p_j};
the flattest wells are those with the largest p_i and, among them, the
smallest lambda_i.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import FlatnessUnavailableError

__all__ = ["PotentialSpec", "Flatness", "flatness_analysis", "parse_potential"]

KINDS = ("harmonic", "product-wells", "tabulated")


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    kind: str
    wells: np.ndarray = field(default_factory=lambda: np.zeros((1, 3)))
    exponents: np.ndarray = field(default_factory=lambda: np.array([2.0]))
    scale: float = 1.0
    # tabulated kind: samples on a Cartesian grid (values indexed like grid.mesh())
    table: np.ndarray | None = None
    table_grid: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        wells = np.atleast_2d(np.asarray(self.wells, dtype=float))
        exps = np.atleast_1d(np.asarray(self.exponents, dtype=float))
        if wells.shape[1] != 3:
            raise ValueError("well locations must be points in R^3")
        if self.kind == "harmonic":
            exps = np.array([2.0])
            wells = wells[:1]
        if self.kind == "product-wells" and (len(exps) != len(wells) or np.any(exps <= 0)):
            raise ValueError("need one positive exponent per well")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.kind == "tabulated":
            if self.table is None or self.table_grid is None:
                raise ValueError("tabulated potential needs a table and its grid")
            if np.any(np.asarray(self.table) < 0):
                raise ValueError("tabulated potential must be nonnegative")
        wells.setflags(write=False)
        exps.setflags(write=False)
        object.__setattr__(self, "wells", wells)
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def harmonic(cls, center=(0.0, 0.0, 0.0), scale=1.0):
        return cls("harmonic", np.asarray([center], dtype=float), [2.0], scale)

    @classmethod
    def product_wells(cls, wells, exponents, scale=1.0):
        return cls("product-wells", np.asarray(wells, dtype=float), np.asarray(exponents, dtype=float), scale)

    @classmethod
    def tabulated(cls, grid, values, wells=()):
        wells = np.asarray(wells, dtype=float).reshape(-1, 3) if len(wells) else np.zeros((0, 3))
        return cls("tabulated", wells, np.full(len(wells), np.nan), 1.0, np.asarray(values, dtype=float), grid)

    def describe(self) -> str:
        if self.kind == "harmonic":
            c = ",".join(_num(v) for v in self.wells[0])
            return f"harmonic center=({c}) scale={_num(self.scale)}"
        if self.kind == "product-wells":
            parts = [f"({','.join(_num(v) for v in w)})^{_num(p)}" for w, p in zip(self.wells, self.exponents)]
            return f"product-wells {' '.join(parts)} scale={_num(self.scale)}"
        return f"tabulated {self.table.shape}"

    def relative(self, index: int, d) -> np.ndarray:
        """V(x_index + d) evaluated without forming x_index + d.

        ``d`` has shape (..., 3) or is a tuple of broadcastable coordinate
        arrays.  Small offsets near the well keep full relative precision.
        """
        d = _stack(d)
        if self.kind == "tabulated":
            return self(self.wells[index] + d)
        dist = np.sqrt(np.sum(d * d, axis=-1))
        out = self.scale * dist ** self.exponents[index]
        for j, (w, p) in enumerate(zip(self.wells, self.exponents)):
            if j == index:
                continue
            shift = self.wells[index] - w
            out = out * np.sqrt(np.sum((d + shift) ** 2, axis=-1)) ** p
        return out

    def __call__(self, x) -> np.ndarray:
        x = _stack(x)
        if self.kind == "tabulated":
            g = self.table_grid
            pts = x.reshape(-1, 3)
            idx = [(pts[:, k] - (g.center[k] - g.half_width[k])) / g.spacing[k] for k in range(3)]
            return map_coordinates(self.table, idx, order=3, mode="nearest").reshape(x.shape[:-1])
        out = np.full(x.shape[:-1], self.scale)
        for w, p in zip(self.wells, self.exponents):
            out = out * np.sqrt(np.sum((x - w) ** 2, axis=-1)) ** p
        return out

    def check_confining(self, grid, radius: float = 0.25) -> bool:
        """Smallest value on the grid boundary exceeds 10x the largest value within ``radius`` of a well."""
        x = np.stack(np.meshgrid(*grid.axes(), indexing="ij"), axis=-1)
        v = self(x)
        boundary = np.concatenate([v[0].ravel(), v[-1].ravel(), v[:, 0].ravel(), v[:, -1].ravel(),
                                   v[:, :, 0].ravel(), v[:, :, -1].ravel()])
        near = np.zeros(v.shape, dtype=bool)
        for w in self.wells:
            near |= np.sum((x - w) ** 2, axis=-1) <= radius**2
        well_max = v[near].max() if near.any() else 0.0
        return bool(boundary.min() > 10.0 * well_max)


def _num(v) -> str:
    """Shortest exact text for a float, without a trailing '.0' on integers."""
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def _stack(x):
    if isinstance(x, (tuple, list)):
        arrs = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in x])
        return np.stack(arrs, axis=-1)
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Flatness:
    p: float
    lambdas: dict  # well index -> lambda_i, for wells attaining p
    flattest: tuple  # indices of the wells in Z
    points: np.ndarray  # coordinates of Z


def flatness_analysis(V: PotentialSpec, rtol: float = 1e-12) -> Flatness:
    """Maximal vanishing order p, the coefficients lambda_i of the wells attaining it, and Z."""
    if V.kind == "tabulated":
        raise FlatnessUnavailableError("flatness analysis unavailable for tabulated potentials")
    if V.kind == "harmonic":
        return Flatness(2.0, {0: V.scale}, (0,), V.wells[:1].copy())
    p = float(V.exponents.max())
    lambdas = {}
    for i, (xi, pi) in enumerate(zip(V.wells, V.exponents)):
        if pi != p:
            continue
        lam = V.scale
        for j, (xj, pj) in enumerate(zip(V.wells, V.exponents)):
            if j != i:
                lam *= float(np.linalg.norm(xi - xj)) ** pj
        lambdas[i] = lam
    lam_min = min(lambdas.values())
    flattest = tuple(i for i, lam in lambdas.items() if lam <= lam_min * (1 + rtol))
    return Flatness(p, lambdas, flattest, V.wells[list(flattest)].copy())


_WELL = re.compile(r"\(\s*([^,()]+),\s*([^,()]+),\s*([^,()]+)\s*\)\s*\^\s*([0-9.eE+-]+)")


def parse_potential(text: str) -> PotentialSpec:
    """Parse 'harmonic [center=(x,y,z)] [scale=s]' or 'wells (1,0,0)^2 (-1,0,0)^4 [scale=s]'.

    The output of PotentialSpec.describe() parses back to the same potential.
    """
    text = text.strip()
    scale = 1.0
    m = re.search(r"scale\s*=\s*([0-9.eE+-]+)", text)
    if m:
        scale = float(m.group(1))
        text = (text[: m.start()] + text[m.end() :]).strip()
    center = (0.0, 0.0, 0.0)
    m = re.search(r"center\s*=\s*\(([^()]*)\)", text)
    if m:
        center = tuple(float(v) for v in m.group(1).split(","))
        if len(center) != 3:
            raise ValueError(f"center needs three coordinates in {text!r}")
        text = (text[: m.start()] + text[m.end() :]).strip()
    head = text.split()[0].lower() if text else ""
    if head == "harmonic":
        return PotentialSpec.harmonic(center=center, scale=scale)
    if head in ("wells", "product-wells"):
        found = _WELL.findall(text)
        if not found:
            raise ValueError(f"no wells in potential spec {text!r}")
        wells = [[float(a), float(b), float(c)] for a, b, c, _ in found]
        exps = [float(p) for *_, p in found]
        return PotentialSpec.product_wells(wells, exps, scale)
    raise ValueError(f"cannot parse potential spec {text!r}")


def well_separation(V: PotentialSpec) -> float:
    """Smallest distance between two declared wells (inf for a single well)."""
    if len(V.wells) < 2:
        return math.inf
    d = V.wells[:, None, :] - V.wells[None, :, :]
    dist = np.sqrt((d**2).sum(-1))
    return float(dist[np.triu_indices(len(V.wells), 1)].min())
