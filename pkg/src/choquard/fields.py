"""Grids, discrete fields and the linear differential operators on them.

Two discretizations of R^N are provided:

* :class:`RadialGrid` samples radial functions on the cell-centred nodes
  ``r_j = (j + 1/2) h``.  In three dimensions the default scheme is a sine
  expansion of ``r u(r)`` (the odd extension of ``r u`` is smooth for smooth
  radial ``u``), which makes the kinetic energy and the Laplacian spectrally
  accurate and keeps the midpoint weights spectrally accurate for mass-type
  integrals.  Any ``N >= 3`` is supported through a conservative second-order
  finite-volume scheme whose weights are the exact shell volumes.
* :class:`CartesianGrid` is a periodic box in R^3 with FFT derivatives (or a
  7-point finite-difference fallback).

Fields are immutable; every operator returns fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gamma as _gamma, pi

import numpy as np
from scipy import fft as sfft
from scipy.linalg import solve_banded

__all__ = [
    "RadialGrid",
    "CartesianGrid",
    "Field",
    "sphere_area",
    "integrate",
    "mass",
    "kinetic",
    "laplacian",
]


def sphere_area(dim: int) -> float:
    """Surface measure |S^{dim-1}| of the unit sphere in R^dim."""
    return 2.0 * pi ** (dim / 2.0) / _gamma(dim / 2.0)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RadialGrid:
    dim: int = 3
    n: int = 4096
    r_max: float = 20.0
    scheme: str = "auto"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {self.dim}")
        if self.n < 8:
            raise ValueError("radial grid needs at least 8 nodes")
        if not self.r_max > 0:
            raise ValueError("r_max must be positive")
        if self.scheme not in ("auto", "spectral", "fd"):
            raise ValueError(f"unknown radial scheme {self.scheme!r}")
        if self.scheme == "spectral" and self.dim != 3:
            raise ValueError("the spectral radial scheme exists only for N = 3")

    kind = "radial"

    @property
    def method(self) -> str:
        if self.scheme == "auto":
            return "spectral" if self.dim == 3 else "fd"
        return self.scheme

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    @property
    def h(self) -> float:
        return self.r_max / self.n

    @cached_property
    def r(self) -> np.ndarray:
        return _readonly((np.arange(self.n) + 0.5) * self.h)

    @cached_property
    def weights(self) -> np.ndarray:
        area = sphere_area(self.dim)
        if self.method == "spectral":
            w = area * self.r ** (self.dim - 1) * self.h
        else:
            edges = np.arange(self.n + 1) * self.h
            w = area * np.diff(edges**self.dim) / self.dim
        return _readonly(w)

    @cached_property
    def _wavenumbers(self) -> np.ndarray:
        return _readonly(np.arange(1, self.n + 1) * pi / self.r_max)

    @cached_property
    def _face_area(self) -> np.ndarray:
        # |S| r_f^{N-1} at the outer face of each cell, r_f = (j + 1) h
        faces = np.arange(1, self.n + 1) * self.h
        return _readonly(sphere_area(self.dim) * faces ** (self.dim - 1))

    def signature(self) -> str:
        return f"radial:N={self.dim}:n={self.n}:R={self.r_max!r}:{self.method}"

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def inner(self, a, b) -> float:
        return float(np.dot(self.weights, np.asarray(a) * np.asarray(b)))

    # -- spectral helpers (N = 3, sine series of w = r u) ---------------------
    def _sine(self, u):
        return sfft.dst(self.r * u, type=2, norm="ortho")

    def _unsine(self, c):
        return sfft.idst(c, type=2, norm="ortho") / self.r

    def kinetic(self, values) -> float:
        u = np.asarray(values, dtype=float)
        if self.method == "spectral":
            c = self._sine(u)
            return float(4.0 * pi * self.h * np.sum((c * self._wavenumbers) ** 2))
        du = np.diff(np.append(u, -u[-1]))  # ghost enforces u(R) = 0
        flux = self._face_area * du**2 / self.h
        flux[-1] *= 0.5  # the last half-cell is h/2 wide
        return float(np.sum(flux))

    def laplacian(self, values) -> np.ndarray:
        u = np.asarray(values, dtype=float)
        if self.method == "spectral":
            return self._unsine(-(self._wavenumbers**2) * self._sine(u))
        return -self._stiffness_apply(u) / self.weights

    def solve_shifted(self, values, shift: float) -> np.ndarray:
        """Return ``(shift - Laplacian)^{-1} values`` with the grid's boundary conditions."""
        f = np.asarray(values, dtype=float)
        if self.method == "spectral":
            return self._unsine(self._sine(f) / (shift + self._wavenumbers**2))
        main, off = self._stiffness_bands()
        ab = np.zeros((3, self.n))
        ab[0, 1:] = off
        ab[1] = main + shift * self.weights
        ab[2, :-1] = off
        return solve_banded((1, 1), ab, self.weights * f)

    def _stiffness_bands(self):
        A = self._face_area / self.h
        main = A.copy()
        main[1:] += A[:-1]
        main[-1] += A[-1]  # Dirichlet face: (u_{M-1} - ghost) = 2 u_{M-1}, halved width
        return main, -A[:-1]

    def _stiffness_apply(self, u):
        main, off = self._stiffness_bands()
        out = main * u
        out[:-1] += off * u[1:]
        out[1:] += off * u[:-1]
        return out

    def boundary_value(self, values) -> float:
        """|u| at the last interior node, the truncation diagnostic."""
        return float(abs(np.asarray(values)[-1]))


def _axis3(v, caster):
    if np.ndim(v) == 0:
        return (caster(v),) * 3
    v = tuple(caster(x) for x in v)
    if len(v) != 3:
        raise ValueError("Cartesian grids are three-dimensional")
    return v


@dataclass(frozen=True)
class CartesianGrid:
    """Periodic box ``center + [-L, L)^3`` with ``n`` nodes per axis.

    Node counts must be even, at least 32 and FFT friendly (5-smooth).
    """

    n: tuple = (64, 64, 64)
    half_width: tuple = (8.0, 8.0, 8.0)
    center: tuple = (0.0, 0.0, 0.0)
    derivative: str = "spectral"

    def __post_init__(self):
        object.__setattr__(self, "n", _axis3(self.n, int))
        object.__setattr__(self, "half_width", _axis3(self.half_width, float))
        object.__setattr__(self, "center", _axis3(self.center, float))
        for m in self.n:
            if m < 32 or m % 2 or sfft.next_fast_len(m, real=True) != m:
                raise ValueError(f"axis node count {m} must be even, >= 32 and 5-smooth")
        if min(self.half_width) <= 0:
            raise ValueError("half widths must be positive")
        if self.derivative not in ("spectral", "fd"):
            raise ValueError(f"unknown derivative scheme {self.derivative!r}")

    kind = "cartesian"
    dim = 3

    @classmethod
    def cube(cls, n: int, half_width: float, center=(0.0, 0.0, 0.0), derivative="spectral"):
        return cls((n,) * 3, (half_width,) * 3, tuple(center), derivative)

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def spacing(self) -> tuple:
        return tuple(2.0 * L / m for L, m in zip(self.half_width, self.n))

    @property
    def cell_volume(self) -> float:
        hx, hy, hz = self.spacing
        return hx * hy * hz

    def offsets(self, axis: int) -> np.ndarray:
        """Node coordinates along ``axis`` relative to the box centre."""
        m, L = self.n[axis], self.half_width[axis]
        return -L + self.spacing[axis] * np.arange(m)

    def axes(self) -> list:
        return [self.center[i] + self.offsets(i) for i in range(3)]

    def mesh(self, relative: bool = True):
        ax = [self.offsets(i) for i in range(3)] if relative else self.axes()
        return np.meshgrid(*ax, indexing="ij", sparse=True)

    def radius(self) -> np.ndarray:
        x, y, z = self.mesh()
        return np.sqrt(x * x + y * y + z * z)

    def with_frame(self, half_width, center) -> "CartesianGrid":
        return CartesianGrid(self.n, half_width, center, self.derivative)

    def signature(self) -> str:
        return f"cartesian:n={self.n}:L={self.half_width}:{self.derivative}"

    @cached_property
    def _symbol(self) -> np.ndarray:
        """Symbol of -Laplacian on the rfft lattice."""
        parts = []
        for i, (m, h) in enumerate(zip(self.n, self.spacing)):
            k = 2.0 * pi * (sfft.rfftfreq(m, h) if i == 2 else sfft.fftfreq(m, h))
            if self.derivative == "spectral":
                s = k * k
            else:
                s = (2.0 - 2.0 * np.cos(k * h)) / (h * h)
            shape = [1, 1, 1]
            shape[i] = s.size
            parts.append(s.reshape(shape))
        return _readonly(parts[0] + parts[1] + parts[2])

    def wavevectors(self):
        ks = []
        for i, (m, h) in enumerate(zip(self.n, self.spacing)):
            k = 2.0 * pi * (sfft.rfftfreq(m, h) if i == 2 else sfft.fftfreq(m, h))
            shape = [1, 1, 1]
            shape[i] = k.size
            ks.append(k.reshape(shape))
        return ks

    def integrate(self, values) -> float:
        return float(np.sum(values) * self.cell_volume)

    def inner(self, a, b) -> float:
        return float(np.vdot(np.asarray(a).ravel(), np.asarray(b).ravel()).real * self.cell_volume)

    def laplacian(self, values) -> np.ndarray:
        u = np.asarray(values, dtype=float)
        return sfft.irfftn(-self._symbol * sfft.rfftn(u, workers=-1), s=self.n, workers=-1)

    def kinetic(self, values) -> float:
        u = np.asarray(values, dtype=float)
        if self.derivative == "fd":
            hs = self.spacing
            return float(
                sum(np.sum((np.roll(u, -1, axis=i) - u) ** 2) / hs[i] ** 2 for i in range(3))
                * self.cell_volume
            )
        return -self.inner(self.laplacian(u), u)

    def solve_shifted(self, values, shift: float) -> np.ndarray:
        f = np.asarray(values, dtype=float)
        return sfft.irfftn(sfft.rfftn(f, workers=-1) / (shift + self._symbol), s=self.n, workers=-1)

    def boundary_value(self, values) -> float:
        u = np.abs(np.asarray(values))
        return float(max(u[0].max(), u[:, 0].max(), u[:, :, 0].max()))


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a grid; immutable."""

    grid: object
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != tuple(self.grid.shape):
            raise ValueError(f"values of shape {v.shape} do not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def from_function(cls, grid, func):
        if grid.kind == "radial":
            return cls(grid, func(grid.r))
        return cls(grid, func(*grid.mesh()))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    @cached_property
    def mass(self) -> float:
        return self.grid.inner(self.values, self.values)

    @cached_property
    def kinetic(self) -> float:
        return max(self.grid.kinetic(self.values), 0.0)

    def __mul__(self, c):
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__


def integrate(f: Field) -> float:
    """Quadrature approximation of the integral of ``f`` over R^N."""
    return f.grid.integrate(f.values)


def mass(u: Field) -> float:
    return u.mass


def kinetic(u: Field) -> float:
    """Discrete ``int |grad u|^2``."""
    return u.kinetic


def laplacian(u: Field) -> Field:
    return Field(u.grid, u.grid.laplacian(u.values))
