"""Closed-form scaling quantities and the gamma -> 2 concentration diagnostics.

With M = ||Q_gamma||_2^2 and 0 < gamma < 2,

    eps   = (a/M)^{-1/(2-gamma)}               concentration length
    tau   = sqrt(gamma/(4-gamma)) / eps        sqrt of the free minimizer's kinetic energy
    e~    = ((gamma-2)/(4-gamma)) eps^{-2}     min of int |grad u|^2 - (a/2) D_gamma over unit mass

The free minimizer is t^{3/2} Q_gamma(t x) / sqrt(M) with t = 1/eps.  A
trapped minimizer u is compared with it through v(y) = eps^{3/2} u(eps y + z),
z the maximum point of u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .errors import CriticalExponentError, DomainError, FlatnessUnavailableError
from .fields import CartesianGrid, Field, RadialGrid
from .groundstate import GroundStateSolution
from .potentials import PotentialSpec, flatness_analysis
from .riesz import get_kernel

__all__ = [
    "tilde_e",
    "tilde_e_as_printed",
    "tau",
    "epsilon",
    "identity_defects",
    "scaled_ground_state",
    "free_energy",
    "rescale_profile",
    "profile_distance",
    "moment",
    "gap_rate_bound",
    "ScalingReport",
    "ConcentrationReport",
    "concentration_report",
]


def _check(gamma, a, M):
    if gamma == 2.0:
        raise CriticalExponentError("critical exponent: formula diverges at gamma = 2")
    if not 0.0 < gamma < 2.0:
        raise ValueError(f"gamma must lie in (0, 2), got {gamma}")
    if not (a > 0 and M > 0):
        raise ValueError("a and M must be positive")


def tilde_e(gamma: float, a: float, M: float) -> float:
    """((gamma-2)/(4-gamma)) (a/M)^{2/(2-gamma)}: the free minimum energy at unit mass."""
    _check(gamma, a, M)
    return (gamma - 2.0) / (4.0 - gamma) * (a / M) ** (2.0 / (2.0 - gamma))


def tilde_e_as_printed(gamma: float, a: float, M: float) -> float:
    """(1 - 2/gamma)((4-gamma)/gamma)(a/M)^{2/(2-gamma)}; kept only to quantify the discrepancy."""
    _check(gamma, a, M)
    return (1.0 - 2.0 / gamma) * ((4.0 - gamma) / gamma) * (a / M) ** (2.0 / (2.0 - gamma))


def tau(gamma: float, a: float, M: float) -> float:
    _check(gamma, a, M)
    return math.sqrt(gamma / (4.0 - gamma)) * (a / M) ** (1.0 / (2.0 - gamma))


def epsilon(gamma: float, a: float, M: float) -> float:
    _check(gamma, a, M)
    return (a / M) ** (-1.0 / (2.0 - gamma))


def identity_defects(gamma: float, a: float, M: float) -> tuple:
    """Relative defects of eps^-2 = (a/M)^{2/(2-g)}, tau^2 = g/(4-g) eps^-2, e~ = (g-2)/(4-g) eps^-2."""
    eps = epsilon(gamma, a, M)
    inv2 = eps**-2
    t = tau(gamma, a, M)
    e = tilde_e(gamma, a, M)
    r = (a / M) ** (2.0 / (2.0 - gamma))
    return (
        abs(inv2 - r) / r,
        abs(t * t - gamma / (4.0 - gamma) * inv2) / (t * t),
        abs(e - (gamma - 2.0) / (4.0 - gamma) * inv2) / abs(e),
    )


def _spline(sol: GroundStateSolution):
    from .trapped import _radial_profile

    return _radial_profile(sol)


def scaled_ground_state(sol: GroundStateSolution, a: float, grid: RadialGrid | None = None, *,
                        dilation: str = "minimizer") -> Field:
    """t^{3/2} Q_gamma(t r) / sqrt(M) on a radial grid.

    ``dilation="minimizer"`` uses t = 1/eps, the minimizer of the free
    functional along the dilation orbit; ``"printed"`` uses t = tau instead.
    """
    g, M = sol.gamma, sol.mass
    if dilation == "minimizer":
        t = 1.0 / epsilon(g, a, M)
    elif dilation == "printed":
        t = tau(g, a, M)
    else:
        raise ValueError("dilation must be 'minimizer' or 'printed'")
    grid = grid or sol.grid
    q = _spline(sol)
    return Field(grid, t**1.5 * q(t * grid.r) / math.sqrt(M))


def free_energy(u: Field, gamma: float, a: float) -> float:
    """int |grad u|^2 - (a/2) D_gamma(u, u)."""
    kernel = get_kernel(u.grid, gamma)
    rho = u.values * u.values
    D = u.grid.integrate(kernel.apply(rho) * rho)
    return u.grid.kinetic(u.values) - 0.5 * a * D


def rescale_profile(u: Field, zbar, eps: float, target: CartesianGrid | RadialGrid | None = None) -> Field:
    """v(y) = eps^{3/2} u(eps y + zbar) by cubic interpolation onto ``target``.

    The default target has u's node count and spacing h/eps, centred at the
    origin.  u is treated as periodic on its box (the discretization is), so
    sample points may fall up to one cell outside it; beyond that DomainError.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = u.grid
    if isinstance(g, RadialGrid):
        if np.any(np.asarray(zbar, dtype=float) != 0):
            raise DomainError("a radial field can only be rescaled about the origin")
        target = target or g
        if eps * target.r_max > g.r_max * (1 + 1e-12):
            raise DomainError("rescaled lattice exceeds the field's radial domain")
        r = np.concatenate([-g.r[::-1], g.r, [g.r_max]])
        v = np.concatenate([u.values[::-1], u.values, [0.0]])
        s = CubicSpline(r, v)
        return Field(target, eps**1.5 * s(eps * target.r))
    zbar = np.asarray(zbar, dtype=float).reshape(3)
    if target is None:
        target = g.with_frame(tuple(L / eps for L in g.half_width), (0.0, 0.0, 0.0))
    coords = []
    for k, y in enumerate(target.axes()):
        x = zbar[k] + eps * y
        idx = (x - (g.center[k] - g.half_width[k])) / g.spacing[k]
        if idx.min() < -1.0 - 1e-9 or idx.max() > g.n[k] + 1e-9:
            raise DomainError(f"rescaled lattice exceeds the field's domain along axis {k}")
        coords.append(idx)
    mesh = np.meshgrid(*coords, indexing="ij")
    vals = map_coordinates(u.values, mesh, order=3, mode="grid-wrap")
    return Field(target, eps**1.5 * vals)


def _target_profile(Q2: GroundStateSolution, grid):
    q = _spline(Q2)
    if isinstance(grid, RadialGrid):
        r = grid.r
    else:
        x = grid.mesh(relative=False)
        r = np.sqrt(x[0] ** 2 + x[1] ** 2 + x[2] ** 2)
    return q(r) / math.sqrt(Q2.mass)


def profile_distance(v: Field, Q2: GroundStateSolution) -> tuple:
    """(d_2, d_H1) between v and Q_2(|y|) / ||Q_2||_2 sampled on v's grid."""
    d = v.values - _target_profile(Q2, v.grid)
    d2 = v.grid.inner(d, d)
    return math.sqrt(d2), math.sqrt(d2 + v.grid.kinetic(d))


def moment(sol: GroundStateSolution, p: float) -> float:
    """int |x|^p Q^2 dx."""
    return sol.grid.integrate(sol.grid.r**p * sol.values**2)


def gap_rate_bound(lam: float, p: float, Q2: GroundStateSolution) -> float:
    """lam / ||Q_2||^2 int |x|^p Q_2^2: the limiting bound on gap / eps^p at a well with V ~ lam |x - x_i|^p."""
    return lam * moment(Q2, p) / Q2.mass


@dataclass(frozen=True)
class ScalingReport:
    gamma: float
    a: float
    mass: float
    epsilon: float
    tau: float
    tilde_e: float
    energy: float
    gap: float  # same-frame gap reported by the trapped solver
    gap_closed_form: float  # energy - tilde_e
    potential_energy: float
    beta2: float
    d2: float
    dH1: float
    zbar: tuple
    well: int
    well_distance: float
    rho: float
    q: float
    multiplier: float
    mu_eps2: float


@dataclass(frozen=True)
class ConcentrationReport:
    rows: list
    verdicts: dict
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v for v in self.verdicts.values() if v is not None)


def _decreasing(seq, floor=0.0):
    """Strictly decreasing over the final three values; pairs both below ``floor`` count as flat noise."""
    tail = list(seq)[-3:]
    return all(b < a or max(a, b) < floor for a, b in zip(tail, tail[1:]))


def concentration_report(runs, V: PotentialSpec | None = None, *, Q2: GroundStateSolution | None = None,
                         beta_tol: float = 0.15, q_tol: float = 0.2, d2_max: float = 0.05,
                         gap_fraction: float = 0.1, mu_bracket=(-10.0, -0.01),
                         rho_floor: float = 1e-10) -> ConcentrationReport:
    """ScalingReport rows for a gamma sweep of trapped minimizers and the trend verdicts.

    Trends are strict decrease over the final three gammas.  The concentration
    well y0 is the declared well nearest to the final maximum point.
    """
    from .trapped import reference_ground_state

    runs = sorted(runs, key=lambda m: m.gamma)
    if len(runs) < 3:
        raise ValueError("a concentration report needs at least three gamma values")
    gammas = [m.gamma for m in runs]
    if len(set(gammas)) != len(gammas):
        raise ValueError("inconsistent sweep metadata: repeated gamma")
    V = V or runs[0].potential
    a = runs[0].a
    for m in runs:
        if m.a != a or m.potential.describe() != V.describe():
            raise ValueError("inconsistent sweep metadata: runs differ in a or in the potential")
    Q2 = Q2 or reference_ground_state(2.0)
    try:
        flat = flatness_analysis(V)
    except FlatnessUnavailableError:
        flat = None
    p = flat.p if flat else 2.0
    rows = []
    for m in runs:
        g, M = m.gamma, m.ground_mass
        eps = epsilon(g, a, M)
        te = tilde_e(g, a, M)
        v = rescale_profile(m.field, m.zbar, eps)
        d2, dH1 = profile_distance(v, Q2)
        dist = np.linalg.norm(V.wells - m.zbar, axis=1)
        well = int(np.argmin(dist))
        rows.append(ScalingReport(
            gamma=g, a=a, mass=M, epsilon=eps, tau=tau(g, a, M), tilde_e=te, energy=m.energy,
            gap=m.gap, gap_closed_form=m.energy - te, potential_energy=m.potential_energy,
            beta2=eps**2 * m.kinetic, d2=d2, dH1=dH1, zbar=tuple(float(x) for x in m.zbar), well=well,
            well_distance=float(dist[well]), rho=float(dist[well]) / eps, q=m.gap / eps**p,
            multiplier=m.multiplier, mu_eps2=m.multiplier * eps**2,
        ))
    last = rows[-1]
    verdicts = {
        "gap_nonnegative": all(r.gap >= -1e-8 for r in rows),
        "gap_decreasing": _decreasing([r.gap for r in rows]),
        "gap_small": last.gap < gap_fraction * abs(last.tilde_e),
        "potential_decreasing": _decreasing([r.potential_energy for r in rows]),
        "beta_to_one": abs(last.beta2 - 1.0) <= beta_tol and _decreasing([abs(r.beta2 - 1.0) for r in rows]),
        "d2_decreasing": _decreasing([r.d2 for r in rows]),
        "d2_small": last.d2 < d2_max,
        "rho_decreasing": _decreasing([r.rho for r in rows], rho_floor),
        "mu_bracket": all(r.multiplier < 0 and mu_bracket[0] < r.mu_eps2 < mu_bracket[1] for r in rows),
    }
    details = {"p": p}
    if flat is not None:
        verdicts["y0_in_Z"] = last.well in flat.flattest
        lam = flat.lambdas[last.well] if last.well in flat.lambdas else flat.lambdas[flat.flattest[0]]
        bound = gap_rate_bound(lam, p, Q2)
        verdicts["q_bounded"] = last.q <= (1.0 + q_tol) * bound
        details.update({"Z": flat.flattest, "lambda": lam, "q_bound": bound, "q_ratio": last.q / bound})
    else:
        verdicts["y0_in_Z"] = None
        verdicts["q_bounded"] = None
    return ConcentrationReport(rows, verdicts, details)
