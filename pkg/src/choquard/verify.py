"""Invariant battery behind ``choquard verify`` (small grids, a couple of minutes on one core).

Each check returns a row {check, passed, value, threshold}.  The battery
covers identities that hold for every converged solution; the sweep-level
trend criteria live in the acceptance tests.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .asymptotics import free_energy, identity_defects, scaled_ground_state, tilde_e
from .fields import CartesianGrid, Field, RadialGrid
from .groundstate import gn_constant, gn_ratio, pohozaev_check, solve_ground_state
from .potentials import PotentialSpec
from .riesz import hartree_energy, riesz_apply
from .shooting import shoot_ground_state
from .trapped import lagrange_multiplier, solve_trapped, trial_upper_bound

__all__ = ["run_battery", "random_radial_field", "random_cartesian_field"]

POHOZAEV_GAMMAS = (0.5, 1.0, 1.5, 1.8, 1.95, 2.0)
SWEEP = (1.7, 1.8, 1.9, 1.95)


def _row(check, value, threshold, passed):
    return {"check": check, "passed": bool(passed), "value": float(value), "threshold": threshold}


def random_radial_field(grid: RadialGrid, rng: np.random.Generator, terms: int = 4) -> Field:
    """Sum of shifted Gaussian shells with random signs, widths and radii."""
    r = grid.r
    u = np.zeros_like(r)
    for _ in range(terms):
        c = rng.normal()
        r0 = rng.uniform(0.0, 3.0)
        s = rng.uniform(0.4, 2.0)
        u += c * np.exp(-((r - r0) / s) ** 2) + c * np.exp(-((r + r0) / s) ** 2)
    return Field(grid, u)


def random_cartesian_field(grid: CartesianGrid, rng: np.random.Generator, terms: int = 4) -> Field:
    """Sum of anisotropic Gaussians at random positions with random signs."""
    x, y, z = grid.mesh()
    u = np.zeros(grid.n)
    for _ in range(terms):
        c = rng.normal()
        p = rng.uniform(-2.0, 2.0, 3)
        s = rng.uniform(0.6, 1.6, 3)
        u += c * np.exp(-(((x - p[0]) / s[0]) ** 2 + ((y - p[1]) / s[1]) ** 2 + ((z - p[2]) / s[2]) ** 2))
    return Field(grid, u)


def run_battery(seed: int = 0) -> list:
    rows = []
    grid = RadialGrid(3, 4096, 20.0)
    sols = {}
    prev = None
    for g in POHOZAEV_GAMMAS:
        prev = solve_ground_state(g, grid, prev)
        sols[g] = prev
        r1, r2 = pohozaev_check(prev)
        rows.append(_row(f"pohozaev gamma={g}", max(r1, r2), 1e-5, max(r1, r2) < 1e-5))
        ident = abs(prev.action - prev.mass / (4.0 - g)) / prev.action
        rows.append(_row(f"ground-energy identity gamma={g}", ident, 1e-6, ident < 1e-6))
        C = gn_constant(prev)
        defect = abs(gn_ratio(prev.field, g, C) - 1.0)
        rows.append(_row(f"GN equality gamma={g}", defect, 1e-5, defect < 1e-5))

    astar = sols[2.0].mass
    gaps = [abs(sols[g].mass - astar) for g in (1.5, 1.8, 1.95)]
    rows.append(_row("mass gap decreasing toward gamma=2", gaps[-1], "strict decrease",
                     all(b < a for a, b in zip(gaps, gaps[1:]))))
    fine = solve_ground_state(2.0, RadialGrid(3, 8192, 20.0), sols[2.0])
    drift = abs(fine.mass - astar) / astar
    rows.append(_row("a* grid doubling", drift, 1e-3, drift < 1e-3))
    shoot = shoot_ground_state(2.0)
    dev = abs(shoot.mass - astar) / astar
    rows.append(_row("a* against shooting oracle", dev, 5e-3, dev < 5e-3))

    rng = np.random.default_rng(seed)
    for g in (1.0, 1.5, 1.9):
        C = gn_constant(sols[g]) if g in sols else gn_constant(solve_ground_state(g, grid))
        worst = max(gn_ratio(random_radial_field(grid, rng), g, C) for _ in range(20))
        rows.append(_row(f"GN inequality on 20 random fields gamma={g}", worst - 1.0, "<= 0", worst <= 1.0 + 1e-9))

    for g in (1.0, 1.5, 1.8):
        for ratio in (1.2, 1.5, 2.0):
            a = ratio * astar
            sol = sols[g] if g in sols else solve_ground_state(g, grid)
            num = free_energy(scaled_ground_state(sol, a), g, a)
            ref = tilde_e(g, a, sol.mass)
            err = abs(num - ref) / abs(ref)
            rows.append(_row(f"free minimum closed form gamma={g} a/a*={ratio}", err, 1e-3, err < 1e-3))
            worst = max(identity_defects(g, a, sol.mass))
            rows.append(_row(f"scaling identities gamma={g} a/a*={ratio}", worst, 1e-14, worst < 1e-14))

    # Coulomb self-energy of a normalized Gaussian density: D_1 = sqrt(2 alpha / pi) for rho = (alpha/pi)^{3/2} e^{-alpha r^2}
    alpha = 1.3
    u = Field(grid, (alpha / math.pi) ** 0.75 * np.exp(-0.5 * alpha * grid.r**2))
    D = hartree_energy(u, 1.0)
    exact = math.sqrt(2.0 * alpha / math.pi)
    err = abs(D - exact) / exact
    rows.append(_row("Gaussian Coulomb self-energy", err, 1e-4, err < 1e-4))
    cart = CartesianGrid.cube(64, 8.0)
    uc = Field(cart, (alpha / math.pi) ** 0.75 * np.exp(-0.5 * alpha * cart.radius() ** 2))
    for name, f in (("radial", u), ("Fourier", uc)):
        r = f.grid.r if name == "radial" else f.grid.radius()
        exact = np.where(r > 0, erf(math.sqrt(alpha) * r) / np.maximum(r, 1e-300), 2.0 * math.sqrt(alpha / math.pi))
        err = float(np.max(np.abs(riesz_apply(f, 1.0).values - exact)) / exact.max())
        rows.append(_row(f"Gaussian Coulomb potential ({name})", err, 1e-4, err < 1e-4))
    for g in (1.0, 1.5, 1.9):
        dr, dc = hartree_energy(u, g), hartree_energy(uc, g)
        err = abs(dr - dc) / abs(dr)
        rows.append(_row(f"radial vs Fourier Hartree energy gamma={g}", err, 1e-3, err < 1e-3))

    V = PotentialSpec.harmonic()
    osc = solve_trapped(1.5, 0.0, V, cart)
    rows.append(_row("harmonic oscillator energy", abs(osc.energy - 3.0), 1e-4, abs(osc.energy - 3.0) < 1e-4))
    rows.append(_row("harmonic oscillator multiplier", abs(osc.multiplier - 3.0), 1e-4,
                     abs(osc.multiplier - 3.0) < 1e-4))

    a = 1.5 * astar
    runs = []
    for g in SWEEP:
        m = solve_trapped(g, a, V, cart)
        runs.append(m)
        eps = m.epsilon
        rows.append(_row(f"unit mass gamma={g}", abs(m.mass - 1.0), 1e-10, abs(m.mass - 1.0) < 1e-10))
        rows.append(_row(f"Euler-Lagrange residual gamma={g}", m.residual, 1e-5, m.residual <= 1e-5))
        rows.append(_row(f"gap nonnegative gamma={g}", m.gap, ">= -1e-8", m.gap >= -1e-8))
        bound = trial_upper_bound(g, a, V, grid=cart)
        rows.append(_row(f"energy below trial bound gamma={g}", m.energy - bound, "<= 0",
                         m.energy <= bound + 1e-12 * abs(bound)))
        mu = lagrange_multiplier(m)
        rel = abs(mu - m.multiplier) / abs(mu)
        rows.append(_row(f"multiplier formula gamma={g}", rel, 1e-5, rel < 1e-5))
        rows.append(_row(f"mu eps^2 bracket gamma={g}", mu * eps**2, "(-10, -0.01)", -10.0 < mu * eps**2 < -0.01))
        cell = max(cart.spacing) * m.scale
        zdev = float(np.linalg.norm(m.zbar))
        rows.append(_row(f"symmetric maximum point gamma={g}", zdev, "< one cell", zdev < cell))
    gap = [m.gap for m in runs][-3:]
    rows.append(_row("trapped gap decreasing", gap[-1], "strict decrease", all(b < a_ for a_, b in zip(gap, gap[1:]))))
    pot = [m.potential_energy for m in runs][-3:]
    rows.append(_row("trapped potential energy decreasing", pot[-1], "strict decrease",
                     all(b < a_ for a_, b in zip(pot, pot[1:]))))
    return rows
