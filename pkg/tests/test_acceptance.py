"""Acceptance criteria 1-10.

Each test prints one PASS/FAIL line (also collected into the terminal
summary) and asserts the criterion with its pinned tolerance.  Criteria the
discretization cannot meet are asserted as stated and fail.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import erf

from choquard.asymptotics import concentration_report, free_energy, scaled_ground_state, tilde_e
from choquard.cli import main
from choquard.fields import CartesianGrid, Field, RadialGrid
from choquard.groundstate import gn_constant, gn_ratio, pohozaev_check, solve_ground_state
from choquard.potentials import PotentialSpec
from choquard.riesz import hartree_energy, riesz_apply
from choquard.shooting import shoot_ground_state
from choquard.trapped import solve_trapped
from choquard.verify import random_radial_field

# pinned tolerances
POHOZAEV_TOL = 1e-5
GROUND_SECONDS = 10.0
MASS_GAP_FRACTION = 0.02
DOUBLING_TOL = 1e-3
ORACLE_TOL = 5e-3
GN_TOL = 1e-5
CLOSED_FORM_TOL = 1e-3
RIESZ_TOL = 1e-3
COULOMB_TOL = 1e-4
GAP_FRACTION = 0.10
TRAPPED_SECONDS = 600.0
D2_MAX = 0.05
BETA_TOL = 0.15
Q_FACTOR = 1.2
MU_BRACKET = (-10.0, -0.01)

BATTERY = (0.5, 1.0, 1.5, 1.8, 1.95, 2.0)
HARMONIC_SWEEP = (1.7, 1.8, 1.9, 1.95)
TWO_WELL_SWEEP = (1.8, 1.9, 1.95)
HARMONIC_GRID = CartesianGrid.cube(96, 12.0)
TWO_WELL_GRID = CartesianGrid.cube(64, 8.0)

RESULTS = {}


def record(n, ok, text):
    RESULTS[str(n)] = (bool(ok), text)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")


def strictly_decreasing(seq):
    return all(b < a for a, b in zip(seq, seq[1:]))


@pytest.fixture(scope="module")
def battery():
    grid = RadialGrid(3, 4096, 20.0)
    sols, times = {}, {}
    for g in BATTERY:
        t0 = time.perf_counter()
        sols[g] = solve_ground_state(g, grid)  # cold start: the runtime bound is per gamma
        times[g] = time.perf_counter() - t0
    for g in (1.9,):  # needed by the two-well sweep, not timed
        sols[g] = solve_ground_state(g, grid)
    return sols, times


@pytest.fixture(scope="module")
def harmonic(battery):
    sols, _ = battery
    V = PotentialSpec.harmonic()
    a = 1.5 * sols[2.0].mass
    runs, times = [], []
    grid = RadialGrid(3, 4096, 20.0)
    for g in HARMONIC_SWEEP:
        ground = sols[g] if g in sols else solve_ground_state(g, grid)
        t0 = time.perf_counter()
        runs.append(solve_trapped(g, a, V, HARMONIC_GRID, ground=ground))
        times.append(time.perf_counter() - t0)
    report = concentration_report(runs, V, Q2=sols[2.0])
    return runs, report, times


@pytest.fixture(scope="module")
def two_well(battery):
    sols, _ = battery
    V = PotentialSpec.product_wells([[1, 0, 0], [-1, 0, 0]], [2, 4])
    a = 1.5 * sols[2.0].mass
    runs = [solve_trapped(g, a, V, TWO_WELL_GRID, ground=sols[g]) for g in TWO_WELL_SWEEP]
    return runs, concentration_report(runs, V, Q2=sols[2.0])


def test_criterion_01_pohozaev_battery(battery):
    sols, times = battery
    worst = max(max(pohozaev_check(sols[g])) for g in BATTERY)
    slowest = max(times.values())
    ok = worst < POHOZAEV_TOL and slowest < GROUND_SECONDS
    record(1, ok, f"max Pohozaev residual {worst:.2e} (< {POHOZAEV_TOL:g}), slowest solve {slowest:.2f} s "
                  f"(< {GROUND_SECONDS:g} s)")
    assert ok


def test_criterion_02_mass_trend(battery):
    sols, _ = battery
    astar = sols[2.0].mass
    gaps = [abs(sols[g].mass - astar) for g in (1.5, 1.8, 1.9, 1.95)]
    trend = strictly_decreasing(gaps)
    final = gaps[-1] / astar
    fine = solve_ground_state(2.0, RadialGrid(3, 8192, 20.0), sols[2.0]).mass
    doubling = abs(fine - astar) / astar
    oracle = abs(shoot_ground_state(2.0).mass - astar) / astar
    ok = trend and final < MASS_GAP_FRACTION and doubling < DOUBLING_TOL and oracle < ORACLE_TOL
    record(2, ok, f"gaps strictly decreasing: {trend}; final gap {100 * final:.2f}% of a* "
                  f"(< {100 * MASS_GAP_FRACTION:g}%); grid doubling {doubling:.1e} (< {DOUBLING_TOL:g}); "
                  f"shooting oracle {oracle:.1e} (< {ORACLE_TOL:g})")
    assert trend and doubling < DOUBLING_TOL and oracle < ORACLE_TOL
    assert final < MASS_GAP_FRACTION


def test_criterion_03_gn_sharpness(battery):
    sols, _ = battery
    eq = max(abs(gn_ratio(sols[g].field, g, gn_constant(sols[g])) - 1.0) for g in BATTERY)
    rng = np.random.default_rng(2024)
    grid = sols[1.0].grid
    worst = -math.inf
    for g in (1.0, 1.5, 1.9):
        C = gn_constant(sols[g])
        for _ in range(20):
            worst = max(worst, gn_ratio(random_radial_field(grid, rng), g, C) - 1.0)
    ok = eq < GN_TOL and worst <= 0.0
    record(3, ok, f"equality defect {eq:.2e} (< {GN_TOL:g}); max random-field defect {worst:.3f} (<= 0)")
    assert ok


def test_criterion_04_free_minimum_closed_form(battery):
    sols, _ = battery
    astar = sols[2.0].mass
    worst = 0.0
    for g in (1.0, 1.5, 1.8):
        for ratio in (1.2, 1.5, 2.0):
            a = ratio * astar
            e = free_energy(scaled_ground_state(sols[g], a), g, a)
            worst = max(worst, abs(e - tilde_e(g, a, sols[g].mass)) / abs(tilde_e(g, a, sols[g].mass)))
    ok = worst < CLOSED_FORM_TOL
    record(4, ok, f"max relative deviation {worst:.2e} (< {CLOSED_FORM_TOL:g}) over 3 x 3 (gamma, a/a*)")
    assert ok


def test_criterion_05_riesz_oracles():
    alpha = 1.3
    radial = RadialGrid(3, 4096, 20.0)
    cart = CartesianGrid.cube(64, 8.0)

    def gauss(grid):
        r = grid.r if grid.kind == "radial" else grid.radius()
        return Field(grid, (alpha / math.pi) ** 0.75 * np.exp(-0.5 * alpha * r**2))

    ur, uc = gauss(radial), gauss(cart)
    cross = max(abs(hartree_energy(ur, g) - hartree_energy(uc, g)) / hartree_energy(ur, g) for g in (1.0, 1.5, 1.9))
    self_energy = abs(hartree_energy(ur, 1.0) - math.sqrt(2 * alpha / math.pi)) / math.sqrt(2 * alpha / math.pi)
    pot = 0.0
    for u in (ur, uc):
        r = u.grid.r if u.grid.kind == "radial" else u.grid.radius()
        exact = np.where(r > 0, erf(math.sqrt(alpha) * r) / np.maximum(r, 1e-300), 2 * math.sqrt(alpha / math.pi))
        pot = max(pot, float(np.max(np.abs(riesz_apply(u, 1.0).values - exact)) / exact.max()))
    ok = cross < RIESZ_TOL and self_energy < COULOMB_TOL and pot < COULOMB_TOL
    record(5, ok, f"radial vs Fourier {cross:.1e} (< {RIESZ_TOL:g}); Coulomb self-energy {self_energy:.1e}, "
                  f"potential {pot:.1e} (< {COULOMB_TOL:g})")
    assert ok


def test_criterion_06_energy_limits(harmonic):
    runs, report, times = harmonic
    gaps = [m.gap for m in runs]
    pots = [m.potential_energy for m in runs]
    final = gaps[-1] / abs(report.rows[-1].tilde_e)
    ok = (min(gaps) >= 0 and strictly_decreasing(gaps) and final < GAP_FRACTION and strictly_decreasing(pots)
          and max(times) < TRAPPED_SECONDS)
    record(6, ok, f"gaps {', '.join(f'{x:.3g}' for x in gaps)} (>= 0, decreasing); final {final:.1e} of |e~| "
                  f"(< {GAP_FRACTION:g}); int V u^2 decreasing: {strictly_decreasing(pots)}; "
                  f"slowest solve {max(times):.0f} s")
    assert ok


def test_criterion_07_profile(harmonic):
    _, report, _ = harmonic
    d2 = [r.d2 for r in report.rows]
    beta = [abs(r.beta2 - 1.0) for r in report.rows]
    d2_trend, d2_final = strictly_decreasing(d2), d2[-1] < D2_MAX
    beta_final, beta_trend = beta[-1] <= BETA_TOL, strictly_decreasing(beta)
    ok = d2_trend and d2_final and beta_final and beta_trend
    record(7, ok, f"d2 {', '.join(f'{x:.4f}' for x in d2)} (decreasing: {d2_trend}, final < {D2_MAX:g}: {d2_final}); "
                  f"beta^2 {', '.join(f'{r.beta2:.3f}' for r in report.rows)} (final within {BETA_TOL:g}: "
                  f"{beta_final}, monotone: {beta_trend})")
    assert d2_final and beta_final
    assert d2_trend and beta_trend


def test_criterion_08_selection_and_rate(two_well):
    runs, report = two_well
    last = report.rows[-1]
    rho = [r.rho for r in report.rows]
    selected = last.well == 1 and report.details["Z"] == (1,)
    bound = report.details["q_bound"]
    ok = selected and strictly_decreasing(rho) and last.q <= Q_FACTOR * bound
    record(8, ok, f"final well {last.well} at ({last.zbar[0]:.6f}, 0, 0); rho {', '.join(f'{x:.3g}' for x in rho)} "
                  f"(decreasing); q = {last.q:.2f} vs {Q_FACTOR:g} x {bound:.2f}")
    assert ok


def test_criterion_09_multiplier(harmonic):
    _, report, _ = harmonic
    vals = [r.mu_eps2 for r in report.rows]
    ok = all(r.multiplier < 0 for r in report.rows) and all(MU_BRACKET[0] < v < MU_BRACKET[1] for v in vals)
    record(9, ok, f"mu eps^2 {', '.join(f'{v:.3f}' for v in vals)} in {MU_BRACKET}")
    assert ok


def test_criterion_10_determinism(tmp_path):
    ground = ["ground", "--gamma", ",".join(str(g) for g in BATTERY)]
    sweep = ["sweep", "--gammas", "1.8,1.9,1.95", "--n", "64", "--half-width", "8", "--no-plots"]
    names, same = [], True
    for argv in (ground, sweep):
        outs = [tmp_path / f"{argv[0]}{k}" for k in range(2)]
        for out in outs:
            assert main(["-o", str(out)] + argv) == 0
        for f in sorted(outs[0].glob("*.csv")):
            names.append(f.name)
            same &= f.read_bytes() == (outs[1] / f.name).read_bytes()
    record(10, same, f"{len(names)} CSV files byte-identical across reruns ({', '.join(sorted(set(names))[:6])}, ...)")
    assert same
