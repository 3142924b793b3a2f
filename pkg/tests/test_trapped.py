import math

import numpy as np
import pytest

from choquard.asymptotics import epsilon, tilde_e
from choquard.errors import ResolutionError
from choquard.fields import CartesianGrid
from choquard.potentials import PotentialSpec
from choquard.trapped import (concentration_scale, free_reference, lagrange_multiplier, smooth_cutoff,
                              solve_trapped, symmetry_defect, trial_upper_bound)

from conftest import ASTAR, MASS

SWEEP = (1.8, 1.9, 1.95)


def test_concentration_scale_matches_closed_form():
    assert concentration_scale(1.9, 1.5 * ASTAR, MASS[1.9]) == epsilon(1.9, 1.5 * ASTAR, MASS[1.9])
    assert math.isinf(concentration_scale(1.9, 0.0, MASS[1.9]))


@pytest.mark.parametrize("k", range(3))
def test_sweep_minimizer_invariants(harmonic_sweep, small_cart, ground_states, k):
    m = harmonic_sweep[k]
    assert m.gamma == SWEEP[k]
    assert m.mass == pytest.approx(1.0, abs=1e-12)
    assert m.residual < 1e-5
    assert m.gap >= 0.0
    lo, hi = m.diagnostics["gap_bracket"]
    assert lo <= m.gap <= hi
    assert np.all(m.w.values >= 0)
    bound = trial_upper_bound(m.gamma, m.a, m.potential, grid=small_cart, ground=ground_states[m.gamma])
    assert m.energy <= bound
    mu = lagrange_multiplier(m)
    assert mu == pytest.approx(m.multiplier, rel=1e-5)
    assert mu < 0
    assert -10 < mu * m.epsilon**2 < -0.01
    # the maximum of a symmetric trap's minimizer sits at the trap centre
    assert np.linalg.norm(m.zbar) < max(small_cart.spacing) * m.scale
    assert symmetry_defect(m) < 1e-6


def test_sweep_trends(harmonic_sweep):
    gaps = [m.gap for m in harmonic_sweep]
    pots = [m.potential_energy for m in harmonic_sweep]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert all(b < a for a, b in zip(pots, pots[1:]))
    last = harmonic_sweep[-1]
    assert last.gap < 0.1 * abs(tilde_e(last.gamma, last.a, last.ground_mass))


def test_energy_history_nonincreasing(harmonic_sweep):
    e = np.array(harmonic_sweep[0].energies)
    assert np.all(np.diff(e) <= 1e-10 * np.abs(e[1:]))


def test_physical_field_preserves_mass(harmonic_sweep):
    for m in harmonic_sweep:
        u = m.field
        assert u.mass == pytest.approx(1.0, abs=1e-12)
        assert u.grid.half_width[0] == pytest.approx(m.scale * m.w.grid.half_width[0])
        assert np.max(u.values) == pytest.approx(m.umax, rel=1e-2)


def test_harmonic_oscillator_limit(small_cart):
    m = solve_trapped(1.5, 0.0, PotentialSpec.harmonic(), small_cart)
    assert m.energy == pytest.approx(3.0, abs=1e-6)
    assert m.multiplier == pytest.approx(3.0, abs=1e-6)
    assert math.isnan(m.gap)
    # ground state of -Delta + |x|^2 is pi^{-3/4} exp(-|x|^2/2)
    assert m.umax == pytest.approx(math.pi**-0.75, rel=1e-6)


def test_free_reference_matches_closed_form(small_cart, ground_states):
    g, a = 1.5, 1.5 * ASTAR
    ref = free_reference(g, a, small_cart, ground_states[g])
    # Q decays like e^{-r}; the periodic box of half-width 8 truncates it at the 1e-4 level
    assert ref.energy == pytest.approx(tilde_e(g, a, MASS[g]), rel=1e-4)


def test_warm_start_reproduces(harmonic_sweep, small_cart, ground_states):
    m = harmonic_sweep[1]
    again = solve_trapped(m.gamma, m.a, m.potential, small_cart, init=m, ground=ground_states[m.gamma])
    assert again.energy == pytest.approx(m.energy, rel=1e-10)
    assert again.steps <= m.steps


def test_tabulated_matches_analytic(small_cart, ground_states):
    g, a = 1.5, 1.5 * ASTAR
    table_grid = CartesianGrid.cube(96, 10.0)
    V = PotentialSpec.tabulated(table_grid, table_grid.radius() ** 2, wells=[(0, 0, 0)])
    exact = solve_trapped(g, a, PotentialSpec.harmonic(), small_cart, ground=ground_states[g])
    tab = solve_trapped(g, a, V, small_cart, ground=ground_states[g])
    assert tab.energy == pytest.approx(exact.energy, rel=1e-6)


def test_deterministic(small_cart, ground_states):
    V = PotentialSpec.harmonic()
    a = 1.5 * ASTAR
    m1 = solve_trapped(1.7, a, V, small_cart)
    m2 = solve_trapped(1.7, a, V, small_cart)
    np.testing.assert_array_equal(m1.w.values, m2.w.values)
    assert m1.energy == m2.energy


def test_invalid_inputs(small_cart):
    V = PotentialSpec.harmonic()
    with pytest.raises(ValueError):
        solve_trapped(2.0, 1.0, V, small_cart)
    with pytest.raises(ValueError):
        solve_trapped(1.5, -1.0, V, small_cart)
    table = PotentialSpec.tabulated(small_cart, small_cart.radius() ** 2)
    with pytest.raises(ValueError):
        solve_trapped(1.5, 1.0, table, small_cart)


def test_unresolvable_scale_rejected():
    # without rescaling eps ~ 8e-4 at gamma = 1.95 is far below the lattice spacing
    with pytest.raises(ResolutionError):
        solve_trapped(1.95, 1.5 * ASTAR, PotentialSpec.harmonic(), CartesianGrid.cube(64, 8.0), rescale=False)


def test_smooth_cutoff():
    r = np.linspace(0, 3, 301)
    c = smooth_cutoff(r, 1.0)
    assert np.all(c[r <= 1.0] == 1.0) and np.all(c[r >= 2.0] == 0.0)
    assert np.all(np.diff(c) <= 0)
    assert np.max(np.abs(np.diff(c) / np.diff(r))) < 3.0


def test_trial_bound_errors(small_cart):
    V = PotentialSpec.harmonic()
    with pytest.raises(ValueError):
        trial_upper_bound(1.5, 4.0, V, x0=(1.0, 0.0, 0.0), grid=small_cart)
    with pytest.raises(ResolutionError):
        trial_upper_bound(1.5, 4.0, V, R=100.0, grid=small_cart)
    b, A = trial_upper_bound(1.5, 4.0, V, grid=small_cart, details=True)
    assert A >= 1.0 and np.isfinite(b)


def test_box_too_small_for_profile():
    with pytest.raises(ResolutionError, match="box too small"):
        solve_trapped(1.9, 1.5 * ASTAR, PotentialSpec.harmonic(), CartesianGrid.cube(32, 4.0))
