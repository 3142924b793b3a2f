import numpy as np
import pytest

from choquard.shooting import shell_potential_matrix, shoot_ground_state

from conftest import ASTAR

SHOOT_ASTAR = 2.8526942309988805  # frozen oracle value at the default r_end and points


@pytest.fixture(scope="module")
def shot():
    return shoot_ground_state(2.0)


def test_shooting_oracle_frozen(shot):
    assert shot.mass == pytest.approx(SHOOT_ASTAR, rel=1e-6)
    assert shot.eigenvalue == pytest.approx(1.0, abs=1e-7)


def test_shooting_agrees_with_spectral_solver(shot):
    assert abs(shot.mass - ASTAR) / ASTAR < 5e-3
    assert np.all(shot.profile >= 0)
    assert np.all(shot.profile[shot.r < 10.0] > 0)


def test_shell_potential_of_uniform_ball():
    # rho = 1 on the ball of radius 1, gamma = 1: phi(0) = 2 pi R^2 = 2 pi; outside phi = (4 pi / 3) / r
    s = np.linspace(0.0, 3.0, 3001)[1:]
    rho = (s <= 1.0).astype(float)
    phi = shell_potential_matrix(s, 1.0) @ (rho * s)
    i = np.searchsorted(s, 2.0)
    assert phi[i] == pytest.approx(4 * np.pi / 3 / s[i], rel=5e-3)
