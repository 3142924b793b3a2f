import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choquard.fields import CartesianGrid, Field, RadialGrid, sphere_area


def gaussian_mass(alpha):
    return (math.pi / alpha) ** 1.5


def gaussian_kinetic(alpha):
    return 1.5 * alpha * (math.pi / alpha) ** 1.5


def test_sphere_area():
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2, rel=1e-15)


@pytest.mark.parametrize("kwargs", [dict(dim=2), dict(n=4), dict(r_max=0.0), dict(scheme="cheb"),
                                    dict(dim=4, scheme="spectral")])
def test_radial_grid_rejects(kwargs):
    with pytest.raises(ValueError):
        RadialGrid(**kwargs)


@pytest.mark.parametrize("n", [30, 33, 62, 98])
def test_cartesian_grid_rejects_unfriendly_counts(n):
    with pytest.raises(ValueError):
        CartesianGrid.cube(n, 8.0)


def test_cartesian_geometry():
    g = CartesianGrid.cube(64, 8.0, center=(1.0, -2.0, 0.5))
    assert g.spacing == (0.25, 0.25, 0.25)
    assert g.cell_volume == pytest.approx(0.25**3)
    assert g.offsets(0)[0] == -8.0 and g.offsets(0)[32] == 0.0
    assert g.axes()[1][32] == -2.0
    moved = g.with_frame(4.0, (0, 0, 0))
    assert moved.n == g.n and moved.spacing == (0.125,) * 3
    assert g.radius()[32, 32, 32] == 0.0


@pytest.mark.parametrize("scheme", ["spectral", "fd"])
def test_radial_gaussian_integrals(scheme):
    g = RadialGrid(3, 4096, 20.0, scheme)
    alpha = 1.7
    u = Field.from_function(g, lambda r: np.exp(-0.5 * alpha * r**2))
    tol = 1e-12 if scheme == "spectral" else 1e-4
    assert u.mass == pytest.approx(gaussian_mass(alpha), rel=tol)
    assert u.kinetic == pytest.approx(gaussian_kinetic(alpha), rel=tol)


def test_radial_fd_any_dimension():
    g = RadialGrid(5, 4096, 20.0)
    u = np.exp(-0.5 * g.r**2)
    # int_{R^5} e^{-r^2} = pi^{5/2}
    assert g.integrate(u**2) == pytest.approx(math.pi**2.5, rel=1e-5)
    assert g.method == "fd"


@pytest.mark.parametrize("derivative, tol", [("spectral", 1e-12), ("fd", 2e-2)])
def test_cartesian_gaussian_integrals(derivative, tol):
    g = CartesianGrid.cube(64, 8.0, derivative=derivative)
    alpha = 1.3
    u = Field.from_function(g, lambda x, y, z: np.exp(-0.5 * alpha * (x * x + y * y + z * z)))
    assert u.mass == pytest.approx(gaussian_mass(alpha), rel=1e-12)
    assert u.kinetic == pytest.approx(gaussian_kinetic(alpha), rel=tol)


def test_laplacian_of_gaussian_radial_and_cartesian():
    alpha = 1.1
    g = RadialGrid(3, 2048, 20.0)
    r = g.r
    u = np.exp(-0.5 * alpha * r**2)
    exact = (alpha**2 * r**2 - 3 * alpha) * u
    assert np.max(np.abs(g.laplacian(u) - exact)) < 1e-8  # 1/r roundoff at the first node
    c = CartesianGrid.cube(64, 8.0)
    rc = c.radius()
    uc = np.exp(-0.5 * alpha * rc**2)
    assert np.max(np.abs(c.laplacian(uc) - (alpha**2 * rc**2 - 3 * alpha) * uc)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(0.05, 50.0), seed=st.integers(0, 2**31 - 1))
def test_solve_shifted_inverts_operator_radial(shift, seed):
    g = RadialGrid(3, 512, 20.0)
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    f = sum(ci * np.exp(-((g.r / (i + 1)) ** 2)) for i, ci in enumerate(c))
    u = g.solve_shifted(f, shift)
    back = shift * u - g.laplacian(u)
    assert np.max(np.abs(back - f)) < 1e-9 * max(1.0, np.max(np.abs(f)))


@settings(max_examples=10, deadline=None)
@given(shift=st.floats(0.05, 50.0), seed=st.integers(0, 2**31 - 1))
def test_solve_shifted_inverts_operator_cartesian(shift, seed):
    g = CartesianGrid.cube(32, 6.0)
    f = np.random.default_rng(seed).normal(size=g.shape)
    u = g.solve_shifted(f, shift)
    assert np.max(np.abs(shift * u - g.laplacian(u) - f)) < 1e-9 * np.max(np.abs(f))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_kinetic_is_minus_inner_laplacian(seed):
    g = RadialGrid(3, 512, 20.0)
    rng = np.random.default_rng(seed)
    u = sum(rng.normal() * np.exp(-((g.r - rng.uniform(0, 3)) / rng.uniform(0.5, 2)) ** 2) for _ in range(3))
    assert g.kinetic(u) == pytest.approx(-g.inner(g.laplacian(u), u), rel=1e-10, abs=1e-12)
    assert g.kinetic(u) >= 0.0


def test_field_is_immutable_and_checked():
    g = RadialGrid(3, 64, 10.0)
    u = Field(g, np.ones(64))
    with pytest.raises(ValueError):
        u.values[0] = 2.0
    with pytest.raises(ValueError):
        Field(g, np.ones(63))
    with pytest.raises(ValueError):
        Field(g, np.full(64, np.nan))
    assert u.with_values(2 * np.ones(64)).mass == pytest.approx(4 * u.mass)


def test_boundary_value():
    g = RadialGrid(3, 64, 10.0)
    assert g.boundary_value(np.arange(64.0)) == 63.0
    c = CartesianGrid.cube(32, 4.0)
    v = np.zeros(c.shape)
    v[0, 5, 5] = -3.0
    assert c.boundary_value(v) == 3.0
