"""Independent radial shooting solver for the N = 3 ground state.

Used only as an oracle for the spectral solver in ``groundstate``; it shares no
discretization with it.  The Riesz potential is a singularity-subtracted
trapezoid rule on the closed-form shell kernel, and the profile comes from ODE
shooting.

The outer loop is a self-consistent field iteration.  For the potential phi of
the current profile, bisection finds the eigenvalue lam for which

    psi'' + 2 psi'/r + (lam phi - 1) psi = 0,   psi(0) = 1, psi'(0) = 0

has a decaying positive solution.  The next potential is the potential of
c psi with c fixed by matching lam phi at the origin, so lam -> 1 at the fixed
point.  Anderson mixing on the potential accelerates the iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import anderson

from .errors import ConvergenceError

__all__ = ["ShootingResult", "shoot_ground_state", "shell_potential_matrix"]


@dataclass(frozen=True)
class ShootingResult:
    gamma: float
    mass: float
    eigenvalue: float
    r: np.ndarray
    profile: np.ndarray


def _kernel_integral(r, R, gamma):
    """int_0^R k(r, s) ds for the shell kernel without its 2 pi / r prefactor."""
    if gamma < 2.0:
        a1 = 3.0 - gamma
        return ((r + R) ** a1 - 2.0 * r**a1 - (R - r) ** a1) / (a1 * (2.0 - gamma))

    def xlx(x):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)

    return xlx(r + R) - 2.0 * xlx(r) - xlx(R - r)


def shell_potential_matrix(s, gamma):
    """Matrix A with phi(s_i) = (A @ (rho * s))_i for rho sampled on the uniform grid s.

    Uses phi(r) = (2 pi / r) int k(r, s) rho(s) s ds with
    k = ((r + s)^a - |r - s|^a) / a, a = 2 - gamma (log form at gamma = 2),
    and subtracts the value at s = r before applying the trapezoid rule.
    """
    r = s[:, None]
    t = s[None, :]
    diff = np.abs(r - t)
    with np.errstate(divide="ignore", invalid="ignore"):
        if gamma < 2.0:
            a = 2.0 - gamma
            k = ((r + t) ** a - diff**a) / a
        else:
            k = np.log(r + t) - np.log(diff)
    k[~np.isfinite(k)] = 0.0
    w = np.full(len(s), s[1] - s[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    kw = k * w[None, :]
    A = kw.copy()
    A[np.diag_indices_from(A)] += _kernel_integral(s, s[-1], gamma) - kw.sum(axis=1)
    return 2.0 * math.pi / s[:, None] * A


def _shoot(lam, phi, r0, r_end):
    """Integrate from r0; return (+1 if psi turns up, -1 if it crosses zero, solution)."""
    phi0 = float(phi(0.0))

    def rhs(r, y):
        return [y[1], -2.0 * y[1] / r + (1.0 - lam * phi(r)) * y[0]]

    def crosses(r, y):
        return y[0]

    def turns(r, y):
        return y[1]

    crosses.terminal = True
    crosses.direction = -1
    turns.terminal = True
    turns.direction = 1
    c2 = (1.0 - lam * phi0) / 6.0
    y0 = [1.0 + c2 * r0**2, 2.0 * c2 * r0]
    sol = solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=1e-11, atol=1e-14,
                    events=(crosses, turns), dense_output=True)
    if sol.t_events[0].size:
        return -1, sol
    if sol.t_events[1].size:
        return +1, sol
    return (+1 if sol.y[1, -1] > 0 else -1), sol


def _eigen(phi, r0, r_end, lo, hi, tol=1e-11):
    while _shoot(lo, phi, r0, r_end)[0] < 0:
        lo *= 0.5
    while _shoot(hi, phi, r0, r_end)[0] > 0:
        hi *= 2.0
    sol = None
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        sign, sol = _shoot(mid, phi, r0, r_end)
        if sign > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), sol


def shoot_ground_state(gamma: float, *, r_end: float = 14.0, points: int = 2801, tol: float = 1e-7,
                       max_iter: int = 40) -> ShootingResult:
    """Ground state of -Delta Q + Q = (|x|^{-gamma} * Q^2) Q in R^3 by shooting + SCF."""
    s = np.linspace(0.0, r_end, points)
    inner = s[1:]
    A = shell_potential_matrix(inner, gamma)
    r0 = 1e-6
    state = {"lam": 1.0}
    knots = np.concatenate([-inner[:8][::-1], inner])

    def profile(phi_vals):
        phi = CubicSpline(knots, np.concatenate([phi_vals[:8][::-1], phi_vals]))
        lam, sol = _eigen(phi, r0, r_end, 0.5 * state["lam"], 2.0 * state["lam"])
        state["lam"] = lam
        r_stop = sol.t[-1]
        psi = np.where(s <= r_stop, sol.sol(np.clip(s, r0, r_stop))[0], 0.0)
        return lam, np.maximum(psi, 0.0)

    def update(phi_vals):
        # psi(0) = 1; rescale so the new potential matches lam * phi at the origin
        lam, psi = profile(phi_vals)
        new = A @ (psi[1:] ** 2 * inner)
        return lam * phi_vals[0] / new[0] * new

    Q0 = 2.0 * np.exp(-0.5 * s**2)
    phi_vals = A @ (Q0[1:] ** 2 * inner)
    for _ in range(2):
        phi_vals = update(phi_vals)
    try:
        phi_vals = anderson(lambda f: update(f) - f, phi_vals, f_tol=tol * phi_vals[0], maxiter=max_iter, M=6)
    except Exception as exc:  # scipy raises NoConvergence, a bare Exception subclass
        raise ConvergenceError(f"shooting SCF did not converge: {exc}", {"eigenvalue": state["lam"]}) from exc
    lam, psi = profile(phi_vals)
    c2 = lam * phi_vals[0] / (A @ (psi[1:] ** 2 * inner))[0]
    Q = math.sqrt(c2) * psi
    mass = 4.0 * math.pi * trapezoid(Q**2 * s**2, s)
    return ShootingResult(float(gamma), float(mass), state["lam"], s, Q)
