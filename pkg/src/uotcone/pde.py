"""1D periodic-grid simulator for the density-level Hamiltonian systems.

Discretization notes.  The transport term div(rho grad theta) uses the
conservative flux form with half-point densities, and every quadratic
gradient quantity uses the matching staggered (half-point) differences.
With that pairing the semi-discrete system is exactly canonical for the
discrete Hamiltonian, so the discrete mass law d(m)/dt = xi m (flux
telescoping), the energy conservation, and the constant-acceleration law
d^2 m/dt^2 = H all hold to time-integrator accuracy rather than O(h^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (MassError, NonFiniteError, PositivityError,
                     SingularSystemError, StepGuardError)
from .trace import GeodesicTrace

DT_GUARD_FACTOR = 0.2


@dataclass(frozen=True)
class Grid1D:
    n: int
    length: float = 2.0 * np.pi

    def __post_init__(self):
        if self.n < 8:
            raise ValueError("grid needs at least 8 points")
        if not (self.length > 0.0):
            raise ValueError("domain length must be positive")

    @property
    def h(self):
        return self.length / self.n

    @property
    def x(self):
        return np.arange(self.n) * self.h


def _dplus(f, h):
    """Forward difference (value at i + 1/2)."""
    return (np.roll(f, -1) - f) / h


def _half(f):
    """Average onto half-points (value at i + 1/2)."""
    return 0.5 * (f + np.roll(f, -1))


def grad_sq_nodes(theta, h):
    """|grad theta|^2 at nodes: mean of the two adjacent half-point squares."""
    gp = _dplus(theta, h)
    return 0.5 * (gp**2 + np.roll(gp, 1) ** 2)


def div_flux(rho, theta, h):
    """Conservative form of div(rho grad theta): (F_{i+1/2} - F_{i-1/2}) / h."""
    F = _half(rho) * _dplus(theta, h)
    return (F - np.roll(F, 1)) / h


def kinetic_energy(grid, rho, theta):
    """h * sum of rho_{i+1/2} ((theta_{i+1} - theta_i)/h)^2, the discrete
    integral of |grad theta|^2 rho."""
    return float(grid.h * np.sum(_half(rho) * _dplus(theta, grid.h) ** 2))


def total_mass(grid, rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0.0):
        raise PositivityError("density must be strictly positive",
                              min_value=float(np.min(rho)))
    m = grid.h * float(np.sum(rho))
    if m <= 0.0:
        raise MassError("total mass must be positive", m=m)
    return m


@dataclass(frozen=True)
class PdeState:
    grid: Grid1D
    rho: np.ndarray
    theta: np.ndarray

    def validate(self):
        rho = np.asarray(self.rho, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if rho.shape != (self.grid.n,) or theta.shape != (self.grid.n,):
            raise ValueError("fields must match the grid size")
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(rho)):
            raise NonFiniteError("fields must be finite")
        total_mass(self.grid, rho)
        return PdeState(grid=self.grid, rho=rho, theta=theta)


def xi_of(state):
    """Logarithmic mass rate xi = (h sum theta rho) / m."""
    m = total_mass(state.grid, state.rho)
    return float(state.grid.h * np.sum(state.theta * state.rho) / m)


def hamiltonian_small(state):
    """H = (1/2) int |grad theta|^2 rho + (1/(2m)) (int theta rho)^2."""
    m = total_mass(state.grid, state.rho)
    pairing = state.grid.h * float(np.sum(state.theta * state.rho))
    return 0.5 * kinetic_energy(state.grid, state.rho, state.theta) \
        + 0.5 * pairing**2 / m


def hamiltonian_wfr(state):
    """H = (1/2) int (|grad theta|^2 + theta^2) rho."""
    total_mass(state.grid, state.rho)
    reaction = state.grid.h * float(np.sum(state.theta**2 * state.rho))
    return 0.5 * (kinetic_energy(state.grid, state.rho, state.theta) + reaction)


def _raw_small_rhs(grid, rho, theta):
    # RK4 stage states may dip negative; only the total mass must stay
    # positive for the division defining xi
    h = grid.h
    m = h * float(np.sum(rho))
    if m <= 0.0:
        raise MassError("total mass became nonpositive", m=m)
    xi = h * float(np.sum(theta * rho)) / m
    drho = -div_flux(rho, theta, h) + xi * rho
    dtheta = -0.5 * grad_sq_nodes(theta, h) - xi * theta + 0.5 * xi**2
    return drho, dtheta


def _raw_wfr_rhs(grid, rho, theta):
    h = grid.h
    drho = -div_flux(rho, theta, h) + rho * theta
    dtheta = -0.5 * grad_sq_nodes(theta, h) - 0.5 * theta**2
    return drho, dtheta


def small_rhs(state):
    """Conical-model flow: rhodot = -div(rho grad theta) + xi rho,
    thetadot = -|grad theta|^2 / 2 - xi theta + xi^2 / 2."""
    state = state.validate()
    return _raw_small_rhs(state.grid, state.rho, state.theta)


def wfr_rhs(state):
    """Large-model flow: rhodot = -div(rho grad theta) + rho theta,
    thetadot = -|grad theta|^2 / 2 - theta^2 / 2."""
    state = state.validate()
    return _raw_wfr_rhs(state.grid, state.rho, state.theta)


_MODELS = {
    "small": (_raw_small_rhs, hamiltonian_small),
    "wfr": (_raw_wfr_rhs, hamiltonian_wfr),
}


def integrate_pde(state, model, dt, steps):
    """Fixed-step RK4 evolution of the density/potential pair.

    Refuses dt above the stability heuristic 0.2 h^2 / max|grad theta_0| and
    aborts with the step index when the density loses positivity.  The trace
    columns are t, m, xi, H followed by rho and theta node values.
    """
    if model not in _MODELS:
        raise ValueError(f"unknown model {model!r}; expected 'small' or 'wfr'")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be a positive integer")
    state = state.validate()
    rhs, energy = _MODELS[model]
    h = state.grid.h
    gmax = float(np.max(np.abs(_dplus(state.theta, h))))
    if gmax > 0.0 and dt > DT_GUARD_FACTOR * h * h / gmax:
        raise StepGuardError(
            "time step exceeds the stability guard",
            dt=dt, bound=DT_GUARD_FACTOR * h * h / gmax, max_grad=gmax)

    n = state.grid.n
    cols = (["t", "m", "xi", "H"]
            + [f"rho{i}" for i in range(n)] + [f"theta{i}" for i in range(n)])
    data = np.empty((steps + 1, len(cols)))

    rho = state.rho.copy()
    theta = state.theta.copy()
    grid = state.grid
    for k in range(steps + 1):
        st = PdeState(grid=grid, rho=rho, theta=theta)
        data[k, 0] = k * dt
        data[k, 1] = total_mass(grid, rho)
        data[k, 2] = xi_of(st)
        data[k, 3] = energy(st)
        data[k, 4:4 + n] = rho
        data[k, 4 + n:] = theta
        if k == steps:
            break
        try:
            k1 = rhs(grid, rho, theta)
            k2 = rhs(grid, rho + 0.5 * dt * k1[0], theta + 0.5 * dt * k1[1])
            k3 = rhs(grid, rho + 0.5 * dt * k2[0], theta + 0.5 * dt * k2[1])
            k4 = rhs(grid, rho + dt * k3[0], theta + dt * k3[1])
        except MassError as exc:
            exc.details["step"] = k + 1
            raise
        rho = rho + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        theta = theta + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(theta))):
            raise NonFiniteError("non-finite fields during integration", step=k + 1)
        if np.any(rho <= 0.0):
            raise PositivityError("density lost positivity", step=k + 1,
                                  min_value=float(np.min(rho)))
    return GeodesicTrace(columns=tuple(cols), data=data)


def _elliptic_matrix(grid, rho):
    """Sparse operator of theta -> -div(rho grad theta) with the last row
    replaced by the zero-mean gauge h * sum(theta) = 0."""
    n = grid.n
    h2 = grid.h**2
    rh = _half(rho)  # rho_{i+1/2}
    rows, cols, vals = [], [], []
    for i in range(n - 1):
        rm = rh[i - 1] if i > 0 else rh[n - 1]
        rp = rh[i]
        rows += [i, i, i]
        cols += [(i - 1) % n, i, (i + 1) % n]
        vals += [-rm / h2, (rm + rp) / h2, -rp / h2]
    rows += [n - 1] * n
    cols += list(range(n))
    vals += [grid.h] * n
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def solve_potential(grid, rho, rhodot):
    """Solve -div(rho grad theta) = rhodot - xi rho on the periodic grid.

    xi = (h sum rhodot) / m is forced by solvability (the flux divergence
    integrates to zero), and the elliptic part of theta carries the zero-mean
    gauge.  Returns (theta, xi).
    """
    rho = np.asarray(rho, dtype=float)
    rhodot = np.asarray(rhodot, dtype=float)
    m = total_mass(grid, rho)
    xi = float(grid.h * np.sum(rhodot) / m)
    b = rhodot - xi * rho
    rhs = np.append(b[:-1], 0.0)
    A = _elliptic_matrix(grid, rho)
    theta = spla.spsolve(A.tocsc(), rhs)
    if not np.all(np.isfinite(theta)):
        raise SingularSystemError("elliptic solve produced non-finite values")
    # residual of the original (unreplaced) equation on every node
    res = -div_flux(rho, theta, grid.h) - b
    scale = max(1.0, float(np.max(np.abs(b))))
    if float(np.max(np.abs(res))) > 1e-9 * scale:
        raise SingularSystemError("elliptic solve failed the residual check",
                                  residual=float(np.max(np.abs(res))))
    return theta, xi


def state_from_velocity(grid, rho, rhodot):
    """Horizontal lift of a density velocity: the state whose flow reproduces
    rhodot, with the additive constant of theta fixed by the mass pairing."""
    theta, xi = solve_potential(grid, rho, rhodot)
    m = total_mass(grid, rho)
    c = xi - float(grid.h * np.sum(theta * rho) / m)
    return PdeState(grid=grid, rho=rho, theta=theta + c)


def small_metric_eval(grid, rho, rhodot):
    """Squared length of a density velocity in the conical metric:
    int |grad theta|^2 rho + m xi^2 for the solved potential."""
    theta, xi = solve_potential(grid, rho, rhodot)
    m = total_mass(grid, rho)
    return kinetic_energy(grid, rho, theta) + m * xi**2


def gdiv_metric_eval(grid, rho, rhodot):
    """Divergence-supplemented metric: int |grad S|^2 rho + int (rhodot/rho)^2 rho,
    with S solving the same elliptic problem (multiplier kappa = xi)."""
    S, _ = solve_potential(grid, rho, rhodot)
    rho = np.asarray(rho, dtype=float)
    rhodot = np.asarray(rhodot, dtype=float)
    fisher_rao = float(grid.h * np.sum(rhodot**2 / rho))
    return kinetic_energy(grid, rho, S) + fisher_rao


def fisher_rao_cone_geodesic(rho0, rho1, t):
    """Flat-cone geodesic of the scaling metric: pointwise
    ((1-t) sqrt(rho0) + t sqrt(rho1))^2."""
    rho0 = np.asarray(rho0, dtype=float)
    rho1 = np.asarray(rho1, dtype=float)
    if np.any(rho0 <= 0.0) or np.any(rho1 <= 0.0):
        raise PositivityError("endpoint densities must be strictly positive")
    r = (1.0 - t) * np.sqrt(rho0) + t * np.sqrt(rho1)
    return r * r
