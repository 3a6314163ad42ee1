"""Drivers for the 1D/2D experiments shared by the command line and the acceptance suite."""
from dataclasses import dataclass

import numpy as np

from .assembly import VelocityModel
from .departure import downstream
from .mesh import Q, Field, build_mesh, l2_error, project_to_Q
from .operators import build_B, build_B_PG, build_operator, solve_flux
from .timestep import CENTERED, TimeLoopConfig, run

TWO_PI = 2.0 * np.pi


def cosine_profile(L=1.0):
    return lambda x: 0.5 * (1.0 - np.cos(TWO_PI * x / L))


def cosine_profile_dx(L=1.0):
    return lambda x: 0.5 * (TWO_PI / L) * np.sin(TWO_PI * x / L)


def varying_velocity(L=1.0):
    return lambda x: 0.4 + 0.2 * (1.0 + np.sin(TWO_PI * x / L))


def tanh_pulse(L=1.0):
    """Smoothed top hat on [0.4, 0.6] L with steep tanh flanks."""

    def f(x):
        s = np.asarray(x) / L
        return np.where(s < 0.5, 0.5 + 0.5 * np.tanh(200.0 * (s - 0.4)), 0.5 + 0.5 * np.tanh(200.0 * (0.6 - s)))

    return f


def velocity_from_spec(spec, L=1.0):
    """A number means a constant speed; ``"varying"`` is 0.4 + 0.2 (1 + sin 2 pi x / L)."""
    if isinstance(spec, str) and spec.strip().lower() == "varying":
        return VelocityModel.analytic(varying_velocity(L))
    return VelocityModel.constant(float(spec))


def _speed(u, L):
    if isinstance(u, str) and u.strip().lower() == "varying":
        return varying_velocity(L)
    return lambda x: np.full(np.shape(x), float(u))


def fit_convergence(n_e, errors):
    """Least-squares slope of log(error) against log(1/n_e)."""
    n_e = np.asarray(n_e, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if n_e.size < 3 or n_e.size != errors.size:
        raise ValueError("need at least 3 (n_e, error) pairs of equal length")
    if np.any(errors <= 0) or np.any(n_e <= 0):
        raise ValueError("errors and resolutions must be positive")
    if np.unique(n_e).size < 2:
        raise ValueError("resolutions must not all coincide")
    return float(np.polyfit(np.log(1.0 / n_e), np.log(errors), 1)[0])


@dataclass
class ConvergenceTable:
    n_e: list
    error_original: list
    error_pg: list

    @property
    def slopes(self):
        return fit_convergence(self.n_e, self.error_original), fit_convergence(self.n_e, self.error_pg)


def flux_convergence(p, resolutions, dt_over_ne=0.1, L=1.0, u="varying", tuning=1.0, nquad=None):
    """L2 error of the projected flux u q, unshifted and with downstream-displaced test functions."""
    qf, uf = cosine_profile(L), _speed(u, L)
    vel = velocity_from_spec(u, L)
    e0, e1 = [], []
    for ne in resolutions:
        mesh = build_mesh(ne, L, p)
        q = project_to_Q(mesh, qf)
        exact = lambda x: uf(x) * qf(x)  # noqa: E731
        e0.append(l2_error(solve_flux(mesh, vel, q, None, nquad), exact))
        shift = downstream(vel, dt_over_ne / ne, tuning)
        e1.append(l2_error(solve_flux(mesh, vel, q, shift, nquad), exact))
    return ConvergenceTable(list(resolutions), e0, e1)


def material_convergence(p, resolutions, dt_over_ne=0.1, L=1.0, u="varying", tuning=1.0, nquad=None):
    """L2 error of M^-1 B q against u dq/dx for B and B_PG."""
    qf, dq = cosine_profile(L), cosine_profile_dx(L)
    uf = _speed(u, L)
    vel = velocity_from_spec(u, L)
    exact = lambda x: uf(x) * dq(x)  # noqa: E731
    e0, e1 = [], []
    for ne in resolutions:
        mesh = build_mesh(ne, L, p)
        q = project_to_Q(mesh, qf).coeffs
        B, Bp = build_B(mesh, vel, nquad), build_B_PG(mesh, vel, dt_over_ne / ne, tuning, nquad)
        e0.append(l2_error(Field(Q, mesh, B.tendency(q)), exact))
        e1.append(l2_error(Field(Q, mesh, Bp.tendency(q)), exact))
    return ConvergenceTable(list(resolutions), e0, e1)


def advect1d(kind, p=5, n_e=20, u=0.4, dt=0.005, T=None, L=1.0, tuning=1.0, nquad=None, record_every=1, scheme=CENTERED):
    """Advect the tanh pulse for time T (default one revolution L/|u|); returns (history, final field)."""
    vel = velocity_from_spec(u, L)
    mesh = build_mesh(n_e, L, p)
    if T is None:
        T = L / abs(float(u))
    n_steps = int(round(T / dt))
    op = build_operator(kind, mesh, vel, dt, tuning, nquad)
    q0 = project_to_Q(mesh, tanh_pulse(L))
    cfg = TimeLoopConfig(dt=dt, n_steps=n_steps, scheme=scheme, operator=op, record_every=record_every)
    return run(cfg, q0)
