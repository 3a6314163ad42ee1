"""Displaced local coordinates along velocity characteristics (single Euler step)."""
import warnings
from dataclasses import dataclass

import numpy as np

DOWNSTREAM, UPSTREAM = "downstream", "upstream"
WARN_LIMIT = 2.0


class LargeDisplacementWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class DisplacementField:
    direction: str
    dt: float
    velocity: object  # callable u(x); see assembly.VelocityModel
    integrator: str = "euler"
    tuning: float = 1.0

    def __post_init__(self):
        if self.direction not in (DOWNSTREAM, UPSTREAM):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.integrator != "euler":
            raise NotImplementedError(f"only the euler integrator is available, got {self.integrator!r}")

    @property
    def sign(self):
        return 1.0 if self.direction == DOWNSTREAM else -1.0

    def reversed(self):
        """The same displacement traced the other way along the characteristic."""
        other = UPSTREAM if self.direction == DOWNSTREAM else DOWNSTREAM
        return DisplacementField(other, self.dt, self.velocity, self.integrator, self.tuning)


def downstream(velocity, dt, tuning=1.0):
    return DisplacementField(DOWNSTREAM, float(dt), velocity, tuning=tuning)


def upstream(velocity, dt, tuning=1.0):
    return DisplacementField(UPSTREAM, float(dt), velocity, tuning=tuning)


def _warn_if_large(xi_d):
    big = np.max(np.abs(xi_d), initial=0.0)
    if big > WARN_LIMIT:
        warnings.warn(
            f"displaced coordinate reaches |xi| = {big:.3g} > {WARN_LIMIT}; shifted mass matrix may be ill conditioned",
            LargeDisplacementWarning,
            stacklevel=3,
        )


def displace_points(shift, mesh, xi):
    """Displaced coordinates of local points xi in every element, shape (n_e, len(xi)).

    xi_d = xi +/- tuning * dt * u(x(xi)) / |J|, velocity taken in the point's own element.
    """
    xi = np.asarray(xi, dtype=np.float64)
    x = mesh.to_physical(xi)
    if shift is None or shift.dt == 0.0:
        return np.broadcast_to(xi, x.shape).copy()
    u = np.broadcast_to(np.asarray(shift.velocity(x), dtype=np.float64), x.shape)
    xi_d = xi[None, :] + shift.sign * shift.tuning * shift.dt * u / mesh.jac
    _warn_if_large(xi_d)
    return xi_d


def displace(shift, mesh, element, xi):
    if not 0 <= element < mesh.n_e:
        raise IndexError(f"element {element} out of range")
    x = (element + 0.5 * (xi + 1.0)) * mesh.h
    u = float(np.asarray(shift.velocity(np.array([x])), dtype=np.float64).ravel()[0])
    xi_d = xi + shift.sign * shift.tuning * shift.dt * u / mesh.jac
    _warn_if_large(np.array([xi_d]))
    return xi_d
