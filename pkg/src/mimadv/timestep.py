"""Centered (trapezoidal) and explicit RK3 time integration."""
import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

CENTERED, RK3 = "centered", "rk3"


def _dense(op):
    if hasattr(op, "toarray"):
        return op.toarray()
    return np.asarray(op, dtype=np.float64)


class CenteredStepper:
    """q^{n+1} = (M + dt/2 K)^-1 (M - dt/2 K) q^n with the left factor cached."""

    def __init__(self, M, K, dt):
        M, K = _dense(M), _dense(K)
        self.dt = float(dt)
        self.lhs = M + 0.5 * self.dt * K
        self.rhs = M - 0.5 * self.dt * K
        self._lu = sla.lu_factor(self.lhs)
        d = np.abs(np.diag(self._lu[0]))
        if d.min() <= 1e-14 * d.max():
            raise np.linalg.LinAlgError("centered step matrix M + dt/2 K is singular")

    def __call__(self, q):
        return sla.lu_solve(self._lu, self.rhs @ q)

    def residual(self, q_new, q_old):
        b = self.rhs @ q_old
        return float(np.linalg.norm(self.lhs @ q_new - b) / max(np.linalg.norm(b), 1e-300))


def step_centered(M, K, q, dt, rtol=1e-12):
    stepper = CenteredStepper(M, K, dt)
    q_new = stepper(np.asarray(q, dtype=np.float64))
    res = stepper.residual(q_new, q)
    if res > rtol:
        raise np.linalg.LinAlgError(f"centered step residual {res:.3e} exceeds {rtol:.1e}")
    return q_new


def step_rk3(y, q, dt, t=0.0):
    """Three-stage RK3; y(q, t) is the M_Q^-1-premultiplied tendency with velocity at time t.

    Velocity levels: stage 1 at t, stage 2 at t + dt, stage 3 at t + dt/2.
    """
    y0 = y(q, t)
    q1 = q - dt * y0
    y1 = y(q1, t + dt)
    q2 = q - 0.25 * dt * (y0 + y1)
    y2 = y(q2, t + 0.5 * dt)
    return q - (dt / 6.0) * (y0 + y1 + 4.0 * y2)


@dataclass
class TimeLoopConfig:
    dt: float
    n_steps: int
    scheme: str = CENTERED
    operator: object = None  # AdvectionOperator, or y(q, t) callable for rk3
    record_every: int = 1
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps!r}")
        if self.scheme not in (CENTERED, RK3):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class History:
    step: list = field(default_factory=list)
    time: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    total_variation: list = field(default_factory=list)

    def record(self, step, time, diag):
        self.step.append(int(step))
        self.time.append(float(time))
        self.mass.append(diag["mass"])
        self.energy.append(diag["energy"])
        self.total_variation.append(diag["total_variation"])

    def __len__(self):
        return len(self.step)

    def as_arrays(self):
        return {k: np.asarray(getattr(self, k)) for k in ("step", "time", "mass", "energy", "total_variation")}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "time", "mass", "energy", "total_variation"])
            for row in zip(self.step, self.time, self.mass, self.energy, self.total_variation):
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def run(config, q0):
    """Integrate q0 forward; returns (History, final field)."""
    q = np.array(q0.coeffs, dtype=np.float64)
    hist = History()
    hist.record(0, config.t0, q0.diagnostics())
    op = config.operator
    if config.scheme == CENTERED:
        advance = CenteredStepper(op.mass, op.matrix, config.dt)
    else:
        tend = op if callable(op) and not hasattr(op, "tendency") else (lambda v, t: op.tendency(v))

        def advance(v, t):
            return step_rk3(tend, v, config.dt, t)

    t = config.t0
    for n in range(1, config.n_steps + 1):
        q = advance(q) if config.scheme == CENTERED else advance(q, t)
        t = config.t0 + n * config.dt
        if n % config.record_every == 0 or n == config.n_steps:
            hist.record(n, t, q0.with_coeffs(q).diagnostics())
    return hist, q0.with_coeffs(q)
