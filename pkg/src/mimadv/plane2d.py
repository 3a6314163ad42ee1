"""Doubly periodic 2D extension: tensor flux/tracer bases, divergence incidence and RK3 advection.

Global numbering, with N = n_e p DOF lines per direction and (I, J) the (x, y) line indices:
    tracer (Q)       J N + I
    x-flux (nodal x) J N + I
    y-flux (nodal y) N^2 + J N + I
"""
import csv
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .assembly import LinearOperator
from .mesh import Q, build_mesh, default_nquad
from .polybasis import build_basis, gauss_rule
from .timestep import step_rk3

TRANSLATION, DEFORMATIONAL = "translation", "deformational"
CG_RTOL = 1e-12


class IterativeSolverError(RuntimeError):
    pass


# ---- tensor index maps -------------------------------------------------------


def beta_index(p, comp, i, j):
    """Local flux index: comp 0 is x-directed (i nodal, j edge), comp 1 y-directed (i edge, j nodal)."""
    if comp == 0:
        if not (0 <= i <= p and 0 <= j < p):
            raise IndexError(f"x-flux index ({i}, {j}) out of range for p={p}")
        return 2 * (j * (p + 1) + i)
    if not (0 <= i < p and 0 <= j <= p):
        raise IndexError(f"y-flux index ({i}, {j}) out of range for p={p}")
    return 2 * (j * p + i) + 1


def beta_unindex(p, k):
    if not 0 <= k < 2 * p * (p + 1):
        raise IndexError(f"flux index {k} out of range for p={p}")
    if k % 2 == 0:
        j, i = divmod(k // 2, p + 1)
        return 0, i, j
    j, i = divmod((k - 1) // 2, p)
    return 1, i, j


def gamma_index(p, i, j):
    if not (0 <= i < p and 0 <= j < p):
        raise IndexError(f"tracer index ({i}, {j}) out of range for p={p}")
    return j * p + i


# ---- mesh --------------------------------------------------------------------


@dataclass(frozen=True)
class PeriodicMesh2D:
    n_e: int
    L: float
    p: int

    def __post_init__(self):
        build_mesh(self.n_e, self.L, self.p)  # same validation as 1D

    @property
    def line(self):
        """The 1D mesh along either axis."""
        return build_mesh(self.n_e, self.L, self.p)

    @property
    def n(self):
        return self.n_e * self.p

    @property
    def jac(self):
        return self.L / (2.0 * self.n_e)

    @property
    def jac_det(self):
        return self.jac * self.jac

    @property
    def n_q(self):
        return self.n * self.n

    @property
    def n_u(self):
        return 2 * self.n * self.n

    def element_xy(self):
        ex, ey = np.meshgrid(np.arange(self.n_e), np.arange(self.n_e), indexing="xy")
        return ex.ravel(), ey.ravel()  # element e = ey n_e + ex

    def local_to_global_U(self):
        """(n_e^2, 2p(p+1)) global flux DOF of each local flux index."""
        p, N = self.p, self.n
        ex, ey = self.element_xy()
        out = np.empty((self.n_e**2, 2 * p * (p + 1)), dtype=np.int64)
        for k in range(2 * p * (p + 1)):
            comp, i, j = beta_unindex(p, k)
            if comp == 0:
                out[:, k] = (ey * p + j) * N + (ex * p + i) % N
            else:
                out[:, k] = N * N + ((ey * p + j) % N) * N + ex * p + i
        return out

    def local_to_global_Q(self):
        p, N = self.p, self.n
        ex, ey = self.element_xy()
        out = np.empty((self.n_e**2, p * p), dtype=np.int64)
        for j in range(p):
            for i in range(p):
                out[:, gamma_index(p, i, j)] = (ey * p + j) * N + ex * p + i
        return out

    def quad_points(self, nquad):
        """Physical (x, y) of tensor Gauss points, each (n_e^2, q, q) indexed [e, x-point, y-point]."""
        g = gauss_rule(nquad)
        xe = self.line.to_physical(g.points)  # (n_e, q)
        ex, ey = self.element_xy()
        X = np.broadcast_to(xe[ex][:, :, None], (ex.size, g.points.size, g.points.size))
        Y = np.broadcast_to(xe[ey][:, None, :], (ex.size, g.points.size, g.points.size))
        return X, Y


def build_mesh2d(n_e, L, p):
    return PeriodicMesh2D(int(n_e), float(L), int(p))


def incidence2d(mesh):
    """Divergence incidence E^{2,1}: (n_q, n_u) with +1/-1 for the four bounding flux lines."""
    N = mesh.n
    I, J = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
    row = (J * N + I).ravel()
    cols = [
        (J * N + (I + 1) % N).ravel(),
        (J * N + I).ravel(),
        (N * N + ((J + 1) % N) * N + I).ravel(),
        (N * N + J * N + I).ravel(),
    ]
    vals = [1.0, -1.0, 1.0, -1.0]
    r = np.concatenate([row] * 4)
    c = np.concatenate(cols)
    d = np.concatenate([np.full(row.size, v) for v in vals])
    return LinearOperator(sp.csr_matrix((d, (r, c)), shape=(mesh.n_q, mesh.n_u)), "E21")


# ---- velocity ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Velocity2D:
    """u(x, y, t) -> (u_x, u_y)."""

    func: object
    steady: bool = True

    def __call__(self, x, y, t=0.0):
        ux, uy = self.func(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64), float(t))
        shape = np.broadcast(x, y).shape
        return np.broadcast_to(ux, shape).astype(np.float64), np.broadcast_to(uy, shape).astype(np.float64)

    @classmethod
    def constant(cls, cx, cy):
        return cls(lambda x, y, t: (np.full(np.shape(x), float(cx)), np.full(np.shape(x), float(cy))))

    @classmethod
    def swirl(cls, period, drift=0.0):
        """Reversing deformation on the unit square, optionally carried along x at speed ``drift``.

        With drift = 0 the flow retraces itself exactly; drift = 1/period moves the
        deforming pattern once across the domain, so the tracer still returns to its
        initial state at t = period but the discrete run is no longer time-symmetric.
        """

        def f(x, y, t):
            c = np.cos(np.pi * t / period)
            xs = x - drift * t
            ux = np.sin(np.pi * xs) ** 2 * np.sin(2 * np.pi * y) * c + drift
            uy = -np.sin(2 * np.pi * xs) * np.sin(np.pi * y) ** 2 * c
            return ux, uy

        return cls(f, steady=False)


# ---- assembly ----------------------------------------------------------------


@dataclass
class Matrices2D:
    M_U: LinearOperator
    M_Q: LinearOperator
    R: LinearOperator
    shifted: bool


def _component(mesh, comp, vel, t, dt, tuning, nquad):
    """Kernel output for one flux component, axes (a, b) = (nodal, edge) direction."""
    b = build_basis(mesh.p)
    g = gauss_rule(nquad)
    lnod = np.ascontiguousarray(b.nodal(g.points))
    eed = np.ascontiguousarray(b.edge(g.points))
    X, Y = mesh.quad_points(nquad)
    nq = g.points.size
    if vel is None:
        u = np.zeros(X.shape)
    else:
        u = vel(X, Y, t)[comp]
    if comp == 1:
        u = u.transpose(0, 2, 1)  # [e, y-point, x-point]
    u = np.ascontiguousarray(u)
    xi_a = np.broadcast_to(g.points[None, :, None], u.shape)
    if dt:
        xi_a = xi_a + tuning * dt * u / mesh.jac
    ltest = np.ascontiguousarray(b.nodal(xi_a.ravel()).reshape(u.shape[0], nq, nq, mesh.p + 1))
    # x-flux = l(xi) e(eta) / Jy, tracer = e e / (Jx Jy), area Jx Jy
    return kernels.mixed_local_2d(ltest, lnod, eed, np.ascontiguousarray(g.weights), u, 1.0, 1.0 / mesh.jac)


def assemble2d(mesh, vel=None, shift_dt=0.0, t=0.0, tuning=1.0, nquad=None):
    """Global M_U2, M_Q2 and R2; a nonzero shift_dt displaces flux test functions downstream."""
    nquad = nquad or default_nquad(mesh.p)
    p = mesh.p
    u2g, q2g = mesh.local_to_global_U(), mesh.local_to_global_Q()
    kx = np.array([[beta_index(p, 0, i, j) for j in range(p)] for i in range(p + 1)])  # [nodal x, edge y]
    ky = np.array([[beta_index(p, 1, j, i) for j in range(p)] for i in range(p + 1)])  # [nodal y, edge x]
    gq = np.array([[gamma_index(p, i, j) for j in range(p)] for i in range(p)])  # [edge x, edge y]
    rows_m, cols_m, vals_m, rows_r, cols_r, vals_r = [], [], [], [], [], []
    for comp, kmap, gmap in ((0, kx, gq), (1, ky, gq.T)):
        mass, mixed = _component(mesh, comp, vel, t, shift_dt, tuning, nquad)
        if not shift_dt:
            mass = 0.5 * (mass + mass.transpose(0, 3, 4, 1, 2))
        ur = u2g[:, kmap]  # (n_e^2, p+1, p)
        qc = q2g[:, gmap]  # (n_e^2, p, p) indexed [a-edge, b-edge]
        rows_m.append(np.broadcast_to(ur[:, :, :, None, None], mass.shape).ravel())
        cols_m.append(np.broadcast_to(ur[:, None, None, :, :], mass.shape).ravel())
        vals_m.append(mass.ravel())
        rows_r.append(np.broadcast_to(ur[:, :, :, None, None], mixed.shape).ravel())
        cols_r.append(np.broadcast_to(qc[:, None, None, :, :], mixed.shape).ravel())
        vals_r.append(mixed.ravel())
    shape_m, shape_r = (mesh.n_u, mesh.n_u), (mesh.n_u, mesh.n_q)
    M = sp.csr_matrix((np.concatenate(vals_m), (np.concatenate(rows_m), np.concatenate(cols_m))), shape=shape_m)
    R = sp.csr_matrix((np.concatenate(vals_r), (np.concatenate(rows_r), np.concatenate(cols_r))), shape=shape_r)
    shifted = bool(shift_dt) and vel is not None
    return Matrices2D(LinearOperator(M, "M_U2"), mass_Q2(mesh), LinearOperator(R, "R2"), shifted)


def _local_mass_Q_ref(p):
    g = gauss_rule(p + 1)
    e = build_basis(p).edge(g.points)
    return (e * g.weights[:, None]).T @ e


def mass_Q2(mesh):
    """Block diagonal <gamma, gamma>; local block is kron of the 1D reference blocks / |J|."""
    m1 = _local_mass_Q_ref(mesh.p)
    loc = np.kron(m1, m1) / mesh.jac_det  # gamma index j p + i: y outer, x inner
    q2g = mesh.local_to_global_Q()
    rows = np.broadcast_to(q2g[:, :, None], (q2g.shape[0],) + loc.shape).ravel()
    cols = np.broadcast_to(q2g[:, None, :], (q2g.shape[0],) + loc.shape).ravel()
    vals = np.broadcast_to(loc, (q2g.shape[0],) + loc.shape).ravel()
    return LinearOperator(sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_q, mesh.n_q)), "M_Q2")


# ---- flux solve and stepping -------------------------------------------------


@dataclass
class SolveStats:
    cg_iterations: list = field(default_factory=list)

    @property
    def max_iterations(self):
        return max(self.cg_iterations, default=0)


def cg_solve(M, b, x0=None, rtol=CG_RTOL, maxiter=None, stats=None):
    """Conjugate gradients on an SPD sparse matrix; raises unless ||Mx - b|| <= rtol ||b||."""
    A = M.matrix if isinstance(M, LinearOperator) else M
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    count = [0]

    def cb(_):
        count[0] += 1

    cap = maxiter or 10 * A.shape[0]
    x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=cap, callback=cb)
    res = np.linalg.norm(A @ x - b) / bnorm
    if info != 0 or res > 10 * rtol:
        raise IterativeSolverError(f"CG stopped after {count[0]} iterations with relative residual {res:.3e}")
    if stats is not None:
        stats.cg_iterations.append(count[0])
    return x


class FluxSolver:
    """F = M_U2^-1 R2 q: CG for the symmetric mass matrix, sparse LU for the shifted one."""

    def __init__(self, mats, stats=None):
        self.mats = mats
        self.stats = stats
        self._x0 = None

    def __call__(self, q):
        rhs = self.mats.R @ q
        if self.mats.shifted:
            return self.mats.M_U.solve(rhs)
        self._x0 = cg_solve(self.mats.M_U, rhs, x0=self._x0, stats=self.stats)
        return self._x0


def make_tendency(mesh, vel, dt, upwind=True, tuning=1.0, nquad=None, stats=None):
    """y(q, t) = E^{2,1} M_U2^-1 R2(t) q, rebuilt per time level for unsteady flows."""
    E = incidence2d(mesh).matrix
    shift = dt if upwind else 0.0
    cache = {}  # RK3 revisits t + dt as the next step's first level

    def solver_at(t):
        key = 0.0 if vel.steady else float(t)
        if key not in cache:
            if len(cache) >= 4:
                cache.pop(next(iter(cache)))
            cache[key] = FluxSolver(assemble2d(mesh, vel, shift, key, tuning, nquad), stats)
        return cache[key]

    def y(q, t):
        return E @ solver_at(t)(q)

    return y


def advect2d_step(y, q, dt, t=0.0):
    return step_rk3(y, q, dt, t)


# ---- fields on the plane -----------------------------------------------------


def project2d(mesh, f, nquad=None):
    """Element-local L2 projection of f(x, y) onto the tracer space."""
    nquad = nquad or 2 * mesh.p + 2
    g = gauss_rule(nquad)
    e = build_basis(mesh.p).edge(g.points)  # (q, p)
    X, Y = mesh.quad_points(nquad)
    fx = np.asarray(f(X, Y), dtype=np.float64) * g.weights[None, :, None] * g.weights[None, None, :]
    rhs = np.einsum("eab,ac,bd->edc", fx, e, e).reshape(X.shape[0], -1)  # gamma index d p + c
    m1 = _local_mass_Q_ref(mesh.p)
    # <gamma, gamma> carries 1/|J| while <gamma, f> is jacobian-free
    loc = mesh.jac_det * np.linalg.solve(np.kron(m1, m1), rhs.T).T
    q = np.zeros(mesh.n_q)
    q[mesh.local_to_global_Q()] = loc
    return q


def sample_grid(mesh, q, xs, ys):
    """Tracer values on the tensor grid, shape (len(ys), len(xs))."""
    line = mesh.line
    Sx = line.sampling_matrix(xs, Q)
    Sy = line.sampling_matrix(ys, Q)
    return Sy @ (Sx @ q.reshape(mesh.n, mesh.n).T).T


def uniform_grid(mesh, per_dof=4):
    m = per_dof * mesh.n
    return (np.arange(m) + 0.5) * mesh.L / m


def l2_error2d(mesh, q, f, nquad=None):
    g = gauss_rule(nquad or 2 * mesh.p + 4)
    xs = mesh.line.to_physical(g.points).ravel()
    V = sample_grid(mesh, q, xs, xs)
    Xg, Yg = np.meshgrid(xs, xs, indexing="xy")
    w = np.tile(g.weights, mesh.n_e)
    err = (V - f(Xg, Yg)) ** 2 * w[:, None] * w[None, :]
    return float(np.sqrt(mesh.jac_det * err.sum()))


def total_variation2d(values):
    v = np.asarray(values)
    return float(np.abs(v - np.roll(v, 1, axis=0)).sum() + np.abs(v - np.roll(v, 1, axis=1)).sum())


def write_grid_csv(path, xs, ys, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(values[j, i]))])


# ---- test problems -----------------------------------------------------------


def periodic_gaussian(x0, y0, sigma, L=1.0):
    k = 2 * np.pi / L

    def f(x, y):
        return np.exp((np.cos(k * (x - x0)) - 1.0) / (k * sigma) ** 2 + (np.cos(k * (y - y0)) - 1.0) / (k * sigma) ** 2)

    return f


def cosine_bells(centres=((0.3, 0.5), (0.7, 0.5)), radius=0.15, height=1.0, background=0.1):
    def f(x, y):
        out = np.full(np.broadcast(x, y).shape, background)
        for cx, cy in centres:
            r = np.hypot(x - cx, y - cy)
            out = out + np.where(r < radius, 0.5 * height * (1.0 + np.cos(np.pi * r / radius)), 0.0)
        return out

    return f


@dataclass
class Report2D:
    kind: str
    n_e: int
    p: int
    dt: float
    n_steps: int
    upwind: bool
    l2_error: float
    max_mass_error: float
    max_abs_initial: float
    max_abs_final: float
    max_abs_run: float
    tv_initial: float
    tv_final: float
    max_cg_iterations: int
    time: list = field(default_factory=list)
    mass: list = field(default_factory=list)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)


def run_tests2d(kind, n_e, p=3, dt=None, T=None, upwind=True, tuning=1.0, nquad=None, drift=None, snapshot_every=0, out_dir=None):
    """Translation (uniform (1, 1) flow, Gaussian, one period) or reversing swirl with two bells."""
    mesh = build_mesh2d(n_e, 1.0, p)
    if kind == TRANSLATION:
        T = 1.0 if T is None else T
        vel = Velocity2D.constant(1.0, 1.0)
        f0 = periodic_gaussian(0.5, 0.5, 0.1)
        exact = f0  # one full period in both directions
    elif kind == DEFORMATIONAL:
        T = 1.5 if T is None else T
        vel = Velocity2D.swirl(T, 1.0 / T if drift is None else drift)
        f0 = cosine_bells()
        exact = f0  # the flow reverses onto the initial state
    else:
        raise ValueError(f"unknown 2D test {kind!r}")
    dt = 0.05 / n_e if dt is None else dt
    n_steps = max(1, int(round(T / dt)))
    dt = T / n_steps
    stats = SolveStats()
    y = make_tendency(mesh, vel, dt, upwind, tuning, nquad, stats)
    q = project2d(mesh, f0)
    grid = uniform_grid(mesh)
    v0 = sample_grid(mesh, q, grid, grid)
    m0 = q.sum()
    times, masses = [0.0], [float(m0)]
    peak = float(np.abs(v0).max())
    if snapshot_every and out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_grid_csv(os.path.join(out_dir, f"snapshot_{0:06d}.csv"), grid, grid, v0)
    for n in range(n_steps):
        q = advect2d_step(y, q, dt, n * dt)
        if not np.all(np.isfinite(q)):
            raise FloatingPointError(f"non-finite tracer after step {n + 1}")
        times.append((n + 1) * dt)
        masses.append(float(q.sum()))
        peak = max(peak, float(np.abs(sample_grid(mesh, q, grid, grid)).max()))
        if snapshot_every and out_dir and (n + 1) % snapshot_every == 0:
            write_grid_csv(os.path.join(out_dir, f"snapshot_{n + 1:06d}.csv"), grid, grid, sample_grid(mesh, q, grid, grid))
    vT = sample_grid(mesh, q, grid, grid)
    norm = l2_error2d(mesh, np.zeros(mesh.n_q), lambda x, y_: -exact(x, y_))
    mass_err = np.abs(np.array(masses) - m0) / abs(m0)
    return Report2D(
        kind=kind,
        n_e=n_e,
        p=p,
        dt=dt,
        n_steps=n_steps,
        upwind=upwind,
        l2_error=l2_error2d(mesh, q, exact) / norm,
        max_mass_error=float(mass_err.max()),
        max_abs_initial=float(np.abs(v0).max()),
        max_abs_final=float(np.abs(vT).max()),
        max_abs_run=peak,
        tv_initial=total_variation2d(v0),
        tv_final=total_variation2d(vT),
        max_cg_iterations=stats.max_iterations,
        time=times,
        mass=masses,
    ), q
