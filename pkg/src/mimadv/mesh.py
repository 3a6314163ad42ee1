"""Periodic 1D mesh, DOF numbering, fields and scalar diagnostics."""
import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .polybasis import build_basis, gauss_rule

U, Q = "U", "Q"


def default_nquad(p):
    return p + 3


@dataclass(frozen=True)
class PeriodicMesh1D:
    n_e: int
    L: float
    p: int

    def __post_init__(self):
        if int(self.n_e) != self.n_e or self.n_e < 2:
            raise ValueError(f"need at least 2 elements, got n_e={self.n_e!r}")
        if not self.L > 0:
            raise ValueError(f"domain length must be positive, got L={self.L!r}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"degree must be >= 1, got p={self.p!r}")

    @property
    def h(self):
        return self.L / self.n_e

    @property
    def jac(self):
        return self.L / (2.0 * self.n_e)

    @property
    def basis(self):
        return build_basis(self.p)

    @property
    def n_u(self):
        return self.n_e * self.p

    @property
    def n_q(self):
        return self.n_e * self.p

    def dim(self, space):
        return self.n_u if space == U else self.n_q

    @cached_property
    def nodal_map(self):
        """(n_e, p+1) global U index of each local node, wrapping periodically."""
        m = np.arange(self.n_e)[:, None] * self.p + np.arange(self.p + 1)[None, :]
        return m % self.n_u

    @cached_property
    def edge_map(self):
        return np.arange(self.n_q).reshape(self.n_e, self.p)

    def to_physical(self, xi):
        """(n_e, len(xi)) physical coordinates of local points."""
        xi = np.asarray(xi, dtype=np.float64)
        return (np.arange(self.n_e)[:, None] + 0.5 * (xi[None, :] + 1.0)) * self.h

    def locate(self, x):
        """Element index and local coordinate of physical points (wrapped into [0, L))."""
        x = np.mod(np.asarray(x, dtype=np.float64), self.L)
        e = np.minimum(np.floor(x / self.h).astype(np.int64), self.n_e - 1)
        xi = 2.0 * (x - e * self.h) / self.h - 1.0
        return e, np.clip(xi, -1.0, 1.0)

    def quadrature(self, nquad=None):
        return gauss_rule(nquad or default_nquad(self.p))

    def sampling_matrix(self, xs, space, scale_jacobian=True):
        """Sparse (len(xs), dim) matrix evaluating a field of ``space`` at xs."""
        e, xi = self.locate(xs)
        b = self.basis
        if space == U:
            vals, cols = b.nodal(xi), self.nodal_map[e]
        else:
            vals, cols = b.edge(xi), self.edge_map[e]
            if scale_jacobian:
                vals = vals / self.jac
        rows = np.repeat(np.arange(len(xi)), vals.shape[1])
        return sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(len(xi), self.dim(space)))

    @cached_property
    def local_mass_Q(self):
        """Element block of M_Q: <e_i, e_j> / |J| (identical for every element)."""
        g = gauss_rule(self.p + 1)
        E = self.basis.edge(g.points)
        m = (E * g.weights[:, None]).T @ E / self.jac
        return 0.5 * (m + m.T)

    def uniform_points(self, per_dof=8):
        m = per_dof * self.n_q
        return (np.arange(m) + 0.5) * self.L / m


def build_mesh(n_e, L, p):
    return PeriodicMesh1D(int(n_e), float(L), int(p))


@dataclass(frozen=True, eq=False)
class Field:
    space: str
    mesh: object
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (self.mesh.dim(self.space),):
            raise ValueError(f"{self.space}-field needs {self.mesh.dim(self.space)} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def with_coeffs(self, coeffs):
        return Field(self.space, self.mesh, coeffs)

    def sample(self, xs):
        return sample(self, xs)

    def diagnostics(self):
        return diagnostics(self)

    def to_csv(self, path, xs=None):
        """Sampled ``x,value`` rows when xs is given, raw ``dof_index,coeff`` otherwise."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if xs is None:
                w.writerow(["dof_index", "coeff"])
                w.writerows((i, repr(float(c))) for i, c in enumerate(self.coeffs))
            else:
                w.writerow(["x", "value"])
                w.writerows((repr(float(x)), repr(float(v))) for x, v in zip(xs, self.sample(xs)))


def sample(field, xs):
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    return field.mesh.sampling_matrix(xs, field.space) @ field.coeffs


def project_to_Q(mesh, f, nquad=None):
    """L2 projection of f(x) onto Q_h (element-local solves; M_Q is block diagonal)."""
    g = mesh.quadrature(nquad)
    E = mesh.basis.edge(g.points)
    fx = np.asarray(f(mesh.to_physical(g.points)), dtype=np.float64)
    fx = np.broadcast_to(fx, (mesh.n_e, g.points.size))
    # <e_i/|J|, f> |J| dxi: jacobians cancel
    rhs = (fx * g.weights[None, :]) @ E
    coeffs = np.linalg.solve(mesh.local_mass_Q, rhs.T).T
    return Field(Q, mesh, coeffs.ravel())


def interpolate_to_U(mesh, f):
    """Nodal interpolant of f in U_h."""
    x = mesh.to_physical(mesh.basis.nodes)[:, : mesh.p].ravel()
    return Field(U, mesh, np.asarray(f(x), dtype=np.float64) * np.ones(mesh.n_u))


def l2_error(field, f, nquad=None):
    """||field - f||_L2 by element-wise Gauss quadrature (defaults to 2p+4 points)."""
    mesh = field.mesh
    g = gauss_rule(nquad or 2 * mesh.p + 4)
    x = mesh.to_physical(g.points)
    vals = field.sample(x.ravel()).reshape(x.shape)
    err = vals - f(x)
    return float(np.sqrt(mesh.jac * np.sum(err**2 * g.weights[None, :])))


def l2_norm(field, nquad=None):
    return l2_error(field, lambda x: np.zeros_like(x), nquad)


def total_variation(values, periodic=True):
    v = np.asarray(values, dtype=np.float64)
    tv = np.abs(np.diff(v)).sum()
    if periodic and v.size > 1:
        tv += abs(v[0] - v[-1])
    return float(tv)


def energy(field):
    mesh = field.mesh
    q = field.coeffs.reshape(mesh.n_e, mesh.p)
    return float(np.einsum("ei,ij,ej->", q, mesh.local_mass_Q, q))


def diagnostics(field):
    if field.space != Q:
        raise ValueError("diagnostics are defined for Q-fields")
    xs = field.mesh.uniform_points(8)
    return {
        "mass": float(field.coeffs.sum()),
        "energy": energy(field),
        "total_variation": total_variation(field.sample(xs)),
    }
