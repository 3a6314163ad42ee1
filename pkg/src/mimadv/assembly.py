"""Global 1D matrices: incidence, mass matrices and (shifted) mixed flux matrices."""
import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .departure import displace_points


class FactorizationError(RuntimeError):
    def __init__(self, msg, cond=None):
        super().__init__(msg if cond is None else f"{msg} (condition estimate {cond:.3e})")
        self.cond = cond


class LinearOperator:
    """A dense or sparse matrix with a lazily cached LU factorization."""

    def __init__(self, matrix, name=""):
        self.matrix = matrix
        self.name = name
        self._lu = None

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)

    @property
    def T(self):
        return LinearOperator(self.matrix.T.tocsr() if self.is_sparse else self.matrix.T, self.name + "^T")

    def __matmul__(self, x):
        return self.matrix @ x

    def rmatvec(self, y):
        return self.matrix.T @ y

    def toarray(self):
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def cond(self):
        return float(np.linalg.cond(self.toarray()))

    def factorize(self):
        if self._lu is None:
            if self.is_sparse:
                try:
                    self._lu = spla.splu(self.matrix.tocsc())
                except RuntimeError as exc:
                    raise FactorizationError(f"sparse LU of {self.name or 'matrix'} failed: {exc}") from exc
            else:
                lu, piv = sla.lu_factor(self.matrix, check_finite=True)
                d = np.abs(np.diag(lu))
                if d.min() <= 1e-14 * d.max():
                    raise FactorizationError(f"{self.name or 'matrix'} is numerically singular", self.cond())
                self._lu = (lu, piv)
        return self._lu

    def solve(self, b, trans=False):
        lu = self.factorize()
        if self.is_sparse:
            return lu.solve(np.asarray(b), trans="T" if trans else "N")
        return sla.lu_solve(lu, b, trans=1 if trans else 0)

    def to_triplets(self, path):
        m = sp.coo_matrix(self.matrix)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "value"])
            order = np.lexsort((m.col, m.row))
            for k in order:
                w.writerow((int(m.row[k]), int(m.col[k]), repr(float(m.data[k]))))


@dataclass(frozen=True, eq=False)
class VelocityModel:
    kind: str  # "analytic" or "discrete"
    func: object = None
    field: object = None

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "analytic":
            return np.broadcast_to(np.asarray(self.func(x), dtype=np.float64), x.shape)
        return self.field.sample(x.ravel()).reshape(x.shape)

    @classmethod
    def analytic(cls, func):
        return cls("analytic", func=func)

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls("analytic", func=lambda x: np.full(np.shape(x), c))

    @classmethod
    def discrete(cls, field):
        if field.space != "U":
            raise ValueError("discrete velocity must live in U_h")
        return cls("discrete", field=field)


def incidence(mesh):
    n = mesh.n_q
    E = np.zeros((n, n))
    j = np.arange(n)
    E[j, j] = -1.0
    E[j, (j + 1) % n] = 1.0
    return LinearOperator(E, "E")


def _scatter(local, row_map, col_map, shape):
    out = np.zeros(shape)
    np.add.at(out, (row_map[:, :, None], col_map[:, None, :]), local)
    return out


def element_matrices(mesh, velocity=None, shift=None, nquad=None):
    """Element-local <l^u_i, l_j> and <l^u_i u, e_k> with test functions at displaced points."""
    g = mesh.quadrature(nquad)
    b = mesh.basis
    ltrial = np.ascontiguousarray(b.nodal(g.points))
    etrial = np.ascontiguousarray(b.edge(g.points))
    ltest = np.ascontiguousarray(b.nodal(displace_points(shift, mesh, g.points)))
    x = mesh.to_physical(g.points)
    u = np.zeros_like(x) if velocity is None else np.ascontiguousarray(velocity(x), dtype=np.float64)
    mass, mixed = kernels.mixed_local_1d(ltest, ltrial, etrial, np.ascontiguousarray(g.weights), u, mesh.jac)
    if shift is None or shift.dt == 0.0:
        mass = 0.5 * (mass + mass.transpose(0, 2, 1))  # exactly symmetric Galerkin block
    return mass, mixed


def assemble_flux_pair(mesh, velocity, shift=None, nquad=None):
    """Global (M_U^u, R^u) in one pass."""
    mass, mixed = element_matrices(mesh, velocity, shift, nquad)
    nm, em = mesh.nodal_map, mesh.edge_map
    M = _scatter(mass, nm, nm, (mesh.n_u, mesh.n_u))
    R = _scatter(mixed, nm, em, (mesh.n_u, mesh.n_q))
    name = "M_U" if shift is None else f"M_U[{shift.direction}]"
    return LinearOperator(M, name), LinearOperator(R, "R")


def mass_U(mesh, nquad=None):
    return assemble_flux_pair(mesh, None, None, nquad)[0]


def mass_U_shifted(mesh, shift, nquad=None):
    return assemble_flux_pair(mesh, None, shift, nquad)[0]


def mixed_flux(mesh, velocity, shift=None, nquad=None):
    return assemble_flux_pair(mesh, velocity, shift, nquad)[1]


def mass_Q(mesh):
    return LinearOperator(sla.block_diag(*([mesh.local_mass_Q] * mesh.n_e)), "M_Q")
