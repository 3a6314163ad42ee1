"""GLL nodal (Lagrange) basis, the matching edge-function basis, and Gauss rules.

Edge functions use the shifted index convention

    e_i(xi) = -sum_{k=0}^{i} dl_k/dxi,   i = 0, ..., p-1,

so that the integral of e_i between consecutive GLL nodes xi_j, xi_{j+1} is
delta_ij.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels


class InvalidDegreeError(ValueError):
    pass


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def gll_points(p, tol=1e-15, maxiter=100):
    """GLL nodes and weights of degree p.

    Newton iteration on (1 - x^2) P_p'(x) from Chebyshev-Gauss-Lobatto guesses.
    """
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    P = np.zeros((p + 1, p + 1))
    for _ in range(maxiter):
        P[:, 0] = 1.0
        P[:, 1] = x
        for k in range(2, p + 1):
            P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
        dx = (x * P[:, p] - P[:, p - 1]) / ((p + 1) * P[:, p])
        x = x - dx
        if np.max(np.abs(dx)) <= tol:
            break
    # exact endpoints, symmetric interior
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    P[:, 0] = 1.0
    P[:, 1] = x
    for k in range(2, p + 1):
        P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
    w = 2.0 / (p * (p + 1) * P[:, p] ** 2)
    return x, w


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int  # highest polynomial degree integrated exactly

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.points)))


@lru_cache(maxsize=None)
def gauss_rule(q):
    """Gauss-Legendre rule with q points, exact up to degree 2q - 1."""
    if int(q) != q or q < 1:
        raise ValueError(f"quadrature point count must be a positive integer, got {q!r}")
    x, w = np.polynomial.legendre.leggauss(int(q))
    return QuadratureRule(_frozen(x), _frozen(w), 2 * int(q) - 1)


@dataclass(frozen=True, eq=False)
class NodalEdgeBasis:
    degree: int
    nodes: np.ndarray
    node_weights: np.ndarray
    bary_weights: np.ndarray
    derivative_matrix: np.ndarray  # [k, i] = dl_i/dxi at nodes[k]

    @property
    def n_nodal(self):
        return self.degree + 1

    @property
    def n_edge(self):
        return self.degree

    def nodal(self, xi):
        """Matrix of l_i(xi_m), shape (len(xi), p+1). Extrapolates outside [-1, 1]."""
        xi = np.ascontiguousarray(np.atleast_1d(xi), dtype=np.float64)
        return kernels.lagrange_values(self.nodes, self.bary_weights, xi.ravel()).reshape(xi.shape + (self.n_nodal,))

    def nodal_deriv(self, xi):
        xi = np.ascontiguousarray(np.atleast_1d(xi), dtype=np.float64)
        return kernels.lagrange_derivs(self.nodes, xi.ravel()).reshape(xi.shape + (self.n_nodal,))

    def edge(self, xi):
        """Matrix of e_i(xi_m), shape (len(xi), p)."""
        d = self.nodal_deriv(xi)
        return -np.cumsum(d, axis=-1)[..., : self.degree]


@lru_cache(maxsize=None)
def build_basis(p):
    if int(p) != p or p < 1:
        raise InvalidDegreeError(f"basis degree must be an integer >= 1, got {p!r}")
    p = int(p)
    x, w = gll_points(p)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / diff.prod(axis=1)
    deriv = kernels.lagrange_derivs(np.ascontiguousarray(x), np.ascontiguousarray(x))
    return NodalEdgeBasis(p, _frozen(x), _frozen(w), _frozen(bary), _frozen(deriv))


def _check_index(i, n, what):
    if not 0 <= i < n:
        raise IndexError(f"{what} index {i} out of range [0, {n})")


def eval_nodal(basis, i, xi):
    _check_index(i, basis.n_nodal, "nodal")
    return float(basis.nodal([xi])[0, i])


def eval_edge(basis, i, xi):
    _check_index(i, basis.n_edge, "edge")
    return float(basis.edge([xi])[0, i])
