"""Flux-form, material-form and skew-symmetric advection operators in 1D.

The semi-discrete system is ``M_Q dq/dt + K q = 0`` with K one of

    A     = M_Q E M_U^-1 R
    A_PG  = M_Q E (M_U^u)^-1 R^u            (test functions displaced downstream)
    B     = -R^T M_U^-1 E^T M_Q             (= -A^T)
    B_PG  = -(R^d)^T (M_U^d)^-T E^T M_Q     (= -A_PG(-dt)^T)
    S     = (A - A^T) / 2
    S_PG  = (A_PG - A_PG^T) / 2   (flux form; the material form uses B_PG)
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import LinearOperator, assemble_flux_pair, incidence, mass_Q
from .departure import downstream, upstream
from .mesh import U, Field

KINDS = ("A", "B", "A_PG", "B_PG", "S", "S_PG")


@dataclass(frozen=True, eq=False)
class AdvectionOperator:
    kind: str
    matrix: LinearOperator
    mass: LinearOperator  # M_Q
    dt_used: float = 0.0

    def __matmul__(self, q):
        return self.matrix @ q

    def toarray(self):
        return self.matrix.toarray()

    def tendency(self, q):
        """M_Q^-1 K q (element-block solve)."""
        return self.mass.solve(self.matrix @ q)


def _shift(velocity, dt, tuning):
    if dt == 0.0:
        return None
    if dt > 0.0:
        return downstream(velocity, dt, tuning)
    return upstream(velocity, -dt, tuning)


def _MQ_E(mesh, MQ):
    # sparse so the final product sums in a fixed order for both A and B
    return sp.csr_matrix(MQ.matrix @ incidence(mesh).matrix)


def _flux_form(mesh, velocity, dt, tuning, nquad):
    MU, R = assemble_flux_pair(mesh, velocity, _shift(velocity, dt, tuning), nquad)
    MQ = mass_Q(mesh)
    return MQ, _MQ_E(mesh, MQ) @ MU.solve(R.matrix)


def _material_form(mesh, velocity, dt, tuning, nquad):
    # trial functions l^d evaluated at upstream points xi^u
    MU, R = assemble_flux_pair(mesh, velocity, _shift(velocity, -dt, tuning), nquad)
    MQ = mass_Q(mesh)
    # <e_i, u l^d_k> <l_m, l^d_k>^-1 grouped as ((M_U^d)^-1 R^d)^T
    return MQ, -(MU.solve(R.matrix).T @ _MQ_E(mesh, MQ).T.tocsr())


def build_A(mesh, velocity, nquad=None):
    MQ, K = _flux_form(mesh, velocity, 0.0, 1.0, nquad)
    return AdvectionOperator("A", LinearOperator(K, "A"), MQ)


def build_A_PG(mesh, velocity, dt, tuning=1.0, nquad=None):
    """Upwinded flux form; a negative dt displaces the test functions upstream instead."""
    MQ, K = _flux_form(mesh, velocity, float(dt), tuning, nquad)
    return AdvectionOperator("A_PG", LinearOperator(K, "A_PG"), MQ, float(dt))


def build_B(mesh, velocity, nquad=None):
    MQ, K = _material_form(mesh, velocity, 0.0, 1.0, nquad)
    return AdvectionOperator("B", LinearOperator(K, "B"), MQ)


def build_B_PG(mesh, velocity, dt, tuning=1.0, nquad=None):
    MQ, K = _material_form(mesh, velocity, float(dt), tuning, nquad)
    return AdvectionOperator("B_PG", LinearOperator(K, "B_PG"), MQ, float(dt))


def build_S(mesh, velocity, nquad=None):
    A = build_A(mesh, velocity, nquad).toarray()
    return AdvectionOperator("S", LinearOperator(0.5 * (A - A.T), "S"), mass_Q(mesh))


def build_S_PG(mesh, velocity, dt, tuning=1.0, nquad=None, form="flux"):
    """Skew part of the upwinded flux-form (or downwinded material-form) operator.

    The upwinding contributions live in the symmetric part and cancel here.
    """
    if form == "flux":
        K = build_A_PG(mesh, velocity, dt, tuning, nquad).toarray()
    elif form == "material":
        K = build_B_PG(mesh, velocity, dt, tuning, nquad).toarray()
    else:
        raise ValueError(f"form must be 'flux' or 'material', got {form!r}")
    return AdvectionOperator("S_PG", LinearOperator(0.5 * (K - K.T), "S_PG"), mass_Q(mesh), float(dt))


def build_operator(kind, mesh, velocity, dt=0.0, tuning=1.0, nquad=None):
    if kind == "A":
        return build_A(mesh, velocity, nquad)
    if kind == "B":
        return build_B(mesh, velocity, nquad)
    if kind == "S":
        return build_S(mesh, velocity, nquad)
    if kind == "A_PG":
        return build_A_PG(mesh, velocity, dt, tuning, nquad)
    if kind == "B_PG":
        return build_B_PG(mesh, velocity, dt, tuning, nquad)
    if kind == "S_PG":
        return build_S_PG(mesh, velocity, dt, tuning, nquad)
    raise ValueError(f"unknown operator kind {kind!r}; expected one of {KINDS}")


def solve_flux(mesh, velocity, q, shift=None, nquad=None):
    """Flux DOFs F = (M_U or M_U^u)^-1 R q."""
    MU, R = assemble_flux_pair(mesh, velocity, shift, nquad)
    return Field(U, mesh, MU.solve(R @ q.coeffs))


def solve_grad(mesh, q, nquad=None):
    """Weak gradient G = -M_U^-1 E^T M_Q q."""
    MU, _ = assemble_flux_pair(mesh, None, None, nquad)
    rhs = incidence(mesh).matrix.T @ (mass_Q(mesh) @ q.coeffs)
    return Field(U, mesh, -MU.solve(rhs))
