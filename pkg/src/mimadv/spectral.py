"""Eigenvalue and dispersion analysis of the semi-discrete and time-stepped operators.

Sign convention: omega are the eigenvalues of M^-1 K for ``M dq/dt + K q = 0``,
i.e. solutions behave like exp(-omega t).  A resolved Fourier mode k of the exact
advection operator has omega = i u 2 pi k / L, and Re(omega) > 0 means damping.
:func:`growth_rates` flips the sign for the dq/dt = lambda q view.
"""
import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .assembly import VelocityModel
from .mesh import Q
from .operators import build_A_PG

TIE_TOL = 1e-12


class EigenSolverError(RuntimeError):
    pass


def _dense(op):
    if hasattr(op, "toarray"):
        return op.toarray()
    return np.asarray(op, dtype=np.float64)


def eig_generalized(M, K, rtol=1e-9):
    """All eigenpairs of M^-1 K (generalized QZ); columns of vecs have unit 2-norm."""
    M, K = _dense(M), _dense(K)
    try:
        vals, vecs = sla.eig(K, M)
    except sla.LinAlgError as exc:
        raise EigenSolverError(f"QZ iteration failed for n={K.shape[0]}: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise EigenSolverError("eigensolver returned non-finite eigenvalues (singular M?)")
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    res = np.linalg.norm(K @ vecs - (M @ vecs) * vals[None, :], axis=0)
    bound = rtol * np.linalg.norm(K, 2) * max(1.0, np.linalg.norm(M, 2))
    if res.max() > max(bound, rtol):
        raise EigenSolverError(f"eigenpair residual {res.max():.3e} exceeds {bound:.3e}")
    return vals, vecs


def growth_rates(vals):
    return -np.asarray(vals)


def amplification_matrix(M, K, dt):
    M, K = _dense(M), _dense(K)
    return np.linalg.solve(M + 0.5 * dt * K, M - 0.5 * dt * K)


def amplification_spectrum(M, K, dt, vectors=False):
    """Spectrum of the centered one-step map (M + dt/2 K)^-1 (M - dt/2 K)."""
    G = amplification_matrix(M, K, dt)
    if not vectors:
        return np.linalg.eigvals(G)
    vals, vecs = np.linalg.eig(G)
    return vals, vecs / np.linalg.norm(vecs, axis=0)


@dataclass(frozen=True)
class DispersionRecord:
    k: int
    omega_re: float
    omega_im: float
    dominant_amplitude: float


def sample_points(mesh):
    n = mesh.n_q
    return (np.arange(n) + 0.5) * mesh.L / n


def fourier_modes(n):
    return np.arange(-(n // 2), n - n // 2)


def interpolation_matrix(mesh):
    """Edge-basis values at the sample points, without the 1/|J| factor."""
    return mesh.sampling_matrix(sample_points(mesh), Q, scale_jacobian=False).toarray()


def fourier_matrix(mesh):
    x = sample_points(mesh)
    k = fourier_modes(mesh.n_q)
    return np.exp(2j * np.pi * np.outer(x, k) / mesh.L)


def fourier_coefficients(mesh, vecs):
    """v^f = F^-1 Q v for each column of vecs."""
    F = fourier_matrix(mesh)
    if np.linalg.cond(F) > 1e12:
        raise np.linalg.LinAlgError("Fourier interpolation matrix is singular")
    return np.linalg.solve(F, interpolation_matrix(mesh) @ np.asarray(vecs))


def dominant_modes(mesh, vecs):
    """Wavenumber with the largest Fourier amplitude per column; ties go to smaller |k|."""
    vf = np.abs(fourier_coefficients(mesh, vecs))
    vf = vf / np.linalg.norm(vf, axis=0, keepdims=True)
    k = fourier_modes(mesh.n_q)
    order = np.lexsort((-k, np.abs(k)))  # preference: small |k|, then positive k
    out, amps = [], []
    for col in vf.T:
        top = col.max()
        pick = next(j for j in order if col[j] >= top - TIE_TOL)
        out.append(int(k[pick]))
        amps.append(float(col[pick]))
    return np.array(out), np.array(amps)


def fourier_pair(mesh, eigenpairs):
    vals, vecs = eigenpairs
    ks, amps = dominant_modes(mesh, vecs)
    recs = [DispersionRecord(int(k), float(w.real), float(w.imag), float(a)) for k, w, a in zip(ks, vals, amps)]
    return sorted(recs, key=lambda r: (r.k, r.omega_im, r.omega_re))


def dispersion(mesh, M, K):
    return fourier_pair(mesh, eig_generalized(M, K))


def dispersion_branch(records):
    """(k, omega_im) for k >= 0, one value per wavenumber (median where several pair to it)."""
    by_k = {}
    for r in records:
        if r.k >= 0:
            by_k.setdefault(r.k, []).append(r.omega_im)
    ks = np.array(sorted(by_k), dtype=np.int64)
    return ks, np.array([np.median(by_k[k]) for k in ks])


def spectral_gap(records):
    """Largest |d omega_im / dk| between adjacent paired modes on the resolved branch.

    The branch runs from k = 0 up to the wavenumber where omega_im peaks; past the
    peak the curve folds back towards the grid Nyquist mode, which is aliasing
    rather than an inter-element gap.  Missing wavenumbers are bridged by the slope.
    """
    ks, w = dispersion_branch(records)
    if ks.size < 2:
        return 0.0
    peak = int(np.argmax(w))
    if peak == 0:
        return 0.0
    slope = np.diff(w[: peak + 1]) / np.diff(ks[: peak + 1])
    return float(np.max(np.abs(slope)))


def max_adjacent_jump(records, kmin, kmax):
    """Largest |omega_im| jump between consecutive paired wavenumbers in [kmin, kmax]."""
    by_k = {}
    for r in records:
        if kmin <= r.k <= kmax:
            by_k.setdefault(r.k, []).append(r.omega_im)
    ks = sorted(by_k)
    w = np.array([np.median(by_k[k]) for k in ks])
    if w.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(w))))


def write_dispersion_csv(path, records, scale=1.0):
    """``k,omega_re,omega_im``; omega divided by ``scale`` (u 2 pi / L gives omega = k analytically)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "omega_re", "omega_im"])
        for r in records:
            w.writerow([r.k, repr(r.omega_re / scale), repr(r.omega_im / scale)])


@dataclass
class StabilityScan:
    cfl_values: np.ndarray
    modes: np.ndarray  # all wavenumbers, sorted
    magnitudes: np.ndarray  # (len(cfl), len(modes)); max |omega| paired with each k, NaN if unpaired
    records: list  # (cfl, k, |omega|) for every eigenvalue

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cfl", "k", "abs_omega"])
            for c, k, a in self.records:
                w.writerow([repr(float(c)), int(k), repr(float(a))])


def cfl_number(mesh, u, dt):
    return dt * abs(u) * mesh.n_e * mesh.p / mesh.L


def stability_scan(mesh, u, dt_grid, tuning=1.0, nquad=None):
    """|omega|(CFL, k) for the centered step with the upwinded flux operator."""
    vel = VelocityModel.constant(u)
    modes = fourier_modes(mesh.n_q)
    cfls, mags, records = [], [], []
    for dt in dt_grid:
        op = build_A_PG(mesh, vel, dt, tuning, nquad)
        M, K = op.mass.toarray(), op.toarray()
        # eigenvectors of the step map are those of M^-1 K; pair via the semi-discrete problem
        vals, vecs = eig_generalized(M, K)
        amp = np.abs((1.0 - 0.5 * dt * vals) / (1.0 + 0.5 * dt * vals))
        ks, _ = dominant_modes(mesh, vecs)
        cfl = cfl_number(mesh, u, dt)
        row = np.full(modes.size, np.nan)
        for k, a in zip(ks, amp):
            j = k - modes[0]
            row[j] = a if np.isnan(row[j]) else max(row[j], a)
            records.append((cfl, int(k), float(a)))
        cfls.append(cfl)
        mags.append(row)
    records.sort(key=lambda r: (r[0], r[1], r[2]))
    return StabilityScan(np.array(cfls), modes, np.array(mags), records)
