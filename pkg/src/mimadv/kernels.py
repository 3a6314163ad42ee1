"""Hot inner kernels: basis evaluation and element-local mixed matrices.

Each kernel has a numba implementation (``*_nb``) and a pure-numpy one
(``*_np``).  The public names dispatch on :data:`mimadv._accel.USE_NUMBA`;
both flavours stay importable so they can be benchmarked against each other.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

CARDINAL_TOL = 1e-14


# ---------------------------------------------------------------- lagrange

def lagrange_values_np(nodes, bary, x):
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None] - nodes[None, :]
    hit = np.abs(diff) <= CARDINAL_TOL
    rows = hit.any(axis=1)
    diff = np.where(hit, 1.0, diff)
    t = bary[None, :] / diff
    out = t / t.sum(axis=1, keepdims=True)
    if rows.any():
        first = np.argmax(hit[rows], axis=1)
        out[rows] = 0.0
        out[np.flatnonzero(rows), first] = 1.0
    return out


@njit
def lagrange_values_nb(nodes, bary, x):
    m = x.shape[0]
    n = nodes.shape[0]
    out = np.zeros((m, n))
    for r in range(m):
        xr = x[r]
        hit = -1
        for k in range(n):
            if abs(xr - nodes[k]) <= 1e-14:
                hit = k
                break
        if hit >= 0:
            out[r, hit] = 1.0
            continue
        s = 0.0
        for k in range(n):
            t = bary[k] / (xr - nodes[k])
            out[r, k] = t
            s += t
        for k in range(n):
            out[r, k] /= s
    return out


def lagrange_derivs_np(nodes, x):
    x = np.asarray(x, dtype=np.float64)
    n = nodes.shape[0]
    out = np.zeros((x.shape[0], n))
    for i in range(n):
        for k in range(n):
            if k == i:
                continue
            term = np.full(x.shape[0], 1.0 / (nodes[i] - nodes[k]))
            for m in range(n):
                if m != i and m != k:
                    term *= (x - nodes[m]) / (nodes[i] - nodes[m])
            out[:, i] += term
    return out


@njit
def lagrange_derivs_nb(nodes, x):
    npts = x.shape[0]
    n = nodes.shape[0]
    out = np.zeros((npts, n))
    for r in range(npts):
        xr = x[r]
        for i in range(n):
            acc = 0.0
            for k in range(n):
                if k == i:
                    continue
                term = 1.0 / (nodes[i] - nodes[k])
                for m in range(n):
                    if m != i and m != k:
                        term *= (xr - nodes[m]) / (nodes[i] - nodes[m])
                acc += term
            out[r, i] = acc
    return out


# ---------------------------------------------------------------- 1D element matrices

def mixed_local_1d_np(ltest, ltrial, etrial, w, u, jac):
    """Per-element <l^u_i, l_j> (times jac) and <l^u_i u, e_k>.

    ltest is (n_e, q, p+1): test nodal values at (possibly displaced) points.
    """
    tw = ltest * w[None, :, None]
    mass = jac * np.einsum("eqi,qj->eij", tw, ltrial)
    mixed = np.einsum("eqi,eq,qk->eik", tw, u, etrial)
    return mass, mixed


@njit
def mixed_local_1d_nb(ltest, ltrial, etrial, w, u, jac):
    ne, nq, nn = ltest.shape
    ned = etrial.shape[1]
    mass = np.zeros((ne, nn, nn))
    mixed = np.zeros((ne, nn, ned))
    for e in range(ne):
        for q in range(nq):
            wq = w[q]
            wu = wq * u[e, q]
            for i in range(nn):
                li = ltest[e, q, i]
                if li == 0.0:
                    continue
                for j in range(nn):
                    mass[e, i, j] += wq * li * ltrial[q, j]
                for k in range(ned):
                    mixed[e, i, k] += wu * li * etrial[q, k]
    for e in range(ne):
        for i in range(nn):
            for j in range(nn):
                mass[e, i, j] *= jac
    return mass, mixed


# ---------------------------------------------------------------- 2D element matrices

def mixed_local_2d_np(ltest, lnod, eed, w, u, scale_m, scale_r):
    """One flux component on a tensor element.

    Axis ``a`` is the component's C0 (nodal) direction, axis ``b`` the
    transverse (edge) direction.  ltest is (n_e, q, q, p+1) nodal values at
    displaced points.  Returns mass (n_e, p+1, p, p+1, p) and mixed
    (n_e, p+1, p, p, p); the last two indices of mixed follow (a, b).
    """
    ww = w[:, None] * w[None, :]
    t = ltest * ww[None, :, :, None]
    mass = scale_m * np.einsum("eabi,bj,ak,bl->eijkl", t, eed, lnod, eed, optimize=True)
    mixed = scale_r * np.einsum("eabi,eab,bj,ac,bd->eijcd", t, u, eed, eed, eed, optimize=True)
    return mass, mixed


@njit
def mixed_local_2d_nb(ltest, lnod, eed, w, u, scale_m, scale_r):
    ne, nq, _, nn = ltest.shape
    ned = eed.shape[1]
    mass = np.zeros((ne, nn, ned, nn, ned))
    mixed = np.zeros((ne, nn, ned, ned, ned))
    # pair[b, j*ned + m] = e_j(b) e_m(b): the transverse products shared by both matrices
    pair = np.empty((nq, ned * ned))
    for b in range(nq):
        for j in range(ned):
            for m in range(ned):
                pair[b, j * ned + m] = eed[b, j] * eed[b, m]
    lnod_t = np.ascontiguousarray(lnod.T) * scale_m
    eed_t = np.ascontiguousarray(eed.T) * scale_r
    t = np.empty((nq * nn, nq))
    tu = np.empty((nq * nn, nq))
    for e in range(ne):
        for a in range(nq):
            for i in range(nn):
                for b in range(nq):
                    v = ltest[e, a, b, i] * w[a] * w[b]
                    t[a * nn + i, b] = v
                    tu[a * nn + i, b] = v * u[e, a, b]
        # contract b, then a; results come out as [k, (i, j, m)] and [c, (i, j, d)]
        sm = np.dot(t, pair).reshape(nq, nn * ned * ned)
        sr = np.dot(tu, pair).reshape(nq, nn * ned * ned)
        km = np.dot(lnod_t, sm).reshape(nn, nn, ned, ned)
        cd = np.dot(eed_t, sr).reshape(ned, nn, ned, ned)
        for i in range(nn):
            for j in range(ned):
                for k in range(nn):
                    for m in range(ned):
                        mass[e, i, j, k, m] = km[k, i, j, m]
                for c in range(ned):
                    for d in range(ned):
                        mixed[e, i, j, c, d] = cd[c, i, j, d]
    return mass, mixed


if USE_NUMBA:
    lagrange_values = lagrange_values_nb
    lagrange_derivs = lagrange_derivs_nb
    mixed_local_1d = mixed_local_1d_nb
    mixed_local_2d = mixed_local_2d_nb
else:
    lagrange_values = lagrange_values_np
    lagrange_derivs = lagrange_derivs_np
    mixed_local_1d = mixed_local_1d_np
    mixed_local_2d = mixed_local_2d_np

BACKEND = "numba" if USE_NUMBA else "numpy"
