"""Compare the numba kernels with their numpy twins on assembly-sized inputs.

    python benchmarks/bench_kernels.py [--ne 32] [--p 3] [--repeat 5]

Prints the best-of-N wall time per call for each backend, the speedup and the
largest absolute difference between the two results.
"""
import argparse
import timeit

import numpy as np

from mimadv import kernels
from mimadv._accel import HAVE_NUMBA
from mimadv.polybasis import build_basis


def cases(ne, p, rng):
    b = build_basis(p)
    nodes = np.ascontiguousarray(b.nodes)
    bary = np.ascontiguousarray(b.bary_weights)
    nq = p + 3
    g, w = np.polynomial.legendre.leggauss(nq)
    x = rng.uniform(-1.5, 1.5, size=ne * nq)
    l1 = np.ascontiguousarray(b.nodal(x).reshape(ne, nq, p + 1))
    lg = np.ascontiguousarray(b.nodal(g))
    eg = np.ascontiguousarray(b.edge(g))
    u1 = rng.uniform(0.2, 1.0, size=(ne, nq))
    x2 = rng.uniform(-1.5, 1.5, size=ne * ne * nq * nq)
    l2 = np.ascontiguousarray(b.nodal(x2).reshape(ne * ne, nq, nq, p + 1))
    u2 = rng.uniform(-1.0, 1.0, size=(ne * ne, nq, nq))
    return {
        "lagrange_values": (nodes, bary, x),
        "lagrange_derivs": (nodes, x),
        "mixed_local_1d": (l1, lg, eg, w, u1, 0.5),
        "mixed_local_2d": (l2, lg, eg, w, u2, 1.0, 2.0),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ne", type=int, default=32)
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"n_e={args.ne} p={args.p} (2D kernels use n_e^2 elements)")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, inputs in cases(args.ne, args.p, rng).items():
        f_np = getattr(kernels, name + "_np")
        f_nb = getattr(kernels, name + "_nb")
        diff = _max_diff(f_np(*inputs), f_nb(*inputs))  # also triggers compilation
        t_np = min(timeit.repeat(lambda: f_np(*inputs), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*inputs), number=1, repeat=args.repeat))
        print(f"{name:<18}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
