"""Command-line harness: ``mimadv <experiment> [--config file.json] [flags]``.

Exit codes: 0 success, 2 bad configuration, 3 numerical failure.
"""
import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy.linalg as sla

from . import __version__
from .assembly import FactorizationError
from .experiments import advect1d, fit_convergence, flux_convergence, material_convergence, velocity_from_spec
from .mesh import build_mesh
from .operators import KINDS, build_A, build_A_PG, build_B_PG
from .plane2d import DEFORMATIONAL, TRANSLATION, IterativeSolverError, run_tests2d
from .spectral import EigenSolverError, amplification_spectrum, dispersion, stability_scan, write_dispersion_csv
from .timestep import CENTERED, RK3

EXPERIMENTS = ("converge-flux", "converge-material", "advect1d", "dispersion", "stability", "advect2d")
EXIT_CONFIG, EXIT_NUMERICAL = 2, 3

DEFAULTS = {
    "converge-flux": dict(p=3, ne=[8, 16, 32, 64, 128], u="varying", dt_over_ne=0.1),
    "converge-material": dict(p=3, ne=[8, 16, 32, 64, 128], u="varying", dt_over_ne=0.1),
    "advect1d": dict(p=5, ne=[20], u="0.4", dt=0.005, T=2.5, operator="A_PG"),
    "dispersion": dict(p=3, ne=[40], u="0.4", dt=0.005),
    "stability": dict(p=3, ne=[20], u="0.4", cfl=[0.0, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0]),
    "advect2d": dict(p=3, ne=[8, 16, 32], test=TRANSLATION),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    p: int = 3
    ne: list = field(default_factory=lambda: [20])
    L: float = 1.0
    u: str = "0.4"
    dt: float = None
    dt_over_ne: float = None
    T: float = None
    operator: str = "A_PG"
    scheme: str = CENTERED
    out: str = "results"
    nquad: int = None
    tuning: float = 1.0
    cfl: list = None
    test: str = TRANSLATION
    upwind: bool = True
    record_every: int = 1
    snapshot_every: int = 0

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if int(self.p) != self.p or self.p < 1:
            raise ConfigError(f"p must be a positive integer, got {self.p!r}")
        if not self.ne or any(int(n) != n or n < 2 for n in self.ne):
            raise ConfigError(f"ne must be a list of integers >= 2, got {self.ne!r}")
        if not self.L > 0:
            raise ConfigError("L must be positive")
        try:
            velocity_from_spec(self.u, self.L)
        except ValueError as exc:
            raise ConfigError(f"u must be a number or 'varying', got {self.u!r}") from exc
        for name in ("dt", "dt_over_ne", "T"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if self.operator not in KINDS:
            raise ConfigError(f"operator must be one of {KINDS}, got {self.operator!r}")
        if self.scheme not in (CENTERED, RK3):
            raise ConfigError(f"scheme must be {CENTERED!r} or {RK3!r}")
        if self.nquad is not None and self.nquad < self.p + 1:
            raise ConfigError(f"nquad must be at least p+1 = {self.p + 1}")
        if self.test not in (TRANSLATION, DEFORMATIONAL):
            raise ConfigError(f"test must be {TRANSLATION!r} or {DEFORMATIONAL!r}")
        if self.cfl is not None and any(c < 0 for c in self.cfl):
            raise ConfigError("cfl values must be non-negative")
        if self.experiment in ("converge-flux", "converge-material") and len(self.ne) < 3:
            raise ConfigError("convergence runs need at least 3 resolutions")
        if self.experiment in ("advect1d", "dispersion") and self.dt is None:
            raise ConfigError(f"{self.experiment} needs dt")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


def _int_list(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from exc


def _float_list(s):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from exc


def _bool(s):
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="mimadv", description="Mixed mimetic spectral element advection experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", help="JSON file of RunConfig keys; flags override it")
        sp_.add_argument("--p", type=int)
        sp_.add_argument("--ne", type=_int_list, help="comma-separated element counts")
        sp_.add_argument("--L", type=float)
        sp_.add_argument("--u", help="constant speed or 'varying'")
        sp_.add_argument("--dt", type=float)
        sp_.add_argument("--dt-over-ne", dest="dt_over_ne", type=float)
        sp_.add_argument("--T", type=float)
        sp_.add_argument("--operator", choices=KINDS)
        sp_.add_argument("--scheme", choices=(CENTERED, RK3))
        sp_.add_argument("--out")
        sp_.add_argument("--nquad", type=int)
        sp_.add_argument("--tuning", type=float)
        sp_.add_argument("--cfl", type=_float_list)
        sp_.add_argument("--test", choices=(TRANSLATION, DEFORMATIONAL))
        sp_.add_argument("--upwind", type=_bool)
        sp_.add_argument("--record-every", dest="record_every", type=int)
        sp_.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    return parser


def resolve_config(args):
    d = {"experiment": args.experiment, **DEFAULTS[args.experiment]}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        loaded.pop("experiment", None)
        d.update(loaded)
    for k, v in vars(args).items():
        if k not in ("config", "experiment") and v is not None:
            d[k] = v
    if "u" in d:
        d["u"] = str(d["u"])
    try:
        cfg = RunConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


# ---- experiment runners ------------------------------------------------------


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return repr(float(v))


def _run_convergence(cfg, material):
    dt_over_ne = cfg.dt_over_ne if cfg.dt_over_ne is not None else 0.1
    fn = material_convergence if material else flux_convergence
    table = fn(cfg.p, cfg.ne, dt_over_ne, cfg.L, cfg.u, cfg.tuning, cfg.nquad)
    s0, s1 = table.slopes
    rows = [[n, _fmt(a), _fmt(b)] for n, a, b in zip(table.n_e, table.error_original, table.error_pg)]
    rows.append(["slope", _fmt(s0), _fmt(s1)])
    name = "convergence_material.csv" if material else "convergence_flux.csv"
    _write_rows(os.path.join(cfg.out, name), ["ne", "error_original", "error_pg"], rows)
    return [name], {"slope_original": s0, "slope_pg": s1}


def _run_advect1d(cfg):
    hist, final = advect1d(cfg.operator, cfg.p, cfg.ne[0], cfg.u, cfg.dt, cfg.T, cfg.L, cfg.tuning, cfg.nquad, cfg.record_every, cfg.scheme)
    tag = cfg.operator
    final.to_csv(os.path.join(cfg.out, f"final_{tag}.csv"), final.mesh.uniform_points(8))
    hist.to_csv(os.path.join(cfg.out, f"diagnostics_{tag}.csv"))
    d = hist.as_arrays()
    summary = {
        "mass_drift": float(np.max(np.abs(d["mass"] - d["mass"][0])) / abs(d["mass"][0])),
        "final_total_variation": float(d["total_variation"][-1]),
    }
    return [f"final_{tag}.csv", f"diagnostics_{tag}.csv"], summary


PLOT_DISPERSION = """# plot script for the dispersion CSVs written alongside this file (matplotlib)
import csv
import matplotlib.pyplot as plt

def load(name):
    with open(name) as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["k"]) for r in rows], [float(r["omega_re"]) for r in rows], [float(r["omega_im"]) for r in rows]

fig, (ax_i, ax_r) = plt.subplots(1, 2, figsize=(10, 4))
for name in {names}:
    k, wr, wi = load("dispersion_" + name + ".csv")
    ax_i.plot(k, wi, ".", label=name)
    ax_r.plot(k, wr, ".", label=name)
k, _, _ = load("dispersion_A.csv")
ax_i.plot(k, k, "k-", lw=0.5, label="exact")
ax_i.set_xlabel("k"); ax_i.set_ylabel("omega_i / (u 2 pi / L)")
ax_r.set_xlabel("k"); ax_r.set_ylabel("omega_r / (u 2 pi / L)")
ax_i.legend()
fig.savefig("dispersion.png", dpi=150)
"""

PLOT_STABILITY = """# plot script for the stability CSVs written alongside this file (matplotlib)
import csv
import matplotlib.pyplot as plt

with open("stability_scan.csv") as fh:
    rows = list(csv.DictReader(fh))
cfl = [float(r["cfl"]) for r in rows]
k = [float(r["k"]) for r in rows]
a = [float(r["abs_omega"]) for r in rows]
fig, (ax_c, ax_s) = plt.subplots(1, 2, figsize=(10, 4))
sc = ax_c.scatter(k, cfl, c=a, s=6, cmap="viridis")
fig.colorbar(sc, ax=ax_c, label="|omega|")
ax_c.set_xlabel("k"); ax_c.set_ylabel("CFL")
for name in ("A", "A_PG"):
    with open("amplification_" + name + ".csv") as fh:
        rr = list(csv.DictReader(fh))
    ax_s.plot([float(r["re"]) for r in rr], [float(r["im"]) for r in rr], ".", label=name)
ax_s.set_aspect("equal"); ax_s.legend()
fig.savefig("stability.png", dpi=150)
"""


def _run_dispersion(cfg):
    vel = velocity_from_spec(cfg.u, cfg.L)
    mesh = build_mesh(cfg.ne[0], cfg.L, cfg.p)
    scale = abs(float(cfg.u)) * 2.0 * np.pi / cfg.L if cfg.u != "varying" else 2.0 * np.pi / cfg.L
    ops = {
        "A": build_A(mesh, vel, cfg.nquad),
        "A_PG": build_A_PG(mesh, vel, cfg.dt, cfg.tuning, cfg.nquad),
        "B_PG": build_B_PG(mesh, vel, cfg.dt, cfg.tuning, cfg.nquad),
    }
    outputs, summary = [], {}
    for name, op in ops.items():
        recs = dispersion(mesh, op.mass, op.matrix)
        fname = f"dispersion_{name}.csv"
        write_dispersion_csv(os.path.join(cfg.out, fname), recs, scale)
        outputs.append(fname)
        summary[f"max_re_{name}"] = max(r.omega_re for r in recs) / scale
    with open(os.path.join(cfg.out, "plot_dispersion.py"), "w") as fh:
        fh.write(PLOT_DISPERSION.format(names=tuple(ops)))
    outputs.append("plot_dispersion.py")
    return outputs, summary


def _run_stability(cfg):
    if cfg.u == "varying":
        raise ConfigError("the stability scan needs a constant velocity")
    u = float(cfg.u)
    mesh = build_mesh(cfg.ne[0], cfg.L, cfg.p)
    cfl = cfg.cfl if cfg.cfl is not None else DEFAULTS["stability"]["cfl"]
    dts = [c * cfg.L / (abs(u) * mesh.n_e * mesh.p) for c in cfl]
    scan = stability_scan(mesh, u, dts, cfg.tuning, cfg.nquad)
    scan.to_csv(os.path.join(cfg.out, "stability_scan.csv"))
    outputs = ["stability_scan.csv"]
    dt = cfg.dt if cfg.dt is not None else dts[len(dts) // 2]
    vel = velocity_from_spec(u, cfg.L)
    for name, op in (("A", build_A(mesh, vel, cfg.nquad)), ("A_PG", build_A_PG(mesh, vel, dt, cfg.tuning, cfg.nquad))):
        w = amplification_spectrum(op.mass, op.matrix, dt)
        w = w[np.lexsort((w.imag, w.real))]
        _write_rows(os.path.join(cfg.out, f"amplification_{name}.csv"), ["re", "im"], [[_fmt(z.real), _fmt(z.imag)] for z in w])
        outputs.append(f"amplification_{name}.csv")
    with open(os.path.join(cfg.out, "plot_stability.py"), "w") as fh:
        fh.write(PLOT_STABILITY)
    outputs.append("plot_stability.py")
    return outputs, {"max_abs_omega": float(np.nanmax(scan.magnitudes))}


def _run_advect2d(cfg):
    outputs, errors, summary = [], [], {}
    for ne in cfg.ne:
        snap_dir = os.path.join(cfg.out, f"snapshots_ne{ne}") if cfg.snapshot_every else None
        report, _ = run_tests2d(cfg.test, ne, cfg.p, cfg.dt, cfg.T, cfg.upwind, cfg.tuning, cfg.nquad, snapshot_every=cfg.snapshot_every, out_dir=snap_dir)
        fname = f"report_{cfg.test}_ne{ne}.json"
        report.to_json(os.path.join(cfg.out, fname))
        outputs.append(fname)
        errors.append(report.l2_error)
        summary[f"max_mass_error_ne{ne}"] = report.max_mass_error
    if len(cfg.ne) >= 3:
        slope = fit_convergence(cfg.ne, errors)
        rows = [[n, _fmt(e)] for n, e in zip(cfg.ne, errors)] + [["slope", _fmt(slope)]]
        _write_rows(os.path.join(cfg.out, f"convergence_{cfg.test}.csv"), ["ne", "error"], rows)
        outputs.append(f"convergence_{cfg.test}.csv")
        summary["slope"] = slope
    return outputs, summary


RUNNERS = {
    "converge-flux": lambda c: _run_convergence(c, False),
    "converge-material": lambda c: _run_convergence(c, True),
    "advect1d": _run_advect1d,
    "dispersion": _run_dispersion,
    "stability": _run_stability,
    "advect2d": _run_advect2d,
}

NUMERICAL_ERRORS = (np.linalg.LinAlgError, sla.LinAlgError, FactorizationError, EigenSolverError, IterativeSolverError, FloatingPointError)


def run_experiment(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    start = time.perf_counter()
    outputs, summary = RUNNERS[cfg.experiment](cfg)
    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "wall_clock_seconds": time.perf_counter() - start,
        "outputs": outputs,
        "summary": summary,
    }
    with open(os.path.join(cfg.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        manifest = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps({"out": cfg.out, "outputs": manifest["outputs"], "summary": manifest["summary"]}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
