"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every sub-check of a criterion is evaluated and reported before the test asserts,
so a failing criterion still shows all of its measured values.
"""
import time

import numpy as np
import pytest

from mimadv.assembly import VelocityModel, incidence
from mimadv.experiments import advect1d, fit_convergence, flux_convergence, material_convergence, tanh_pulse
from mimadv.mesh import Field, Q, build_mesh, l2_norm, project_to_Q, total_variation
from mimadv.operators import build_A, build_A_PG, build_B, build_B_PG, build_S, build_S_PG
from mimadv.plane2d import build_mesh2d, incidence2d, run_tests2d
from mimadv.spectral import (
    amplification_spectrum,
    dispersion,
    eig_generalized,
    growth_rates,
    spectral_gap,
    stability_scan,
)
from mimadv.timestep import CenteredStepper

pytestmark = pytest.mark.acceptance

U = 0.4
CONST = VelocityModel.constant(U)
RESOLUTIONS = [8, 16, 32, 64, 128]


@pytest.fixture
def verdict(capsys):
    def report(name, checks):
        ok = all(c[1] for c in checks)
        detail = "; ".join(f"{label}={'ok' if good else 'FAIL'} ({info})" for label, good, info in checks)
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed = [c[0] for c in checks if not c[1]]
        assert not failed, f"{name} failed checks: {failed}"

    return report


def _slopes_ok(table, lo):
    s = table.slopes
    return min(s) >= lo, s


def test_c1_flux_projection_convergence(verdict):
    t0 = time.perf_counter()
    t3 = flux_convergence(3, RESOLUTIONS)
    t6 = flux_convergence(6, RESOLUTIONS)
    wall = time.perf_counter() - t0
    ok3, s3 = _slopes_ok(t3, 2.7)
    ok6, s6 = _slopes_ok(t6, 5.5)
    pg_better = all(b <= a for a, b in zip(t3.error_original, t3.error_pg))
    verdict(
        "C1 flux convergence",
        [
            ("p3 slopes>=2.7", ok3, f"{s3[0]:.3f}/{s3[1]:.3f}"),
            ("p6 slopes>=5.5", ok6, f"{s6[0]:.3f}/{s6[1]:.3f}"),
            ("p3 pg<=orig", pg_better, f"ratios {np.round(np.divide(t3.error_pg, t3.error_original), 4).tolist()}"),
            ("runtime<60s", wall < 60, f"{wall:.1f}s"),
        ],
    )


def test_c2_material_convergence(verdict):
    t0 = time.perf_counter()
    t3 = material_convergence(3, RESOLUTIONS)
    t6 = material_convergence(6, RESOLUTIONS)
    wall = time.perf_counter() - t0
    ok3, s3 = _slopes_ok(t3, 2.7)
    ok6, s6 = _slopes_ok(t6, 5.5)
    verdict(
        "C2 material convergence",
        [
            ("p3 slopes>=2.7", ok3, f"{s3[0]:.3f}/{s3[1]:.3f}"),
            ("p6 slopes>=5.5", ok6, f"{s6[0]:.3f}/{s6[1]:.3f}"),
            ("runtime<60s", wall < 60, f"{wall:.1f}s"),
        ],
    )


def test_c3_oscillation_suppression(verdict):
    t0 = time.perf_counter()
    finals = {k: advect1d(k, p=5, n_e=20, u=U, dt=0.005)[1] for k in ("A", "A_PG", "B_PG")}
    wall = time.perf_counter() - t0
    xs = finals["A"].mesh.uniform_points()
    tv = {k: total_variation(f.sample(xs)) for k, f in finals.items()}
    diff = Field(Q, finals["A_PG"].mesh, finals["A_PG"].coeffs - finals["B_PG"].coeffs)
    rel = l2_norm(diff) / l2_norm(finals["A_PG"])
    verdict(
        "C3 oscillation suppression",
        [
            ("TV(A_PG)<0.5 TV(A)", tv["A_PG"] < 0.5 * tv["A"], f"{tv['A_PG']:.3f} vs {tv['A']:.3f}"),
            ("|A_PG-B_PG|<1%", rel < 0.01, f"{rel:.2e}"),
            ("runtime<30s", wall < 30, f"{wall:.1f}s"),
        ],
    )


def test_c4_conservation_20_revolutions(verdict):
    dt, steps_per_rev = 0.005, 500
    t0 = time.perf_counter()
    hist = {k: advect1d(k, p=5, n_e=20, u=U, dt=dt, T=20.0 / U)[0].as_arrays() for k in ("A", "A_PG", "B_PG")}
    wall = time.perf_counter() - t0
    checks = []
    for k, h in hist.items():
        m = h["mass"]
        drift = np.abs(m - m[0]).max() / abs(m[0])
        checks.append((f"{k} mass<1e-8", drift < 1e-8, f"{drift:.1e}"))
    E = hist["A"]["energy"]
    dev = np.abs(E - E[0]).max() / E[0]
    checks.append(("A energy dev<5e-3", dev < 5e-3, f"{dev:.3e}"))
    half = E[E.size // 2 :]
    checks.append(("A no monotone growth last half", not np.all(np.diff(half) >= 0), f"last-half max {half.max() / E[0] - 1:.3e}"))
    for k in ("A_PG", "B_PG"):
        E = hist[k]["energy"][steps_per_rev:]
        inc = np.diff(E) / E[0]
        per_rev = np.all(np.diff(E[::steps_per_rev]) <= 0)
        checks.append(
            (
                f"{k} energy non-increasing per step",
                inc.max() <= 1e-14,
                f"{int((inc > 0).sum())} increases, max {inc.max():.1e}; per-revolution monotone {per_rev}",
            )
        )
    checks.append(("runtime<60s", wall < 60, f"{wall:.1f}s"))
    verdict("C4 conservation", checks)


def _energy_run(op, q0, dt, n_steps):
    M = op.mass.toarray()
    step = CenteredStepper(op.mass, op.matrix, dt)
    q = q0.copy()
    E = np.empty(n_steps + 1)
    E[0] = q @ M @ q
    for n in range(n_steps):
        q = step(q)
        E[n + 1] = q @ M @ q
    return E


def test_c5_skew_energy_conservation(verdict):
    mesh = build_mesh(20, 1.0, 5)
    dt = 0.005
    q0 = project_to_Q(mesh, tanh_pulse()).coeffs
    n_steps = int(round(20.0 / U / dt))
    checks = []
    for name, op in (("S", build_S(mesh, CONST)), ("S_PG", build_S_PG(mesh, CONST, dt))):
        E = _energy_run(op, q0, dt, n_steps)
        per_step = np.abs(np.diff(E)).max() / E[0]
        drift = abs(E[-1] - E[0]) / E[0]
        checks.append((f"{name} per-step<1e-11", per_step < 1e-11, f"{per_step:.1e}"))
        checks.append((f"{name} drift<1e-8", drift < 1e-8, f"{drift:.1e}"))
    verdict("C5 skew energy", checks)


@pytest.fixture(scope="module")
def spectra():
    out = {}
    for p, ne in ((3, 40), (6, 20)):
        m = build_mesh(ne, 1.0, p)
        A, Apg = build_A(m, CONST), build_A_PG(m, CONST, 0.005)
        out[p] = (m, A, Apg, dispersion(m, A.mass, A.matrix), dispersion(m, Apg.mass, Apg.matrix))
    return out


def test_c6_hyperbolicity_of_original_operator(verdict, spectra):
    checks = []
    for p, (m, A, *_rest) in spectra.items():
        lam = growth_rates(eig_generalized(A.mass, A.matrix)[0])
        ratio = np.abs(lam.real).max() / np.abs(lam.imag).max()
        checks.append((f"p{p} ne{m.n_e} |Re|<=1e-10|Im|", ratio <= 1e-10, f"{ratio:.1e}"))
    verdict("C6 hyperbolicity", checks)


def test_c7_pg_dissipation_and_gap(verdict, spectra):
    checks = []
    most_negative = {}
    for p, (m, _A, Apg, *_r) in spectra.items():
        lam = growth_rates(eig_generalized(Apg.mass, Apg.matrix)[0])
        rho = np.abs(lam).max()
        most_negative[p] = lam.real.min()
        checks.append((f"p{p} Re<=1e-10 rho", lam.real.max() <= 1e-10 * rho, f"max Re {lam.real.max():.1e}"))
        checks.append((f"p{p} some Re<0", lam.real.min() < 0, f"min Re {lam.real.min():.1f}"))
    m, _A, _Apg, ra, rp = spectra[3]
    scale = U * 2 * np.pi / m.L
    ga, gp = spectral_gap(ra) / scale, spectral_gap(rp) / scale
    checks.append(("gap A_PG<A (p3 ne40)", gp < ga, f"{gp:.3f} vs {ga:.3f}"))
    checks.append(
        (
            "|min Re| p6>p3 at 120 dofs",
            abs(most_negative[6]) > abs(most_negative[3]),
            f"{most_negative[6]:.1f} vs {most_negative[3]:.1f}",
        )
    )
    verdict("C7 PG dissipativity", checks)


SCAN_CFL = np.array([0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0])
MODERATE = 3  # index of CFL 0.5


def test_c8_time_map_stability(verdict):
    checks = []
    for p, ne in ((3, 20), (6, 10)):
        m = build_mesh(ne, 1.0, p)
        dts = SCAN_CFL * m.L / (U * m.n_e * m.p)
        A = build_A(m, CONST)
        dev = max(np.abs(np.abs(amplification_spectrum(A.mass, A.matrix, dt)) - 1).max() for dt in dts)
        checks.append((f"p{p} A ||w|-1|<=1e-10", dev <= 1e-10, f"{dev:.1e}"))
        scan = stability_scan(m, U, dts)
        top = np.nanmax(scan.magnitudes)
        checks.append((f"p{p} A_PG |w|<=1+1e-12", top <= 1 + 1e-12, f"max {top:.15f}"))
        row = scan.magnitudes[MODERATE]
        ak = np.abs(scan.modes)
        comb = np.array([np.nanmax(row[ak == a]) for a in range(m.n_q // 4, m.n_q // 2 + 1)])
        rise = np.diff(comb).max()
        checks.append((f"p{p} CFL0.5 non-increasing upper half", rise <= 1e-12, f"max rise {rise:.1e}"))
    verdict("C8 time-map stability", checks)


@pytest.fixture(scope="module")
def translation_runs():
    t0 = time.perf_counter()
    reports = [run_tests2d("translation", ne)[0] for ne in (8, 16, 32)]
    return reports, time.perf_counter() - t0


def test_c9_translation_convergence_2d(verdict, translation_runs):
    reports, wall = translation_runs
    ne = [r.n_e for r in reports]
    errs = [r.l2_error for r in reports]
    order = fit_convergence(ne, errs)
    verdict(
        "C9 2D translation",
        [
            ("order>=2.7", order >= 2.7, f"{order:.3f}, errors {[f'{e:.2e}' for e in errs]}"),
            ("dt proportional to 1/n_e", len({round(r.dt * r.n_e, 12) for r in reports}) == 1, f"dt*n_e={reports[0].dt * reports[0].n_e}"),
            ("runtime<300s", wall < 300, f"{wall:.1f}s"),
        ],
    )


def test_c10_mass_and_deformation_2d(verdict, translation_runs):
    up, _ = run_tests2d("deformational", 16, upwind=True)
    raw, _ = run_tests2d("deformational", 16, upwind=False)
    checks = []
    for r in translation_runs[0] + [up, raw]:
        checks.append((f"{r.kind[:5]} ne{r.n_e} upwind={r.upwind} mass<=1e-11", r.max_mass_error <= 1e-11, f"{r.max_mass_error:.1e}"))
    ratio = up.max_abs_run / up.max_abs_initial
    checks.append(("upwinded max|q|<=1.2 max|q0|", ratio <= 1.2, f"{ratio:.3f}"))
    checks.append(("TV(raw)>=2 TV(upwinded)", raw.tv_final >= 2 * up.tv_final, f"{raw.tv_final:.1f} vs {up.tv_final:.1f}"))
    verdict("C10 2D mass and deformation", checks)


def _random_velocity(rng, L):
    a, b, k, phi = rng.uniform(-1, 1), rng.uniform(0, 0.8), rng.integers(1, 4), rng.uniform(0, 2 * np.pi)
    return VelocityModel.analytic(lambda x: a + b * np.sin(2 * np.pi * k * x / L + phi))


def test_c11_structural_identities(verdict):
    worst = {"B": 0.0, "B_PG": 0.0, "A_PG0": 0.0, "E": 0.0, "E21": 0.0}
    for seed in range(20):
        rng = np.random.default_rng(seed)
        p, ne, L = int(rng.integers(1, 7)), int(rng.integers(2, 13)), float(rng.uniform(0.5, 3.0))
        dt = float(rng.uniform(1e-4, 0.05))
        m = build_mesh(ne, L, p)
        v = _random_velocity(rng, L)
        A = build_A(m, v).toarray()
        worst["B"] = max(worst["B"], np.abs(build_B(m, v).toarray() + A.T).max())
        Bpg = build_B_PG(m, v, dt).toarray()
        worst["B_PG"] = max(worst["B_PG"], np.abs(Bpg + build_A_PG(m, v, -dt).toarray().T).max())
        worst["A_PG0"] = max(worst["A_PG0"], np.abs(build_A_PG(m, v, 0.0).toarray() - A).max())
        worst["E"] = max(worst["E"], np.abs(np.ones(m.n_q) @ incidence(m).matrix).max())
        m2 = build_mesh2d(int(rng.integers(2, 7)), L, int(rng.integers(1, 5)))
        worst["E21"] = max(worst["E21"], np.abs(np.asarray(incidence2d(m2).matrix.sum(axis=0))).max())
    verdict(
        "C11 structural identities",
        [
            ("B=-A^T", worst["B"] <= 1e-12, f"{worst['B']:.1e}"),
            ("B_PG(dt)=-A_PG(-dt)^T", worst["B_PG"] <= 1e-12, f"{worst['B_PG']:.1e}"),
            ("1^T E=0", worst["E"] == 0.0, f"{worst['E']:.1e}"),
            ("1^T E21=0", worst["E21"] == 0.0, f"{worst['E21']:.1e}"),
            ("A_PG(0)=A", worst["A_PG0"] <= 1e-12, f"{worst['A_PG0']:.1e}"),
        ],
    )
