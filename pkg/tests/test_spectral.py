import numpy as np
import pytest

from mimadv.assembly import VelocityModel
from mimadv.mesh import build_mesh
from mimadv.operators import build_A, build_A_PG
from mimadv.spectral import (
    DispersionRecord,
    EigenSolverError,
    amplification_spectrum,
    cfl_number,
    dispersion,
    dispersion_branch,
    eig_generalized,
    fourier_modes,
    fourier_pair,
    growth_rates,
    interpolation_matrix,
    sample_points,
    spectral_gap,
    stability_scan,
    write_dispersion_csv,
)

U = 0.4
CONST = VelocityModel.constant(U)


@pytest.fixture(scope="module")
def p3():
    m = build_mesh(40, 1.0, 3)
    A, Apg = build_A(m, CONST), build_A_PG(m, CONST, 0.005)
    return m, A, Apg, dispersion(m, A.mass, A.matrix), dispersion(m, Apg.mass, Apg.matrix)


def test_trivial_pencils():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 6))
    M = X @ X.T + 6 * np.eye(6)
    w, _ = eig_generalized(M, np.zeros((6, 6)))
    np.testing.assert_allclose(w, 0, atol=1e-14)
    w, v = eig_generalized(M, M)
    np.testing.assert_allclose(w, 1, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(v, axis=0), 1.0)


def test_singular_mass_is_reported():
    with pytest.raises(EigenSolverError):
        eig_generalized(np.diag([1.0, 0.0]), np.eye(2))


def test_original_operator_spectrum_is_imaginary(p3):
    m, A, *_ = p3
    w, v = eig_generalized(A.mass, A.matrix)
    assert np.max(np.abs(w.real)) <= 1e-10 * np.max(np.abs(w.imag))
    # conjugate pairs
    for z in w:
        assert np.min(np.abs(w - np.conj(z))) <= 1e-10 * np.abs(w).max()


def test_growth_rate_sign():
    np.testing.assert_array_equal(growth_rates(np.array([1 + 2j])), [-1 - 2j])


def test_sample_points_and_modes():
    m = build_mesh(4, 2.0, 2)
    np.testing.assert_allclose(sample_points(m), (np.arange(8) + 0.5) * 0.25)
    np.testing.assert_array_equal(fourier_modes(8), np.arange(-4, 4))
    np.testing.assert_array_equal(fourier_modes(5), np.arange(-2, 3))


def test_pure_cosine_pairs_with_its_mode():
    m = build_mesh(10, 1.0, 3)
    x = sample_points(m)
    v = np.linalg.solve(interpolation_matrix(m), np.cos(6 * np.pi * x))
    rec = fourier_pair(m, (np.array([1j]), v[:, None]))
    assert rec[0].k == 3  # tie between +-3 goes to the positive mode
    rec = fourier_pair(m, (np.array([0.0]), np.ones((m.n_q, 1))))
    assert rec[0].k == 0


def test_every_eigenvalue_paired_once(p3):
    m, A, _, recs, _ = p3
    assert len(recs) == m.n_q
    ks = {r.k for r in recs}
    assert ks <= set(fourier_modes(m.n_q))


def test_dispersion_symmetry(p3):
    m, _, _, ra, rp = p3
    for recs in (ra, rp):
        by_k = {}
        for r in recs:
            by_k.setdefault(r.k, []).append(complex(r.omega_re, r.omega_im))
        for k, ws in by_k.items():
            if k in (0, -(m.n_q // 2)):
                continue
            for z in ws:
                assert min(abs(np.conj(z) - o) for o in by_k[-k]) <= 1e-10 * abs(z)


def test_low_modes_follow_exact_relation(p3):
    m, _, _, ra, _ = p3
    scale = U * 2 * np.pi / m.L
    for r in ra:
        if 0 < abs(r.k) <= m.n_q // 8:
            assert r.omega_im / scale == pytest.approx(r.k, rel=1e-3)


def test_gaps_present_for_original_and_narrowed_by_upwinding(p3):
    m, _, _, ra, rp = p3
    scale = U * 2 * np.pi / m.L
    ga, gp = spectral_gap(ra) / scale, spectral_gap(rp) / scale
    assert ga > 1.3  # jump well above the analytic unit slope
    assert gp < ga


def test_pg_spectrum_dissipative(p3):
    m, _, Apg, _, _ = p3
    w, _ = eig_generalized(Apg.mass, Apg.matrix)
    lam = growth_rates(w)
    assert lam.real.max() <= 1e-10 * np.abs(lam).max()
    assert lam.real.min() < 0


def test_dissipation_steepens_with_degree():
    def most_negative(p, ne):
        m = build_mesh(ne, 1.0, p)
        op = build_A_PG(m, CONST, 0.005)
        return growth_rates(eig_generalized(op.mass, op.matrix)[0]).real.min()

    assert abs(most_negative(6, 20)) > abs(most_negative(3, 40))


def test_dispersion_branch_median():
    recs = [DispersionRecord(0, 0, 0.0, 1), DispersionRecord(1, 0, 1.0, 1), DispersionRecord(1, 0, 3.0, 1), DispersionRecord(-1, 0, -2.0, 1)]
    ks, w = dispersion_branch(recs)
    np.testing.assert_array_equal(ks, [0, 1])
    np.testing.assert_array_equal(w, [0.0, 2.0])


def test_spectral_gap_on_synthetic_branch():
    w = [0, 1, 2, 4, 5, 6, 5.5]
    recs = [DispersionRecord(k, 0.0, float(v), 1.0) for k, v in enumerate(w)]
    assert spectral_gap(recs) == 2.0  # the fold after the peak is ignored


def test_amplification_spectra(p3):
    m, A, Apg, *_ = p3
    wa = amplification_spectrum(A.mass, A.matrix, 0.005)
    assert np.max(np.abs(np.abs(wa) - 1)) <= 1e-10
    wp = np.abs(amplification_spectrum(Apg.mass, Apg.matrix, 0.005))
    assert wp.max() <= 1 + 1e-12 and wp.min() < 1
    np.testing.assert_allclose(amplification_spectrum(A.mass, A.matrix, 0.0), 1.0, atol=1e-12)


def test_stability_scan_p3():
    m = build_mesh(20, 1.0, 3)
    cfl = np.array([1e-9, 0.1, 0.5, 1.0, 1.5])
    dts = cfl * m.L / (U * m.n_e * m.p)
    scan = stability_scan(m, U, dts)
    np.testing.assert_allclose(scan.cfl_values, cfl, rtol=1e-12)
    assert np.nanmax(scan.magnitudes) <= 1 + 1e-12
    assert np.nanmin(scan.magnitudes) >= 0
    assert np.nanmax(np.abs(scan.magnitudes[0] - 1)) <= 1e-6
    # moderate CFL: damping grows with |k| over the upper half of the modes
    row = scan.magnitudes[2]
    ak = np.abs(scan.modes)
    comb = np.array([np.nanmax(row[ak == a]) for a in range(m.n_q // 4, m.n_q // 2 + 1)])
    assert np.all(np.diff(comb) <= 1e-12)


def test_cfl_number():
    m = build_mesh(20, 1.0, 3)
    assert cfl_number(m, 0.4, 0.005) == pytest.approx(0.12)


def test_dispersion_csv(tmp_path):
    recs = [DispersionRecord(-1, 0.0, -2.0, 1.0), DispersionRecord(1, 0.5, 2.0, 1.0)]
    write_dispersion_csv(tmp_path / "d.csv", recs, scale=2.0)
    assert (tmp_path / "d.csv").read_text().splitlines() == ["k,omega_re,omega_im", "-1,0.0,-1.0", "1,0.25,1.0"]


def test_scan_csv(tmp_path):
    m = build_mesh(4, 1.0, 2)
    scan = stability_scan(m, 1.0, [0.01])
    scan.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "cfl,k,abs_omega" and len(lines) == 1 + m.n_q
