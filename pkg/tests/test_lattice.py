import numpy as np
import pytest

from hymflow import lattice as lat
from hymflow._validation import check_metric_field


def test_chart_geometry():
    ch = lat.LatticeChart(m=1, n_D=8, N_s=17, S=4.0, N_alpha=8)
    assert ch.n == 2
    assert ch.h_s == pytest.approx(0.25)
    assert ch.s_values()[-1] == pytest.approx(4.0)
    vol = ch.L_D**2 * 4.0 * 2 * np.pi
    assert ch.weights().sum() == pytest.approx(vol)
    assert ch.shape == (8, 8, 17, 8)


def test_cfl_dt():
    ch = lat.LatticeChart(m=1, n_D=8, N_s=17, S=4.0, N_alpha=8)
    inv = sum(1 / h**2 for h in ch.spacings)
    assert ch.cfl_dt(1.0) == pytest.approx(0.5 / inv)


def _errors(n):
    ch = lat.LatticeChart(m=1, n_D=n, N_s=n + 1, S=np.pi, N_alpha=n)
    x, y, s, a = ch.mesh()
    f = np.sin(x) * np.cos(s) + np.cos(a)
    e1 = np.abs(lat.diff(f, 2, ch) + np.sin(x) * np.sin(s)).max()
    e2 = np.abs(lat.diff2(f, 0, ch) + np.sin(x) * np.cos(s)).max()
    e3 = np.abs(lat.diff2(f, 2, ch) + np.sin(x) * np.cos(s)).max()
    return np.array([e1, e2, e3])


def test_differences_second_order():
    ratio = _errors(16) / _errors(32)
    assert np.all(ratio > 3.3)


def test_laplacian_and_dd_bar():
    ch = lat.LatticeChart(m=1, n_D=16, N_s=17, S=np.pi, N_alpha=16)
    x, y, s, a = ch.mesh()
    f = np.cos(x + 2 * y) * np.sin(s) * np.cos(a)
    # the diagonal dd_bar stencil is a quarter of the plane Laplacian
    lap = sum(4 * lat.dd_bar(f, j, j, ch) for j in range(ch.n))
    inner = ch.interior()
    assert np.allclose(lap[inner], lat.flat_laplacian(f, ch)[inner])
    assert np.allclose(lat.kahler_laplacian(f, ch), -lat.flat_laplacian(f, ch))


def test_integration_by_parts_exact(rng, small_chart):
    f = rng.normal(size=small_chart.shape)
    g = rng.normal(size=small_chart.shape)
    assert lat.integration_by_parts_residual(f, g, small_chart) < 1e-9


def test_integration_by_parts_detects_wrong_laplacian(rng, small_chart, monkeypatch):
    f = rng.normal(size=small_chart.shape)
    g = rng.normal(size=small_chart.shape)
    original = lat.kahler_laplacian
    monkeypatch.setattr(lat, "kahler_laplacian", lambda u, ch: 1.01 * original(u, ch))
    assert lat.integration_by_parts_residual(f, g, small_chart) > 1e-3


def test_envelope_flat_at_zero():
    s = np.array([0.0, 1e-3])
    assert lat.envelope(s)[0] == 0.0
    assert lat.envelope(s)[1] < 1e-5


def test_reference_metric_valid(small_twist):
    H0 = small_twist.reference_metric()
    check_metric_field(H0)
    assert small_twist.integrability_residual() < 5e-2


def test_twist_decays_along_s(small_twist, small_chart):
    g = small_twist.gauge
    dev = np.abs(g - np.eye(2)).max(axis=(0, 1, 3, 4, 5))
    assert dev[-1] < 0.05 * dev.max()


def test_hat_matches_trace_of_curvature(small_twist, small_chart):
    H = small_twist.reference_metric()
    F = lat.curvature(H, small_chart)
    a = lat.hat_curvature(H, small_chart)
    b = lat.lambda_contract(F)
    assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(a).max())


def test_i_hat_is_self_adjoint(small_twist, small_chart):
    H = small_twist.reference_metric()
    A = 1j * lat.hat_curvature(H, small_chart)
    # H (i F_hat) is Hermitian
    HA = H @ A
    assert np.abs(HA - lat.dagger(HA)).max() < 1e-12


def test_curvature_skew_in_metric(small_twist, small_chart):
    H = small_twist.reference_metric()
    F = lat.curvature(H, small_chart)
    Hinv = lat.inv(H)
    # F_kj = H^-1 F_jk^dagger H
    for j in range(2):
        for k in range(2):
            adj = Hinv @ lat.dagger(F[j, k]) @ H
            assert np.abs(F[k, j] - adj).max() < 1e-10 * (1 + np.abs(F).max())


def test_rank_one_curvature_is_laplacian_of_log(small_chart):
    x, y, s, a = small_chart.mesh()
    u = 0.3 * np.sin(x) * np.sin(np.pi * s / small_chart.S)
    H = np.exp(u)[..., None, None].astype(complex)
    F = lat.hat_curvature(H, small_chart)[..., 0, 0]
    assert np.allclose(F, 0.5j * lat.flat_laplacian(u, small_chart))


def test_e_hat_nonnegative(small_twist, small_chart):
    e = lat.e_hat(lat.hat_curvature(small_twist.reference_metric(), small_chart))
    assert e.min() >= -1e-14


def test_expm_closed_form(rng):
    A = rng.normal(size=(50, 2, 2)) + 1j * rng.normal(size=(50, 2, 2))
    H = A @ lat.dagger(A) + np.eye(2)
    K = rng.normal(size=(50, 2, 2)) + 1j * rng.normal(size=(50, 2, 2))
    K = K + lat.dagger(K)
    X = np.linalg.solve(H, K)  # real spectrum
    from scipy.linalg import expm

    ref = np.array([expm(x) for x in X])
    assert np.allclose(lat.expm_real_spectrum(X), ref, atol=1e-10)


def test_inverse_names_singular_site(small_chart):
    H = lat.identity_field(small_chart, 2)
    H[1, 2, 3, 4] = 0
    with pytest.raises((ValueError, np.linalg.LinAlgError)) as exc:
        lat._inverse(H)
    assert "(1, 2, 3, 4)" in str(exc.value)


def test_validation_messages(small_chart):
    H = lat.identity_field(small_chart, 2)
    H[0, 1, 2, 3] = np.array([[1, 2], [2, 1]])
    with pytest.raises(ValueError, match=r"positive definite at site \(0, 1, 2, 3\)"):
        check_metric_field(H)
    H = lat.identity_field(small_chart, 2)
    H[0, 0, 5, 0, 0, 1] = 1j
    with pytest.raises(ValueError, match="not Hermitian"):
        check_metric_field(H)
