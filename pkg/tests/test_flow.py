import numpy as np
import pytest
from sklearn.base import clone

from hymflow import flow
from hymflow import lattice as lat
from hymflow._validation import check_metric_field


@pytest.fixture(scope="module")
def short_run(small_chart, small_twist):
    H0 = small_twist.reference_metric()
    cfg = flow.FlowConfig(T_end=0.4, cadence=2, snapshot_every=5)
    trace, state = flow.run(cfg, small_chart, H0)
    return H0, trace, state


def test_step_refuses_large_dt(small_chart, small_twist):
    H0 = small_twist.reference_metric()
    st = flow.make_state(H0.copy(), H0, small_chart)
    limit = small_chart.cfl_dt(1.0)
    with pytest.raises(ValueError, match="CFL"):
        flow.step(st, 1.5 * limit, small_chart)


def test_step_keeps_metric_and_boundary(short_run, small_chart):
    H0, trace, state = short_run
    check_metric_field(state.H)
    for idx in (0, -1):
        sl = [slice(None)] * 4
        sl[small_chart.s_axis] = idx
        assert np.array_equal(state.H[tuple(sl)], H0[tuple(sl)])


def test_monitors_pass_on_short_run(short_run):
    _, trace, _ = short_run
    mon = flow.monitor_max_principles(trace)
    assert mon["ok"], mon
    assert max(trace.E) <= 1e-6 * trace.energy0


def test_distances(rng):
    A = rng.normal(size=(20, 2, 2)) + 1j * rng.normal(size=(20, 2, 2))
    H = A @ lat.dagger(A) + np.eye(2)
    B = rng.normal(size=(20, 2, 2)) + 1j * rng.normal(size=(20, 2, 2))
    K = B @ lat.dagger(B) + np.eye(2)
    assert flow.sigma(H, H)[1] < 1e-12
    assert np.allclose(flow.sigma(H, K)[0], flow.sigma(K, H)[0])
    xi = flow.log_endomorphism(K, H)
    w, V = np.linalg.eig(xi)
    back = H @ (V * np.exp(w)[..., None, :]) @ np.linalg.inv(V)
    assert np.allclose(back, K)
    lam, L = flow.lambda_bar(K, H)
    top = np.log(np.linalg.eigvals(np.linalg.solve(H, K)).real.max(axis=-1))
    assert np.allclose(lam, np.maximum(top, 0))


def test_sigma_bounds_lambda(rng):
    # sigma >= 2 (cosh(lambda) - 1) >= lambda^2 for the top eigenvalue
    A = rng.normal(size=(50, 2, 2)) + 1j * rng.normal(size=(50, 2, 2))
    H = np.eye(2) + 0 * A
    K = A @ lat.dagger(A) + 0.1 * np.eye(2)
    s = flow.sigma(H, K)[0]
    lam = np.abs(np.log(np.linalg.eigvalsh(K))).max(axis=-1)
    assert np.all(s >= lam**2 - 1e-12)


def test_det_one_flow(small_chart):
    tw = lat.make_twist(small_chart, rank=2, amp=0.5, seed=3, det_one=True)
    est = flow.HYMFlow(T_end=0.1, det_one=True, energy=False).fit(tw)
    det = np.linalg.det(est.metric_).real
    assert np.abs(det - 1).max() < 1e-10


def test_estimator_params_roundtrip():
    est = flow.HYMFlow(T_end=0.5, cadence=3)
    assert est.get_params()["cadence"] == 3
    twin = clone(est).set_params(T_end=2.0)
    assert twin.T_end == 2.0 and est.T_end == 0.5


def test_convergence_flag_and_target(small_chart):
    tw = lat.make_twist(small_chart, rank=2, amp=0.05, seed=0)
    est = flow.HYMFlow(T_end=0.2, target=1e-2, energy=False).fit(tw)
    assert est.converged_
    assert est.trace_.sup_e[-1] < 1e-2


def test_twin_sigma_non_increasing(small_chart, small_twist):
    H0 = small_twist.reference_metric()
    other = lat.make_twist(small_chart, rank=2, amp=0.5, seed=9).reference_metric()
    # same Dirichlet data, different interior
    inner = small_chart.interior()
    H0_alt = H0.copy()
    H0_alt[inner] = other[inner]
    cfg = flow.FlowConfig(T_end=0.2, cadence=2)
    sig = flow.twin_sigma_monitor(cfg, small_chart, H0, H0_alt)
    assert np.all(np.diff(sig) <= 1e-8)


def test_laplacian_bound_frozen_constant():
    chart = lat.LatticeChart(m=1, n_D=8, N_s=48, S=6.0, N_alpha=8)
    tw = lat.make_twist(chart, rank=2, amp=1.0, seed=2)
    H0 = tw.reference_metric()
    trace, _ = flow.run(flow.FlowConfig(T_end=0.3, cadence=5, snapshot_every=4, energy=False), chart, H0)
    for _, H in trace.snapshots[1:]:
        assert flow.laplacian_bound_check(H, H0, chart)


def test_donaldson_constant():
    assert flow.donaldson_constant(2) == 4.0
    assert flow.donaldson_constant(3) == 8.0


def test_decay_profile_on_short_run(short_run, small_chart):
    _, trace, _ = short_run
    rep = flow.decay_profile(trace, small_chart)
    assert rep["slope"] < 0
    assert rep["violations"] == 0


def test_c1_distance_decays_down_the_tube():
    chart = lat.LatticeChart(m=1, n_D=8, N_s=48, S=8.0, N_alpha=8)
    H0 = lat.make_twist(chart, rank=2, amp=0.5, seed=1).reference_metric()
    _, state = flow.run(flow.FlowConfig(T_end=1.0, cadence=20, energy=False), chart, H0)
    prof = flow.c1_profile(state.H, H0, chart)
    s = chart.s_values()
    sel = (s > 2) & (s < chart.S - 1)
    slope = np.polyfit(s[sel], np.log(prof[sel]), 1)[0]
    assert slope < -0.5
    assert np.all(np.diff(prof[sel]) < 0)
