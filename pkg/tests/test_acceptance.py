"""One check per headline acceptance criterion; each prints a PASS/FAIL line.

Criteria that do not hold for this implementation are marked
xfail(strict=True): the line still reads FAIL and the test turns red if the
failure ever goes away.
"""

import time

import numpy as np
import pytest

from hymflow import diagnostics as dg
from hymflow import donaldson as dn
from hymflow import flow, g2, heat_kernel, monad
from hymflow import lattice as lat

# err / (h^2 + dt) measured once on the 16^2 instance (0.00568); checked on 32^2
ORACLE_C = 7.5e-3


# -- 1. G2 algebra --------------------------------------------------------------------


@pytest.fixture(scope="module")
def g2_table():
    t0 = time.perf_counter()
    rows = g2.identity_table()
    return {r["identity"]: r for r in rows}, time.perf_counter() - t0


def test_g2_structural_identities(g2_table):
    rows, elapsed = g2_table
    for name in (
        "T eigenspaces (+2, -1) have dimensions (7, 14)",
        "T^2 = T + 2",
        "6 <a,b> = -tr T_ab on all 49 basis pairs",
        "alpha_i ^ *phi0 = 3 (-1)^(i-1) e^(1..i^..7)",
    ):
        assert rows[name]["ok"], name
    assert elapsed < 1.0


@pytest.mark.xfail(strict=True, reason="alpha_i ^ *phi0 carries a factor 3 (-1)^(i-1) for the printed phi0")
def test_g2_algebra(g2_table, report):
    rows, elapsed = g2_table
    literal = rows["alpha_i ^ *phi0 = e^(1..i^..7)"]
    others = all(r["ok"] for r in rows.values() if r["required"])
    ok = literal["ok"] and others and elapsed < 1.0
    report(
        "G2 algebra exactness",
        ok,
        f"L_*phi0 alpha_i = e^(1..i^..7) {'holds' if literal['ok'] else 'fails: ' + literal['detail']}; "
        f"7/14 split, T^2 = T + 2, 49-pair trace identity exact; {elapsed:.2f} s",
    )
    assert ok


# -- 2. Kahler lift -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def lift_sample():
    rng = np.random.default_rng(2024)
    F = dg.random_curvature(rng, 3, 2, primitive=True)
    return g2.instanton_residual(dg.lift_curvature(F))


def test_kahler_lift_phi_and_instanton(g2_table, lift_sample):
    rows, _ = g2_table
    assert rows["omega ^ dtheta + Im Omega = phi0"]["ok"]
    assert rows["1/2 omega^2 - Re Omega ^ dtheta = -*phi0"]["ok"]
    assert lift_sample < 1e-10


@pytest.mark.xfail(strict=True, reason="the 4-form lifts to -*phi0, not *phi0")
def test_kahler_lift(g2_table, lift_sample, report):
    rows, _ = g2_table
    phi = rows["omega ^ dtheta + Im Omega = phi0"]["ok"]
    star = rows["1/2 omega^2 - Re Omega ^ dtheta = *phi0"]["ok"]
    ok = phi and star and lift_sample < 1e-10
    report(
        "Kahler to G2 lift",
        ok,
        f"phi0 {'exact' if phi else 'wrong'}; *phi0 {'exact' if star else 'off by a sign'}; "
        f"instanton residual {lift_sample:.1e}",
    )
    assert ok


# -- 3. flow oracle ---------------------------------------------------------------------------


def rank_one_error(n_D):
    chart = lat.LatticeChart(m=1, n_D=n_D, N_s=n_D + 1, S=np.pi, N_alpha=4)
    x, y, s, _ = chart.mesh()
    modes = [(1, 0, 1, 1.0), (0, 2, 1, 0.5), (1, 1, 2, 0.3)]

    def u(t):
        # log H solves the scalar heat equation; each mode decays at its own rate
        return sum(
            0.3 * c * np.exp(-(kx * kx + ky * ky + ks * ks) * t) * np.cos(kx * x + ky * y) * np.sin(ks * s)
            for kx, ky, ks, c in modes
        )

    H0 = np.exp(u(0.0))[..., None, None].astype(complex)
    trace, state = flow.run(flow.FlowConfig(T_end=0.5, cadence=10**6, energy=False), chart, H0)
    err = float(np.abs(np.log(state.H[..., 0, 0].real) - u(state.t)).max())
    h = max(chart.h_D, chart.h_s)
    return err, h * h + trace.dt


def test_flow_oracle(report):
    t0 = time.perf_counter()
    err, scale = rank_one_error(32)
    elapsed = time.perf_counter() - t0
    ok = err <= ORACLE_C * scale and elapsed < 30
    report("rank-1 flow oracle (32^2)", ok, f"max err {err:.2e} <= {ORACLE_C} (h^2 + dt) = {ORACLE_C * scale:.2e}; {elapsed:.1f} s")
    assert ok


# -- 4, 5. monotonicity and decay ---------------------------------------------------------------


@pytest.fixture(scope="module")
def cylinder_run():
    chart = lat.LatticeChart(m=1, n_D=16, N_s=64, S=8.0, N_alpha=16)
    H0 = lat.make_twist(chart, rank=2, amp=0.5, seed=1).reference_metric()
    t0 = time.perf_counter()
    trace, _ = flow.run(flow.FlowConfig(T_end=1.0, cadence=10, snapshot_every=10), chart, H0)
    return chart, H0, trace, time.perf_counter() - t0


@pytest.mark.slow
def test_monotonicity(cylinder_run, report):
    chart, _, trace, elapsed = cylinder_run
    mon = flow.monitor_max_principles(trace)
    energy = dg.energy_e(trace)
    ok = mon["ok"] and energy["bound_ok"] and elapsed < 300
    report(
        "monotonicity (16^2 x 64 x 16, T = 1)",
        ok,
        f"sup e_hat max increase {mon['e_hat_max_increase']:.1e}, sigma max increase {mon['sigma_max_increase']:.1e}, "
        f"max E / ||F0||^2 {max(trace.E) / trace.energy0:.1e}; {elapsed:.0f} s",
    )
    assert ok


@pytest.mark.slow
def test_decay(cylinder_run, report):
    chart, _, trace, _ = cylinder_run
    rep = flow.decay_profile(trace, chart)
    ok = rep["slope"] <= -0.9 and rep["comparison_ok"]
    report(
        "exponential decay of e_hat",
        ok,
        f"slope {rep['slope']:.2f} on s in {rep['fit_range']}; e_t <= B e^(t-s) violations {rep['violations']}",
    )
    assert ok


# -- 6. Donaldson functional ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def donaldson_results():
    chart = lat.LatticeChart(m=1, n_D=8, N_s=32, S=6.0, N_alpha=8)
    H0 = lat.make_twist(chart, rank=2, amp=0.5, seed=2).reference_metric()
    trace, _ = flow.run(flow.FlowConfig(T_end=0.3, cadence=1, energy=False), chart, H0)
    ident = dn.flow_identity_check(trace)
    c2 = dn.derive_c_n(H0, chart)
    ch3 = lat.LatticeChart(m=2, n_D=4, N_s=8, S=3.0, N_alpha=4)
    c3 = dn.derive_c_n(lat.make_twist(ch3, rank=2, amp=0.5, seed=1).reference_metric(), ch3)

    pchart = lat.LatticeChart(m=1, n_D=8, N_s=24, S=5.0, N_alpha=8)
    P0 = lat.make_twist(pchart, rank=2, amp=0.5, seed=1).reference_metric()
    disc = []
    for seed in range(10):
        H = dn.nearby_metric(P0, pchart, 0.1, seed=seed)
        K = dn.nearby_metric(P0, pchart, 0.1, seed=seed + 100)
        disc.append(dn.path_independence_check(H, P0, pchart, via=K, samples=17))
    return ident, (c2, c3), np.array(disc)


def test_donaldson_flow_identity_and_c_n(donaldson_results):
    ident, (c2, c3), _ = donaldson_results
    assert ident["ok"], ident["violations"]
    assert c2 == pytest.approx(flow.donaldson_constant(2), rel=1e-10)
    assert c3 == pytest.approx(flow.donaldson_constant(3), rel=1e-10)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="rank-2 lattice rho is closed only up to O(eps^2 h^2)")
def test_donaldson(donaldson_results, report):
    ident, (c2, c3), disc = donaldson_results
    closed = disc.max() <= 1e-6
    ok = ident["ok"] and closed and np.isclose(c2, 4) and np.isclose(c3, 8)
    report(
        "Donaldson functional",
        ok,
        f"flow identity {'ok' if ident['ok'] else 'violated'} (C = {dn.FLOW_IDENTITY_C:g}); c_2 = {c2:.6g}, c_3 = {c3:.6g}; "
        f"path discrepancy max {disc.max():.1e}, {int(np.sum(disc > 1e-6))}/10 above 1e-6",
    )
    assert ok


# -- 7. convergence --------------------------------------------------------------------------------


def test_convergence(report):
    chart = lat.LatticeChart(m=1, n_D=8, N_s=16, S=3.0, N_alpha=8)
    tw = lat.make_twist(chart, rank=2, amp=0.1, seed=0)
    budget = 20000
    est = flow.HYMFlow(T_end=1e3, cadence=50, target=1e-10, max_steps=budget, energy=False).fit(tw)
    F_hat = lat.hat_curvature(est.metric_, chart)
    resid = float(np.abs(F_hat[chart.interior()]).max())
    ok = est.converged_ and est.trace_.steps <= budget and est.trace_.sup_e[-1] < 1e-10 and resid < 1e-4
    report(
        "convergence on a weak twist",
        ok,
        f"sup e_hat {est.trace_.sup_e[-1]:.1e} after {est.trace_.steps}/{budget} steps; interior max |F_hat| {resid:.1e}",
    )
    assert ok


# -- 8. slab machinery -------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def slab_run():
    chart = lat.LatticeChart(m=1, n_D=8, N_s=48, S=6.0, N_alpha=8)
    H0 = lat.make_twist(chart, rank=2, amp=2.0, seed=4).reference_metric()
    trace, _ = flow.run(flow.FlowConfig(T_end=0.4, cadence=5, snapshot_every=4), chart, H0)
    return chart, H0, trace


@pytest.mark.slow
def test_slab_machinery(slab_run, cylinder_run, report):
    chart, H0, trace = slab_run
    beta = dg.weak_laplacian_beta(trace)
    claim = dg.claim_lower_bound(trace, chart, H0)
    big_chart, big_H0, big_trace, _ = cylinder_run
    big_beta = dg.weak_laplacian_beta(big_trace)
    parabola = claim.parabola_violations
    snaps = len(trace.snapshots)
    for _, H in big_trace.snapshots:
        ell = flow.slice_profile(flow.lambda_bar(H, big_H0)[0], big_chart)
        parabola += dg.parabola_check(ell, big_chart, big_beta)["violations"]
        snaps += 1
    moser = [dg.moser_slab_check(flow.lambda_bar(H, H0)[0], chart, beta) for _, H in trace.snapshots[1:]]
    moser_ok = all(m["ok"] for m in moser)

    rng = np.random.default_rng(6)
    w = np.full((chart.n_D, chart.n_D), chart.h_D**2)
    lp_ok = True
    for _ in range(100):
        f = rng.uniform(0, 1, size=w.shape) ** rng.uniform(0.5, 4)
        lp_ok &= dg.lp_interpolation_check(f, w)["ok"]
    flat = dg.lp_interpolation_check(np.full(w.shape, 0.7), w)
    lp_ok &= abs(flat["lhs"] - flat["rhs"]) <= 1e-12 * flat["rhs"]

    ok = parabola == 0 and moser_ok and len(claim.rows) == len(trace.snapshots) and lp_ok
    report(
        "slab machinery",
        ok,
        f"parabola violations {parabola} over {snaps} snapshots; Moser k' = {dg.MOSER_K_PRIME} "
        f"min margin {min(m['margin'] for m in moser):.2f}; claim rows {len(claim.rows)}; "
        f"Lp interpolation on 100 slice fields {'ok' if lp_ok else 'violated'}",
    )
    assert ok


# -- 9. Hodge-Riemann and Chern-Weil -----------------------------------------------------------------


def test_hodge_riemann_chern_weil(report):
    rng = np.random.default_rng(9)
    hr = cw = 0.0
    for _ in range(1000):
        A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        H = A @ A.conj().T + 0.5 * np.eye(2)
        # conjugate by H^(1/2) so F is skew with respect to H, as a Chern curvature is
        w, V = np.linalg.eigh(H)
        root = (V * np.sqrt(w)) @ V.conj().T
        F = np.linalg.inv(root) @ dg.random_curvature(rng, 2, 2) @ root
        hr = max(hr, dg.hodge_riemann_check(F[:, :, None], H[None]))
        G = rng.normal(size=(21, 2, 2)) + 1j * rng.normal(size=(21, 2, 2))
        r = dg.chern_weil_report(0.5 * (G - np.conj(np.swapaxes(G, -1, -2))))
        cw = max(cw, abs(r.ym - 3 * r.plus_sq - r.kappa) / r.ym, abs(r.kappa - r.minus_sq + 2 * r.plus_sq) / r.ym)
    ok = hr < 1e-8 and cw < 1e-8
    report("Hodge-Riemann and Chern-Weil", ok, f"1000 fields each; max relative residuals {hr:.1e}, {cw:.1e}")
    assert ok


# -- 10. monads --------------------------------------------------------------------------------------


@pytest.mark.slow
def test_monad(report):
    chern_ok = all(monad.chern_of_monad(c)[0] == 2 and monad.chern_of_monad(c)[1].coeffs == (1, 0, c, 0) for c in range(1, 11))
    null = str(monad.chern_of_monad(1)[1]) == "1 + h^2"
    complex_ok = all(monad.sample_monad(c, seed=c).is_complex() for c in range(1, 11))
    exact_ok = all(monad.exactness_report(monad.sample_monad(c, seed=c), points=20, seed=c)["ok"] for c in (1, 2, 3))
    ok = chern_ok and null and complex_ok and exact_ok
    report(
        "instanton monads",
        ok,
        f"rank 2, c1 = 0, c2 = c for c <= 10: {chern_ok}; c = 1 gives 1 + h^2: {null}; "
        f"beta alpha = 0 for 10 sampled monads: {complex_ok}",
    )
    assert ok


# -- 11. heat kernel ----------------------------------------------------------------------------------


def test_heat_kernel(report):
    rep = heat_kernel.heat_kernel_diag_check(size=128, dim=2, C=5.0)
    ok = rep["ok"] and rep["decade"][1] / rep["decade"][0] >= 10 - 1e-9
    report(
        "lattice heat kernel",
        ok,
        f"diagonal slope {rep['slope']:.3f} vs {rep['target']}; envelope C = 5, C0 = {rep['C0']:.4f}, "
        f"worst ratio {rep['worst_ratio']:.3f}",
    )
    assert ok
