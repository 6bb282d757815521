"""Energy identities and the slice-supremum machinery behind the lower bound.

Conventions: Delta = -(flat Laplacian) has non-negative spectrum, and
lambda_bar is the top eigenvalue of log(H0^-1 H_t), clamped at zero.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import factorial

import numpy as np

from . import g2
from . import lattice as lat
from .flow import FlowTrace, lambda_bar, slice_profile


# -- Chern-Weil on the 7-frame --------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    kappa: float
    plus_sq: float
    minus_sq: float
    ym: float
    E: float = 0.0
    hodge_riemann_residual: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def _norm_sq(F):
    return float(np.sum(np.abs(F) ** 2))


def chern_weil_report(F) -> EnergyReport:
    """kappa = int tr(F^2) ^ phi, |F^+|^2, |F^-|^2 and YM for a 7-frame 2-form.

    ``F`` has leading axis 21 (sorted e-frame 2-form basis); any middle axes
    are sites; trailing axes are skew-Hermitian r x r blocks.
    """
    F = g2.as_endo_array(F)
    plus = np.tensordot(g2.plus_projector(), F, axes=(1, 0))
    minus = np.tensordot(g2.minus_projector(), F, axes=(1, 0))
    B = g2.phi_pairing()
    FF = np.einsum("i...ab,j...ba->ij...", F, F)
    # top coefficient against the volume form phi0 induces
    kappa = float(g2.ORIENTATION * np.einsum("ij,ij...->", B, FF).real)
    p2, m2 = _norm_sq(plus), _norm_sq(minus)
    return EnergyReport(kappa=kappa, plus_sq=p2, minus_sq=m2, ym=_norm_sq(F))


def kahler_to_real(F: np.ndarray) -> np.ndarray:
    """Complex components F[j, k] (dz^j ^ dzbar^k) of a form on C^3 to
    real 2-form coefficients in slots (x1, y1, x2, y2, x3, y3, theta)."""
    n = F.shape[0]
    if n != 3:
        raise ValueError("the 7-frame lift needs complex dimension 3")
    pos = {key: i for i, key in enumerate(g2.BASIS2)}
    out = np.zeros((21,) + F.shape[2:], dtype=complex)

    def add(a, b, c):
        if a == b:
            return
        if a < b:
            out[pos[(a, b)]] += c
        else:
            out[pos[(b, a)]] -= c

    for j in range(n):
        xj, yj = 2 * j + 1, 2 * j + 2
        for k in range(n):
            xk, yk = 2 * k + 1, 2 * k + 2
            c = F[j, k]
            # (dx_j + i dy_j) ^ (dx_k - i dy_k)
            add(xj, xk, c)
            add(xj, yk, -1j * c)
            add(yj, xk, 1j * c)
            add(yj, yk, c)
    return out


def lift_curvature(F: np.ndarray) -> np.ndarray:
    """Curvature on W (n = 3) as a 2-form on W x S^1 in the e-frame."""
    return g2.kahler_two_form_to_frame(kahler_to_real(F))


# -- Hodge-Riemann -----------------------------------------------------------------


def _hnorm_sq(A, H=None):
    if H is None:
        return np.sum(np.abs(A) ** 2, axis=(-1, -2))
    Hinv = lat.inv(H)
    return lat.trace_product(A @ Hinv @ lat.dagger(A), H).real


def hodge_riemann_sides(F: np.ndarray, H: np.ndarray | None = None):
    """Both sides of tr F^2 ^ omega^{n-2} = (n-2)! (|F_perp|^2 - (n-1)/n |F_hat|^2) dvol.

    Norms: |F|^2 = 4 sum_jk |F_jk|^2 and F_perp = F - (F_hat / n) omega.
    """
    n = F.shape[0]
    lhs = lat.chern_weil_density(F)
    Fh = lat.lambda_contract(F)
    perp = 0.0
    for j in range(n):
        for k in range(n):
            A = F[j, k] - (0.5j * Fh / n if j == k else 0.0)
            perp = perp + 4 * _hnorm_sq(A, H)
    rhs = factorial(n - 2) * (perp - (n - 1) / n * _hnorm_sq(Fh, H))
    return lhs, rhs


def hodge_riemann_check(F: np.ndarray, H: np.ndarray | None = None) -> float:
    """Max pointwise residual relative to the curvature scale."""
    lhs, rhs = hodge_riemann_sides(F, H)
    n = F.shape[0]
    total = sum(_hnorm_sq(F[j, k], H) for j in range(n) for k in range(n))
    scale = np.maximum(np.maximum(np.abs(lhs), 4 * total), 1e-300)
    return float(np.max(np.abs(lhs - rhs) / scale))


def random_curvature(rng: np.random.Generator, n: int, rank: int, sites=(), primitive=False):
    """Random (1,1)-form with F_kj = F_jk^dagger (skew-Hermitian as a real form)."""
    shape = (n, n) + tuple(sites) + (rank, rank)
    A = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    F = 0.5 * (A + np.conj(np.swapaxes(np.swapaxes(A, 0, 1), -1, -2)))
    if primitive:
        Fh = lat.lambda_contract(F)
        for j in range(n):
            F[j, j] = F[j, j] - 0.5j * Fh / n
    return F


def lattice_energy(H: np.ndarray, chart: lat.LatticeChart) -> dict:
    """Integrated kappa (Chern-Weil), |F|^2, |F_hat|^2 and the pointwise Hodge-Riemann residual."""
    F = lat.curvature(H, chart)
    w = chart.weights()
    cw = lat.chern_weil_density(F)
    return {
        "kappa": float(np.sum(cw * w)),
        "ym": float(np.sum(lat.curvature_norm_sq(F, H) * w)),
        "fhat_l2_sq": float(np.sum(lat.e_hat(lat.hat_curvature(H, chart)) * w)),
        "hodge_riemann_residual": hodge_riemann_check(F, H),
    }


# -- energy series -------------------------------------------------------------------


def energy_e(trace: FlowTrace) -> dict:
    """E(t) = int |F_t|^2 - |F_0|^2 with the bound E <= 1e-6 ||F_0||^2."""
    E = np.asarray(trace.E, dtype=float)
    F0 = float(getattr(trace, "energy0", 0.0))
    tol = 1e-6 * F0
    return {
        "t": np.asarray(trace.t),
        "E": E,
        "F0_norm_sq": F0,
        "tol": tol,
        "bound_ok": bool(np.all(E <= tol)) if len(E) else True,
        "monotone_ok": bool(np.all(np.diff(E) <= tol)) if len(E) > 1 else True,
        "E0": float(E[0]) if len(E) else 0.0,
    }


# -- weak Laplacian bound ---------------------------------------------------------------


def weak_laplacian_beta(trace: FlowTrace) -> float:
    """beta = 2 (sup |F_hat_t| + sup |F_hat_0|) over the run."""
    sup_t = float(np.sqrt(max(trace.sup_e)))
    sup_0 = float(np.sqrt(trace.sup_e[0]))
    return 2.0 * (sup_t + sup_0)


def bump(chart: lat.LatticeChart, center, radius) -> np.ndarray:
    """Smooth non-negative bump, compactly supported, peak 1."""
    grid = chart.mesh()
    r2 = 0.0
    for ax, (c, rad) in enumerate(zip(center, radius)):
        d = grid[ax] - c
        if ax != chart.s_axis:
            period = chart.L_D if ax < chart.s_axis else 2 * np.pi
            d = (d + period / 2) % period - period / 2
        r2 = r2 + (d / rad) ** 2
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(r2 < 1, np.exp(1 - 1 / np.maximum(1 - r2, 1e-300)), 0.0)
    return out


def bump_bank(chart: lat.LatticeChart, count: int = 24, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    bank = []
    for _ in range(count):
        rad_s = rng.uniform(4 * chart.h_s, 1.0)
        center = []
        radius = []
        for ax in range(len(chart.shape)):
            if ax == chart.s_axis:
                center.append(rng.uniform(rad_s + chart.h_s, chart.S - rad_s - chart.h_s))
                radius.append(rad_s)
            else:
                h = chart.spacings[ax]
                period = chart.L_D if ax < chart.s_axis else 2 * np.pi
                center.append(rng.uniform(0, period))
                radius.append(rng.uniform(3 * h, period / 2))
        bank.append((tuple(center), tuple(radius)))
    return bank


def weak_bound_check(
    field_: np.ndarray, chart: lat.LatticeChart, beta: float, bank=None, norm: str = "L1"
) -> dict:
    """int f Delta(phi) <= beta ||phi|| for every bump phi in the bank.

    ``norm="L1"`` uses int phi, which is what a pointwise bound Delta f <= beta
    gives for non-negative phi.  ``norm="C0"`` uses sup phi; it follows from
    the pointwise bound only for bumps whose support has volume at most 1.
    """
    if norm not in ("C0", "L1"):
        raise ValueError("norm must be 'C0' or 'L1'")
    bank = bump_bank(chart) if bank is None else bank
    w = chart.weights()
    worst = -np.inf
    offending = None
    for center, radius in bank:
        phi = bump(chart, center, radius)
        lhs = float(np.sum(field_ * lat.kahler_laplacian(phi, chart) * w))
        size = float(phi.max()) if norm == "C0" else float(np.sum(phi * w))
        margin = (lhs - beta * size) / max(1.0, abs(beta * size))
        if margin > worst:
            worst, offending = margin, (center, radius)
    ok = worst <= 1e-10
    return {"ok": ok, "worst_margin": worst, "offending": None if ok else offending}


def weak_max_principle_check(f: np.ndarray, chart: lat.LatticeChart, box) -> dict:
    """If Delta f <= 0 inside ``box`` (tuple of slices), max inside <= max on its rim."""
    lap = lat.kahler_laplacian(f, chart)
    sub = f[box]
    inner = tuple(slice(1, -1) for _ in box)
    if np.any(lap[box][inner] > 1e-12):
        return {"applicable": False, "ok": True}
    rim = np.ones(sub.shape, dtype=bool)
    rim[inner] = False
    ok = float(sub[inner].max()) <= float(sub[rim].max()) + 1e-10
    return {"applicable": True, "ok": ok, "interior_max": float(sub[inner].max()), "rim_max": float(sub[rim].max())}


# -- parabola, Moser, claim ------------------------------------------------------------------


def delta_plus(beta: float, L: float, eps: float = 0.0) -> float:
    """1/2 (sqrt(1 + (8/beta)(1 - eps) L) - 1)."""
    return 0.5 * (np.sqrt(1.0 + 8.0 / beta * (1.0 - eps) * L) - 1.0)


def furthest_max(ell: np.ndarray, s: np.ndarray, rtol: float = 1e-12) -> tuple[float, float, int]:
    L = float(np.max(ell))
    idx = int(np.flatnonzero(ell >= L - rtol * max(L, 1e-300))[-1])
    return L, float(s[idx]), idx


def parabola_check(ell: np.ndarray, chart: lat.LatticeChart, beta: float, eps: float = 0.0) -> dict:
    """Count s in I_t = [S_t, S_t + delta+] with ell(s) < P(s) - 1e-8."""
    s = chart.s_values()
    L, S_t, _ = furthest_max(ell, s)
    if L <= 0:
        return {"L": 0.0, "S_t": S_t, "delta_plus": 0.0, "violations": 0, "checked": 0}
    dp = delta_plus(beta, L, eps)
    sel = (s >= S_t) & (s <= S_t + dp)
    P = L - 0.5 * beta * (s - S_t) * (s - S_t + 1)
    bad = sel & (ell < P - 1e-8)
    return {
        "L": L,
        "S_t": S_t,
        "delta_plus": dp,
        "violations": int(bad.sum()),
        "checked": int(sel.sum()),
        "min_gap": float(np.min((ell - P)[sel])) if sel.any() else 0.0,
    }


def _unit_cylinders(lam, chart, starts, x):
    """(average of lam^{1+x}, (max lam)^{1+x}) over unit cylinders B_s.

    B_s spans s in [s0, s0 + 1/(2 pi)), the full circle, and a half-torus
    box in the first D-direction centred on the maximiser.
    """
    s = chart.s_values()
    length = 1.0 / (2 * np.pi)
    w = chart.weights()
    nd = len(chart.shape)
    n_D = chart.n_D
    out = []
    for lo in starts:
        s_idx = np.flatnonzero((s >= lo) & (s < lo + length))
        if len(s_idx) == 0:
            continue
        sub = np.take(lam, s_idx, axis=chart.s_axis)
        x0 = np.unravel_index(np.argmax(sub), sub.shape)[0]
        offs = (np.arange(n_D) - x0 + n_D // 2) % n_D
        half = (offs >= n_D // 4) & (offs < n_D // 4 + n_D // 2)
        s_mask = np.zeros(chart.N_s, dtype=bool)
        s_mask[s_idx] = True
        mask = lat._along(half, 0, nd) & lat._along(s_mask, chart.s_axis, nd)
        mask = np.broadcast_to(mask, chart.shape)
        avg = float(np.sum((lam ** (1 + x) * w)[mask])) / float(np.sum(w[mask]))
        out.append((avg, float(lam[mask].max()) ** (1 + x)))
    return out


def moser_constant(lam: np.ndarray, chart: lat.LatticeChart, x: float = 1.0) -> float:
    """Calibrate k'_x = min over interior unit cylinders of average / max^{1+x}."""
    length = 1.0 / (2 * np.pi)
    starts = np.arange(1.0, chart.S - 1.0 - length, length)
    vals = [a / m for a, m in _unit_cylinders(lam, chart, starts, x) if m > 1e-12]
    return float(min(vals)) if vals else float("nan")


# calibrated once (8x8x48x8 chart, amp 2, seed 1: minimum 0.164) and frozen
MOSER_K_PRIME = 0.16


def moser_slab_check(
    lam: np.ndarray,
    chart: lat.LatticeChart,
    beta: float,
    eps: float = 0.5,
    x: float = 1.0,
    k_prime: float = MOSER_K_PRIME,
) -> dict:
    """int_{Sigma} lam^{1+x} >= k_{eps,x} delta+ L^{1+x}, k_{eps,x} = pi k' eps^{1+x} vol D."""
    s = chart.s_values()
    ell = slice_profile(lam, chart)
    L, S_t, _ = furthest_max(ell, s)
    if L < 1e-12:
        return {"ok": True, "vacuous": True, "margin": np.inf}
    dp = delta_plus(beta, L, eps)
    sel = (s >= S_t) & (s <= S_t + dp)
    w = chart.weights()
    lhs = float(np.sum((lam ** (1 + x) * w)[..., sel, :]))
    vol_D = chart.L_D ** (2 * chart.m)
    k = np.pi * k_prime * eps ** (1 + x) * vol_D
    rhs = k * dp * L ** (1 + x)
    return {
        "ok": lhs >= rhs,
        "vacuous": False,
        "lhs": lhs,
        "rhs": rhs,
        "margin": lhs / rhs if rhs > 0 else np.inf,
        "delta_plus": dp,
        "L": L,
        "cylinders": int(np.floor(2 * np.pi * dp)),
    }


def lp_interpolation_check(f: np.ndarray, weights: np.ndarray, p: float = 4 / 3, x: float = 1.0) -> dict:
    """||f||_p >= (k_p / F^x) ||f^{1+x}||_1 with k_p = Vol^{1/p - 1}."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("f must be non-negative")
    vol = float(np.sum(weights))
    F = float(f.max())
    lhs = float(np.sum(f**p * weights)) ** (1 / p)
    if F == 0:
        return {"ok": True, "lhs": 0.0, "rhs": 0.0}
    k_p = vol ** (1 / p - 1)
    rhs = k_p / F**x * float(np.sum(f ** (1 + x) * weights))
    return {"ok": lhs >= rhs * (1 - 1e-12), "lhs": lhs, "rhs": rhs, "k_p": k_p}


@dataclass
class ClaimReport:
    beta: float
    eps: float
    x: float
    constants: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    parabola_violations: int = 0

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "eps": self.eps,
            "x": self.x,
            "constants": self.constants,
            "parabola_violations": self.parabola_violations,
            "rows": self.rows,
        }


def slice_fhat_l2_sq(H: np.ndarray, chart: lat.LatticeChart) -> np.ndarray:
    """||F_hat_{t|z}||^2_{L2(D_z)} for every (s, alpha): torus-plane trace only."""
    Hinv = lat.hermitize(lat.inv(H))
    M = 0.0
    for p in range(chart.m):
        D = lat.d_hol(H, p, chart)
        M = M + 0.25 * lat.plane_laplacian(H, p, chart) - lat.dagger(D) @ Hinv @ D
    Fh = 2j * Hinv @ lat.hermitize(M)
    e = lat.e_hat(Fh)
    axes = tuple(range(2 * chart.m))
    return np.sum(e, axis=axes) * chart.h_D ** (2 * chart.m)


def slice_k_prime(H, H0, chart, p=4 / 3) -> float:
    """Measured k' in L ||F_hat||_2 >= k' (||lambda_bar||_p - 1) over slices with ||lambda_bar||_p > 1."""
    lam, L = lambda_bar(H, H0)
    f2 = np.sqrt(slice_fhat_l2_sq(H, chart))
    axes = tuple(range(2 * chart.m))
    lp = (np.sum(lam**p, axis=axes) * chart.h_D ** (2 * chart.m)) ** (1 / p)
    sel = lp > 1
    if not sel.any():
        return float("nan")
    return float(np.min(L * f2[sel] / (lp[sel] - 1)))


def claim_lower_bound(
    trace: FlowTrace,
    chart: lat.LatticeChart,
    H0: np.ndarray,
    eps: float = 0.5,
    x: float = 1.0,
    k_prime_moser: float = MOSER_K_PRIME,
) -> ClaimReport:
    """Slab energy over A_t = I_{eps,t} x S^1 against (c/2) mu(A_t) (1 - c'/L_t)^2."""
    beta = weak_laplacian_beta(trace)
    s = chart.s_values()
    vol_D = chart.L_D ** (2 * chart.m)
    k_half = np.pi * k_prime_moser * eps ** (1 + x) * vol_D
    k_p = vol_D ** (1 / (4 / 3) - 1)
    kps = [slice_k_prime(H, H0, chart) for _, H in trace.snapshots]
    kps = [k for k in kps if np.isfinite(k)]
    k1 = min(kps) if kps else float("nan")
    k2 = k1 * k_p
    c = (k2 * k_half / (np.sqrt(2) * np.pi)) ** 2
    c1 = k1 / (k2 * k_half) if np.isfinite(k1) else float("nan")
    c2 = 2 * np.pi * np.sqrt(1 / beta)
    rep = ClaimReport(beta=beta, eps=eps, x=x)
    rep.constants = {
        "k_prime_slice": k1,
        "k_p": k_p,
        "k_double_prime": k2,
        "k_eps_x": k_half,
        "c": float(c),
        "c_prime": float(c1),
        "c_double_prime": float(c2),
    }
    for t, H in trace.snapshots:
        lam, L = lambda_bar(H, H0)
        ell = slice_profile(lam, chart)
        par = parabola_check(ell, chart, beta)
        rep.parabola_violations += par["violations"]
        if L <= 0:
            rep.rows.append({"t": float(t), "L": 0.0, "lhs": 0.0, "rhs": float("nan"), "mu": 0.0, "active": False, "ratio": None})
            continue
        _, S_t, _ = furthest_max(ell, s)
        dp = delta_plus(beta, L, eps)
        sel = (s >= S_t) & (s <= S_t + dp)
        slab = slice_fhat_l2_sq(H, chart)
        lhs = float(np.sum(slab[sel, :]) * chart.h_s * chart.h_alpha)
        mu = 2 * np.pi * dp
        # the bound only carries content once L_t exceeds c'
        active = bool(np.isfinite(c1) and L > c1)
        rhs = float(0.5 * c * mu * (1 - c1 / L) ** 2) if active else float("nan")
        rep.rows.append(
            {
                "t": float(t),
                "L": float(L),
                "S_t": S_t,
                "delta_plus": float(dp),
                "mu": float(mu),
                "mu_over_c2_sqrtL": float(mu / (c2 * np.sqrt(L))),
                "lhs": lhs,
                "rhs": rhs,
                "active": active,
                "ratio": lhs / rhs if active and rhs > 0 else None,
            }
        )
    return rep


__all__ = [
    "EnergyReport",
    "ClaimReport",
    "chern_weil_report",
    "kahler_to_real",
    "lift_curvature",
    "hodge_riemann_sides",
    "hodge_riemann_check",
    "random_curvature",
    "energy_e",
    "lattice_energy",
    "weak_laplacian_beta",
    "weak_bound_check",
    "weak_max_principle_check",
    "bump",
    "bump_bank",
    "delta_plus",
    "parabola_check",
    "moser_constant",
    "moser_slab_check",
    "lp_interpolation_check",
    "claim_lower_bound",
    "slice_fhat_l2_sq",
    "MOSER_K_PRIME",
]
