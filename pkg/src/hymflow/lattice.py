"""Lattice model of a truncated asymptotically cylindrical Kahler manifold.

Sites live on T^{2m} x [0, S] x S^1.  Real axes are ordered
``(x1, y1, ..., xm, ym, s, alpha)``; complex direction ``p`` pairs axes
``2p`` and ``2p + 1``, so the tube coordinate is ``w = s + i alpha``.

Fields are numpy arrays whose leading axes are the grid and whose trailing
two axes hold r x r matrices:

* metric / endomorphism field: ``grid + (r, r)``
* one-form field: ``(n,) + grid + (r, r)``, one matrix per complex direction
* curvature field: ``(n, n) + grid + (r, r)``, ``F = sum F[j, k] dz^j ^ dzbar^k``

Metrics are written in a holomorphic frame, where the Dolbeault operator of
the bundle is the plain dbar.  A :class:`HolomorphicTwist` stores the complex
gauge ``g`` relating this frame to the unitary frame of the reference metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from ._validation import check_metric_field


@dataclass(frozen=True)
class LatticeChart:
    """Grid geometry. ``m`` is the complex dimension of the torus factor."""

    m: int = 1
    n_D: int = 16
    L_D: float = 2 * np.pi
    N_s: int = 64
    S: float = 8.0
    N_alpha: int = 16

    def __post_init__(self):
        if self.m not in (1, 2):
            raise ValueError("cross-section dimension m must be 1 or 2")
        if min(self.n_D, self.N_alpha) < 3 or self.N_s < 4:
            raise ValueError("grid too small")
        if self.L_D <= 0 or self.S <= 0:
            raise ValueError("lengths must be positive")

    @property
    def n(self) -> int:
        return self.m + 1

    @property
    def h_D(self) -> float:
        return self.L_D / self.n_D

    @property
    def h_s(self) -> float:
        # both ends are sites: N_s - 1 intervals
        return self.S / (self.N_s - 1)

    @property
    def h_alpha(self) -> float:
        return 2 * np.pi / self.N_alpha

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_D,) * (2 * self.m) + (self.N_s, self.N_alpha)

    @property
    def s_axis(self) -> int:
        return 2 * self.m

    @property
    def spacings(self) -> tuple[float, ...]:
        return (self.h_D,) * (2 * self.m) + (self.h_s, self.h_alpha)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.shape))

    def coords(self) -> list[np.ndarray]:
        """1-d coordinate arrays, one per real axis."""
        out = [np.arange(self.n_D) * self.h_D for _ in range(2 * self.m)]
        out.append(np.linspace(0.0, self.S, self.N_s))
        out.append(np.arange(self.N_alpha) * self.h_alpha)
        return out

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.coords(), indexing="ij")

    def s_values(self) -> np.ndarray:
        return np.linspace(0.0, self.S, self.N_s)

    def weights(self) -> np.ndarray:
        """Quadrature weights for dvol = omega^n / n! (trapezoid in s)."""
        ws = np.full(self.N_s, self.h_s)
        ws[0] = ws[-1] = 0.5 * self.h_s
        w = np.ones(self.shape) * self.h_D ** (2 * self.m) * self.h_alpha
        return w * _along(ws, self.s_axis, len(self.shape))

    def slice_weights(self) -> np.ndarray:
        """Weights on one cross-section D_z (torus only)."""
        return np.full((self.n_D,) * (2 * self.m), self.h_D ** (2 * self.m))

    def interior(self) -> tuple:
        """Index selecting sites strictly inside the Dirichlet slices."""
        idx = [slice(None)] * len(self.shape)
        idx[self.s_axis] = slice(1, self.N_s - 1)
        return tuple(idx)

    def cfl_dt(self, safety: float = 0.9) -> float:
        return safety * 0.5 / sum(1.0 / h**2 for h in self.spacings)


def _along(v, axis, ndim):
    shape = [1] * ndim
    shape[axis] = -1
    return np.reshape(v, shape)


def volume_normalization(n: int) -> float:
    """omega^n / n! is the Lebesgue measure; returns n! for bookkeeping."""
    return float(factorial(n))


# -- finite differences ---------------------------------------------------------


def diff(f: np.ndarray, axis: int, chart: LatticeChart, offset: int = 0) -> np.ndarray:
    """Central first derivative along a real axis.

    ``offset`` is the number of leading non-grid axes of ``f``.
    """
    ax = axis + offset
    h = chart.spacings[axis]
    if axis != chart.s_axis:
        return (np.roll(f, -1, ax) - np.roll(f, 1, ax)) / (2 * h)
    out = np.empty_like(f)
    sl = _slicer(f.ndim, ax)
    out[sl(1, -1)] = (f[sl(2, None)] - f[sl(0, -2)]) / (2 * h)
    out[sl(0, 1)] = (-3 * f[sl(0, 1)] + 4 * f[sl(1, 2)] - f[sl(2, 3)]) / (2 * h)
    out[sl(-1, None)] = (3 * f[sl(-1, None)] - 4 * f[sl(-2, -1)] + f[sl(-3, -2)]) / (2 * h)
    return out


def diff2(f: np.ndarray, axis: int, chart: LatticeChart, offset: int = 0) -> np.ndarray:
    """Compact three-point second derivative (one-sided at the s ends)."""
    ax = axis + offset
    h = chart.spacings[axis]
    if axis != chart.s_axis:
        return (np.roll(f, -1, ax) - 2 * f + np.roll(f, 1, ax)) / h**2
    out = np.empty_like(f)
    sl = _slicer(f.ndim, ax)
    out[sl(1, -1)] = (f[sl(2, None)] - 2 * f[sl(1, -1)] + f[sl(0, -2)]) / h**2
    out[sl(0, 1)] = (2 * f[sl(0, 1)] - 5 * f[sl(1, 2)] + 4 * f[sl(2, 3)] - f[sl(3, 4)]) / h**2
    out[sl(-1, None)] = (
        2 * f[sl(-1, None)] - 5 * f[sl(-2, -1)] + 4 * f[sl(-3, -2)] - f[sl(-4, -3)]
    ) / h**2
    return out


def _slicer(ndim, ax):
    def sl(a, b):
        idx = [slice(None)] * ndim
        idx[ax] = slice(a, b)
        return tuple(idx)

    return sl


def d_hol(f, p, chart, offset=0):
    """d/dz_p = (d/da - i d/db) / 2."""
    a, b = 2 * p, 2 * p + 1
    return 0.5 * (diff(f, a, chart, offset) - 1j * diff(f, b, chart, offset))


def d_antihol(f, p, chart, offset=0):
    """d/dzbar_p = (d/da + i d/db) / 2."""
    a, b = 2 * p, 2 * p + 1
    return 0.5 * (diff(f, a, chart, offset) + 1j * diff(f, b, chart, offset))


def plane_laplacian(f, p, chart, offset=0):
    return diff2(f, 2 * p, chart, offset) + diff2(f, 2 * p + 1, chart, offset)


def flat_laplacian(f, chart, offset=0):
    """Sum of compact second differences (negative spectrum)."""
    return sum(plane_laplacian(f, p, chart, offset) for p in range(chart.n))


def dd_bar(f, j, k, chart, offset=0):
    """d^2 f / dz_j dzbar_k; the diagonal uses the compact stencil."""
    if j == k:
        return 0.25 * plane_laplacian(f, j, chart, offset)
    return d_hol(d_antihol(f, k, chart, offset), j, chart, offset)


def kahler_laplacian(f: np.ndarray, chart: LatticeChart, offset: int = 0) -> np.ndarray:
    """2i Lambda dbar d on functions, i.e. minus the flat Laplacian."""
    return -flat_laplacian(f, chart, offset)


# -- matrix helpers ---------------------------------------------------------------


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B


def inv(A: np.ndarray) -> np.ndarray:
    if A.shape[-1] == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1.0 / A
    if A.shape[-1] != 2:
        return np.linalg.inv(A)
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 1, 1] = A[..., 0, 0]
    out[..., 0, 1] = -A[..., 0, 1]
    out[..., 1, 0] = -A[..., 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        return out / det[..., None, None]


def trace_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """tr(A B) per site."""
    return np.einsum("...ij,...ji->...", A, B)


def expm_real_spectrum(X: np.ndarray) -> np.ndarray:
    """exp of matrices with real spectrum (e.g. H^-1 Y with H > 0, Y Hermitian)."""
    r = X.shape[-1]
    if r != 2:
        w, V = np.linalg.eig(X)
        return matmul(V * np.exp(w.real)[..., None, :], np.linalg.inv(V))
    a = 0.5 * (X[..., 0, 0] + X[..., 1, 1])
    B = X - a[..., None, None] * np.eye(2)
    q = (B[..., 0, 0] ** 2 + B[..., 0, 1] * B[..., 1, 0]).real
    root = np.sqrt(np.maximum(q, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        sinhc = np.where(root > 1e-8, np.sinh(root) / np.where(root > 0, root, 1.0), 1.0 + q / 6.0)
    out = np.cosh(root)[..., None, None] * np.eye(2) + sinhc[..., None, None] * B
    return np.exp(a.real)[..., None, None] * out


def identity_field(chart: LatticeChart, rank: int) -> np.ndarray:
    return np.broadcast_to(np.eye(rank, dtype=complex), chart.shape + (rank, rank)).copy()


def _inverse(H: np.ndarray) -> np.ndarray:
    try:
        Hinv = inv(H)
    except np.linalg.LinAlgError:
        Hinv = None
    if Hinv is None or not np.all(np.isfinite(Hinv)):
        ev = np.linalg.eigvalsh(hermitize(H))
        bad = np.unravel_index(np.argmin(ev[..., 0]), ev.shape[:-1])
        raise ValueError(f"metric is singular at site {tuple(int(i) for i in bad)}")
    return hermitize(Hinv)


def _require_positive(H):
    ev = np.linalg.eigvalsh(hermitize(H))[..., 0]
    if np.any(~(ev > 0)):
        bad = np.unravel_index(np.argmin(np.where(np.isfinite(ev), ev, -np.inf)), ev.shape)
        raise ValueError(f"metric is not positive definite at site {tuple(int(i) for i in bad)}")


# -- twist -----------------------------------------------------------------------


def envelope(s: np.ndarray, decay: float = 1.0, width: float = 1.0) -> np.ndarray:
    """e^{-decay s} (1 - e^{-(s/width)^2}); flat to second order at s = 0."""
    return np.exp(-decay * s) * (1.0 - np.exp(-((s / width) ** 2)))


@dataclass(frozen=True)
class HolomorphicTwist:
    """dbar_a = dbar + a with a = g^{-1} dbar g on the trivial bundle."""

    chart: LatticeChart
    gauge: np.ndarray
    a: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.gauge.shape[-1]

    def reference_metric(self) -> np.ndarray:
        """H0 = (g g^dagger)^{-1} in the holomorphic frame."""
        return hermitize(np.linalg.inv(self.gauge @ dagger(self.gauge)))

    def to_holomorphic(self, H: np.ndarray) -> np.ndarray:
        """Metric in the twist frame -> holomorphic frame: g^{-dag} H g^{-1}."""
        ginv = np.linalg.inv(self.gauge)
        return hermitize(dagger(ginv) @ H @ ginv)

    def from_holomorphic(self, H: np.ndarray) -> np.ndarray:
        return hermitize(dagger(self.gauge) @ H @ self.gauge)

    def integrability_residual(self) -> float:
        """max |dbar a + a ^ a| over sites and direction pairs."""
        worst = 0.0
        n = self.chart.n
        for j in range(n):
            for k in range(j + 1, n):
                r = (
                    d_antihol(self.a[k], j, self.chart)
                    - d_antihol(self.a[j], k, self.chart)
                    + self.a[j] @ self.a[k]
                    - self.a[k] @ self.a[j]
                )
                worst = max(worst, float(np.abs(r).max()))
        return worst


def _profile(chart: LatticeChart, rng: np.random.Generator, modes: int = 2) -> np.ndarray:
    """Smooth periodic function of the torus and alpha coordinates."""
    grid = chart.mesh()
    out = np.ones(chart.shape)
    periodic = [ax for ax in range(len(chart.shape)) if ax != chart.s_axis]
    for _ in range(modes):
        phase = rng.uniform(0, 2 * np.pi)
        arg = phase
        for ax in periodic:
            period = chart.L_D if ax < chart.s_axis else 2 * np.pi
            arg = arg + rng.integers(-1, 2) * 2 * np.pi * grid[ax] / period
        out = out + 0.5 * rng.uniform(0.5, 1.0) * np.cos(arg)
    return out


def make_twist(
    chart: LatticeChart,
    rank: int = 2,
    amp: float = 0.5,
    decay: float = 1.0,
    width: float = 1.0,
    seed: int = 0,
    det_one: bool = False,
) -> HolomorphicTwist:
    """Seeded twist g = exp(amp env(s) phi N) with N a random r x r matrix."""
    rng = np.random.default_rng(seed)
    N = rng.normal(size=(rank, rank)) + 1j * rng.normal(size=(rank, rank))
    N /= np.linalg.norm(N, 2)
    if det_one:
        N -= np.trace(N) / rank * np.eye(rank)
    grid = chart.mesh()
    env = envelope(grid[chart.s_axis], decay, width)
    coeff = amp * env * _profile(chart, rng)
    # exp(c N) via eigen-decomposition of N (generic N is diagonalizable)
    w, V = np.linalg.eig(N)
    Vinv = np.linalg.inv(V)
    expd = np.exp(coeff[..., None] * w)
    g = np.einsum("ij,...j,jk->...ik", V, expd, Vinv)
    a = np.stack([np.linalg.solve(g, d_antihol(g, k, chart)) for k in range(chart.n)])
    params = dict(rank=rank, amp=amp, decay=decay, width=width, seed=seed, det_one=det_one)
    return HolomorphicTwist(chart, g, a, params)


def trivial_twist(chart: LatticeChart, rank: int) -> HolomorphicTwist:
    g = identity_field(chart, rank)
    a = np.zeros((chart.n,) + g.shape, dtype=complex)
    return HolomorphicTwist(chart, g, a, dict(rank=rank, amp=0.0))


# -- Dolbeault operators and curvature ------------------------------------------


def dolbeault(
    field: np.ndarray,
    chart: LatticeChart,
    twist: HolomorphicTwist | None = None,
    conjugate: bool = False,
) -> np.ndarray:
    """dbar_a (or its conjugate d) of an endomorphism field, per direction."""
    op = d_hol if conjugate else d_antihol
    out = np.stack([op(field, k, chart) for k in range(chart.n)])
    if twist is not None:
        for k in range(chart.n):
            ak = dagger(twist.a[k]) if conjugate else twist.a[k]
            sign = -1 if conjugate else 1
            out[k] += sign * (ak @ field - field @ ak)
    return out


def lambda_contract(F: np.ndarray) -> np.ndarray:
    """Lambda_omega F with Lambda(dz^j ^ dzbar^k) = -2i delta_jk, so Lambda omega = n."""
    n = F.shape[0]
    return -2j * sum(F[j, j] for j in range(n))


def kahler_form_field(chart: LatticeChart, rank: int) -> np.ndarray:
    """omega (x) Id as a curvature-shaped field: omega = (i/2) sum dz^j ^ dzbar^j."""
    n = chart.n
    F = np.zeros((n, n) + chart.shape + (rank, rank), dtype=complex)
    for j in range(n):
        F[j, j] = 0.5j * np.eye(rank)
    return F


def _holo_curvature(H, chart):
    r = H.shape[-1]
    n = chart.n
    if r == 1:
        u = np.log(H[..., 0, 0].real)
        F = np.empty((n, n) + chart.shape + (1, 1), dtype=complex)
        for j in range(n):
            for k in range(n):
                F[j, k, ..., 0, 0] = -dd_bar(u, j, k, chart)
        return F
    Hinv = _inverse(H)
    D = [d_hol(H, j, chart) for j in range(n)]
    F = np.empty((n, n) + H.shape, dtype=complex)
    for j in range(n):
        for k in range(n):
            # F_jk = H^-1 (dbar_k H) H^-1 (d_j H) - H^-1 d_j dbar_k H
            Dbk = dagger(D[k])
            F[j, k] = matmul(Hinv, matmul(Dbk, matmul(Hinv, D[j])) - dd_bar(H, j, k, chart))
    return F


def curvature(
    H: np.ndarray, chart: LatticeChart, twist: HolomorphicTwist | None = None
) -> np.ndarray:
    """Chern curvature of (dbar_a, H).

    Without a twist ``H`` is read in the holomorphic frame.  With a twist it is
    read in the twist frame and the result is conjugated back to that frame.
    """
    _require_positive(H)
    if twist is None:
        return _holo_curvature(H, chart)
    g = twist.gauge
    F = _holo_curvature(twist.to_holomorphic(H), chart)
    return np.linalg.solve(g, F @ g)


def mean_curvature_form(H: np.ndarray, chart: LatticeChart) -> np.ndarray:
    """M = (1/4) lap H - sum_j (dbar_j H) H^-1 (d_j H), Hermitian.

    The contracted curvature is F_hat = 2i H^-1 M.
    """
    Hinv = _inverse(H)
    M = 0.25 * flat_laplacian(H, chart)
    for j in range(chart.n):
        D = d_hol(H, j, chart)
        M = M - matmul(dagger(D), matmul(Hinv, D))
    return hermitize(M)


def hat_curvature(H: np.ndarray, chart: LatticeChart) -> np.ndarray:
    """F_hat = Lambda F_H in the holomorphic frame (same as lambda_contract(curvature))."""
    if H.shape[-1] == 1:
        u = np.log(H[..., 0, 0].real)
        return (0.5j * flat_laplacian(u, chart))[..., None, None]
    return 2j * matmul(_inverse(H), mean_curvature_form(H, chart))


def e_hat(F_hat: np.ndarray) -> np.ndarray:
    """|F_hat|^2_H = tr((i F_hat)^2), real and non-negative."""
    return -trace_product(F_hat, F_hat).real


def curvature_norm_sq(F: np.ndarray, H: np.ndarray) -> np.ndarray:
    """|F|^2_H = 4 sum_jk |F_jk|^2_H with |A|^2_H = tr(A H^-1 A^dag H)."""
    Hinv = _inverse(H)
    n = F.shape[0]
    out = 0.0
    for j in range(n):
        for k in range(n):
            A = F[j, k]
            out = out + trace_product(matmul(A, matmul(Hinv, dagger(A))), H).real
    return 4 * out


def chern_weil_density(F: np.ndarray) -> np.ndarray:
    """Coefficient of dvol in tr(F ^ F) ^ omega^{n-2}.

    For n = 2 this is tr F^2 / dvol; the general case follows the same
    Hodge-Riemann bookkeeping (see :mod:`hymflow.diagnostics`).
    """
    n = F.shape[0]
    total = 0.0
    for j in range(n):
        for k in range(n):
            total = total + trace_product(F[j, j], F[k, k])
            total = total - trace_product(F[j, k], F[k, j])
    return (-4.0 * factorial(n - 2) * total).real


# -- integration by parts -----------------------------------------------------------


def forward_gradient(f: np.ndarray, axis: int, chart: LatticeChart) -> np.ndarray:
    h = chart.spacings[axis]
    if axis != chart.s_axis:
        return (np.roll(f, -1, axis) - f) / h
    return np.diff(f, axis=axis) / h


def integration_by_parts_residual(f: np.ndarray, g: np.ndarray, chart: LatticeChart) -> float:
    """|<-lap f, g> - (<grad f, grad g> - boundary flux)| over interior sites.

    With the compact Laplacian and forward differences summation by parts is
    exact.  The flux is g df/ds at s = S minus the same at s = 0, using the
    one-sided link differences.
    """
    ax = chart.s_axis
    dvol = chart.h_D ** (2 * chart.m) * chart.h_alpha * chart.h_s
    inner = chart.interior()
    lhs = np.sum(kahler_laplacian(f, chart)[inner] * np.conj(g[inner])) * dvol
    rhs = 0.0
    for axis in range(len(chart.shape)):
        prod = forward_gradient(f, axis, chart) * np.conj(forward_gradient(g, axis, chart))
        rhs += np.sum(prod if axis == ax else prod[inner]) * dvol
    dfs = forward_gradient(f, ax, chart)
    area = dvol / chart.h_s
    flux = np.sum(np.take(dfs, -1, axis=ax) * np.conj(np.take(g, -1, axis=ax)))
    flux -= np.sum(np.take(dfs, 0, axis=ax) * np.conj(np.take(g, 0, axis=ax)))
    return float(abs(lhs - (rhs - flux * area)))


__all__ = [
    "LatticeChart",
    "HolomorphicTwist",
    "make_twist",
    "trivial_twist",
    "envelope",
    "diff",
    "diff2",
    "d_hol",
    "d_antihol",
    "dd_bar",
    "flat_laplacian",
    "kahler_laplacian",
    "dolbeault",
    "lambda_contract",
    "curvature",
    "hat_curvature",
    "mean_curvature_form",
    "e_hat",
    "curvature_norm_sq",
    "kahler_form_field",
    "identity_field",
    "matmul",
    "inv",
    "trace_product",
    "expm_real_spectrum",
    "hermitize",
    "dagger",
    "forward_gradient",
    "integration_by_parts_residual",
    "check_metric_field",
]
