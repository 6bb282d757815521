"""Heat kernel of the flat periodic lattice, built by stepping a delta.

Each step is the lazy walk K <- K + nu * (graph Laplacian of K) with
nu = dt / h^2, so K stays non-negative and sums to one; nothing cancels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KernelSeries:
    times: np.ndarray
    kernels: list  # densities K(x, 0; t) on the lattice
    h: float
    dim: int

    def diagonal(self) -> np.ndarray:
        return np.array([K[(0,) * self.dim] for K in self.kernels])

    def radius_sq(self) -> np.ndarray:
        shape = self.kernels[0].shape
        r2 = 0.0
        for ax, N in enumerate(shape):
            d = np.minimum(np.arange(N), N - np.arange(N)) * self.h
            r2 = r2 + d.reshape([-1 if i == ax else 1 for i in range(len(shape))]) ** 2
        return r2


def lattice_heat_kernel(
    size: int = 128,
    dim: int = 2,
    h: float = 1.0,
    nu: float = 0.125,
    t_max: float = 20.0,
    t_min: float = 2.0,
    samples: int = 16,
) -> KernelSeries:
    """Kernels at ``samples`` log-spaced times in [t_min, t_max]."""
    if not 0 < nu <= 0.5 / dim:
        raise ValueError(f"nu must lie in (0, {0.5 / dim}] for a positive walk")
    dt = nu * h * h
    steps = np.unique(np.round(np.geomspace(t_min, t_max, samples) / dt).astype(int))
    p = np.zeros((size,) * dim)
    p[(0,) * dim] = 1.0
    kernels = []
    done = 0
    for k in steps:
        for _ in range(k - done):
            lap = -2 * dim * p
            for ax in range(dim):
                lap = lap + np.roll(p, 1, ax) + np.roll(p, -1, ax)
            p = p + nu * lap
        done = k
        kernels.append(p / h**dim)
    return KernelSeries(times=steps * dt, kernels=kernels, h=h, dim=dim)


def diagonal_exponent(series: KernelSeries) -> float:
    """Least-squares slope of log K(0, 0; t) against log t."""
    slope, _ = np.polyfit(np.log(series.times), np.log(series.diagonal()), 1)
    return float(slope)


def gaussian_envelope(series: KernelSeries, C: float = 5.0) -> dict:
    """Fit C0 = max_t K(0,0;t) t^{dim/2} and test K <= C0 t^{-dim/2} exp(-r^2 / (C t))."""
    half = series.dim / 2
    C0 = float(np.max(series.diagonal() * series.times**half))
    r2 = series.radius_sq()
    worst = -np.inf
    for t, K in zip(series.times, series.kernels):
        # compare in logs; the bound underflows far out
        log_bound = np.log(C0) - half * np.log(t) - r2 / (C * t)
        pos = K > 0
        if np.any(K < 0):
            return {"C0": C0, "C": C, "worst_ratio": np.inf, "ok": False}
        worst = max(worst, float(np.max(np.log(K[pos]) - log_bound[pos])))
    ratio = float(np.exp(min(worst, 700.0)))
    return {"C0": C0, "C": C, "worst_ratio": ratio, "ok": worst <= 1e-12}


def heat_kernel_diag_check(size: int = 128, dim: int = 2, C: float = 5.0, tol: float = 0.1) -> dict:
    series = lattice_heat_kernel(size=size, dim=dim)
    slope = diagonal_exponent(series)
    env = gaussian_envelope(series, C=C)
    target = -dim / 2
    return {
        "slope": slope,
        "target": target,
        "slope_ok": abs(slope - target) <= tol * abs(target),
        "decade": (float(series.times[0]), float(series.times[-1])),
        **env,
        "ok": abs(slope - target) <= tol * abs(target) and env["ok"],
    }


__all__ = [
    "KernelSeries",
    "lattice_heat_kernel",
    "diagonal_exponent",
    "gaussian_envelope",
    "heat_kernel_diag_check",
]
