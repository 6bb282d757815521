"""Input checks shared by the flow estimator and the lattice operators."""

from __future__ import annotations

import numpy as np


def check_metric_field(H, det_one: bool = False, tol: float = 1e-12) -> np.ndarray:
    """Validate a field of positive-definite Hermitian matrices.

    Returns ``H`` as a complex array; raises ValueError naming the first bad site.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise ValueError("metric field must end in square r x r matrices")
    if not np.all(np.isfinite(H)):
        bad = np.argwhere(~np.isfinite(H))[0][:-2]
        raise ValueError(f"non-finite metric entry at site {tuple(int(i) for i in bad)}")
    herm = np.abs(H - np.conj(np.swapaxes(H, -1, -2))).max(axis=(-1, -2))
    scale = np.maximum(1.0, np.abs(H).max(axis=(-1, -2)))
    if np.any(herm > tol * scale):
        bad = np.unravel_index(np.argmax(herm / scale), herm.shape)
        raise ValueError(f"metric not Hermitian at site {tuple(int(i) for i in bad)}")
    ev = np.linalg.eigvalsh(H)[..., 0]
    if np.any(ev <= 0):
        bad = np.unravel_index(np.argmin(ev), ev.shape)
        raise ValueError(f"metric not positive definite at site {tuple(int(i) for i in bad)}")
    if det_one:
        det = np.linalg.det(H).real
        if np.any(np.abs(det - 1) > 1e-10):
            bad = np.unravel_index(np.argmax(np.abs(det - 1)), det.shape)
            raise ValueError(f"det H != 1 at site {tuple(int(i) for i in bad)}")
    return H


def check_positive(name: str, value) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_fraction(name: str, value) -> float:
    value = float(value)
    if not 0 < value <= 1:
        raise ValueError(f"{name} must lie in (0, 1], got {value}")
    return value


def check_same_shape(A, B):
    if np.shape(A) != np.shape(B):
        raise ValueError(f"shape mismatch: {np.shape(A)} vs {np.shape(B)}")
