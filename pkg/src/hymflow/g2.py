"""The G2 3-form on R^7 and the structures it induces.

Exact computations use :mod:`hymflow.exterior`. The float matrices at the
bottom (``t_matrix``, ``l_matrix`` ...) are the same linear maps in the
sorted 2-form basis, for use on numerical endomorphism-valued fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .exterior import (
    DIM,
    TOP,
    ExteriorElement,
    basis_monomials,
    contract,
    from_vector,
    hodge_star,
    to_vector,
    wedge,
    wedge_all,
)

E = ExteriorElement.basis


def _e(*idx):
    return E(*idx)


PHI0 = (
    wedge(_e(1, 2) - _e(3, 4), _e(5))
    + wedge(_e(1, 3) - _e(4, 2), _e(6))
    + wedge(_e(1, 4) - _e(2, 3), _e(7))
    + _e(5, 6, 7)
)

STAR_PHI0 = (
    wedge(_e(3, 4) - _e(1, 2), _e(6, 7))
    + wedge(_e(4, 2) - _e(1, 3), _e(7, 5))
    + wedge(_e(2, 3) - _e(1, 4), _e(5, 6))
    + _e(1, 2, 3, 4)
)

VOLUME = _e(*TOP)


def unit_vector(i: int) -> tuple[Fraction, ...]:
    """Standard basis vector v_i, 1-based."""
    return tuple(Fraction(int(k == i)) for k in range(1, DIM + 1))


def _vec(x) -> tuple[Fraction, ...]:
    x = tuple(Fraction(c) for c in x)
    if len(x) != DIM:
        raise ValueError("vector must have 7 components")
    return x


def alpha(i: int) -> ExteriorElement:
    """The 2-form v_i _| phi0; these span the self-dual 2-forms."""
    return contract(unit_vector(i), PHI0)


def cross(a, b) -> tuple[Fraction, ...]:
    """Cross product read off from phi0(a, b, .) with the Euclidean metric."""
    one_form = contract(_vec(b), contract(_vec(a), PHI0))
    return tuple(one_form.coeff(k) for k in range(1, DIM + 1))


def _inner(a, b) -> Fraction:
    return sum((x * y for x, y in zip(_vec(a), _vec(b))), Fraction(0))


def _raw_metric(a, b) -> Fraction:
    top = wedge_all(contract(_vec(a), PHI0), contract(_vec(b), PHI0), PHI0)
    return top.coeff(*TOP)


# (v1 _| phi0) ^ (v1 _| phi0) ^ phi0 = METRIC_NORMALIZATION * e^{1..7}
METRIC_NORMALIZATION = _raw_metric(unit_vector(1), unit_vector(1))


# The raw wedge is negative on (v1, v1): phi0 induces the orientation
# -e^{1..7}, and T below uses the star of that orientation.
ORIENTATION = 1 if METRIC_NORMALIZATION > 0 else -1


def metric_from_phi(a, b) -> Fraction:
    return _raw_metric(a, b) / METRIC_NORMALIZATION


def t_map_trace(a, b) -> Fraction:
    """Trace of v -> a x (b x v) over the standard basis."""
    total = Fraction(0)
    for k in range(1, DIM + 1):
        image = cross(a, cross(b, unit_vector(k)))
        total += image[k - 1]
    return total


def octonion_mul(a, b) -> tuple[Fraction, tuple[Fraction, ...]]:
    """Product of imaginary octonions as (real part, imaginary part)."""
    return t_map_trace(a, b) / 6, cross(a, b)


def _octonion_full_mul(x, y):
    """Product in O = R + Im O, with elements given as (real, vec7)."""
    xr, xv = x
    yr, yv = y
    sr, vv = octonion_mul(xv, yv)
    real = xr * yr + sr
    vec = tuple(xr * b + yr * a + c for a, b, c in zip(xv, yv, vv))
    return real, vec


def t_map(eta: ExteriorElement) -> ExteriorElement:
    """The equivariant map eta -> *(eta ^ phi0) on 2-forms.

    The star is taken in the orientation induced by phi0, so the
    eigenvalues are +2 on span(alpha_i) and -1 on its complement.
    """
    return hodge_star(wedge(eta, PHI0)) * ORIENTATION


def _require_degree(eta: ExteriorElement, p: int):
    if not eta.is_zero() and eta.degree != p:
        raise ValueError(f"expected a {p}-form, got degree {eta.degree}")


@dataclass(frozen=True)
class TwoFormSplit:
    plus: ExteriorElement
    minus: ExteriorElement


def t_eigen_split(eta: ExteriorElement) -> TwoFormSplit:
    """Split a 2-form into its +2 (self-dual) and -1 (anti-self-dual) parts."""
    _require_degree(eta, 2)
    t_eta = t_map(eta)
    plus = (t_eta + eta) * Fraction(1, 3)
    minus = (eta * 2 - t_eta) * Fraction(1, 3)
    return TwoFormSplit(plus, minus)


def project_plus_L(eta: ExteriorElement) -> ExteriorElement:
    """eta ^ *phi0, which kills the anti-self-dual part."""
    _require_degree(eta, 2)
    return wedge(eta, STAR_PHI0)


# -- Kahler data on C^3 x S^1 ------------------------------------------------

# coordinate slots (x1, y1, x2, y2, x3, y3, theta) -> 1..7
COORDS = ("x1", "y1", "x2", "y2", "x3", "y3", "theta")
_SLOT = {name: i + 1 for i, name in enumerate(COORDS)}

# e^1 = dx2, e^2 = dx3, e^3 = dy2, e^4 = dy3, e^5 = dy1, e^6 = dtheta, e^7 = dx1
KAHLER_FRAME = {"x2": 1, "x3": 2, "y2": 3, "y3": 4, "y1": 5, "theta": 6, "x1": 7}


def _d(name: str) -> ExteriorElement:
    return E(_SLOT[name])


def standard_kahler_data():
    """(omega, Re Omega, Im Omega) at a point, in coordinate slots.

    omega = sum dx^i ^ dy^i, Omega = dz^1 ^ dz^2 ^ dz^3.
    """
    omega = _d("x1") ^ _d("y1")
    omega = omega + (_d("x2") ^ _d("y2")) + (_d("x3") ^ _d("y3"))
    # complex forms as (re, im) pairs
    re, im = ExteriorElement.scalar(1), ExteriorElement.zero()
    for j in (1, 2, 3):
        dx, dy = _d(f"x{j}"), _d(f"y{j}")
        re, im = wedge(re, dx) - wedge(im, dy), wedge(re, dy) + wedge(im, dx)
    return omega, re, im


def relabel(form: ExteriorElement, frame: dict[str, int] = KAHLER_FRAME) -> ExteriorElement:
    """Rewrite a form from coordinate slots into the e^1..e^7 frame."""
    slot_to_e = {_SLOT[name]: idx for name, idx in frame.items()}
    return ExteriorElement(
        {tuple(slot_to_e[i] for i in key): val for key, val in form.terms.items()}
    )


def lift_kahler_structure(omega=None, Omega_re=None, Omega_im=None, frame=KAHLER_FRAME):
    """phi = omega ^ dtheta + Im Omega and its dual, written in the e-frame."""
    std = standard_kahler_data()
    omega = std[0] if omega is None else omega
    Omega_re = std[1] if Omega_re is None else Omega_re
    Omega_im = std[2] if Omega_im is None else Omega_im
    dtheta = _d("theta")
    phi = wedge(omega, dtheta) + Omega_im
    star_phi = wedge(omega, omega) * Fraction(1, 2) - wedge(Omega_re, dtheta)
    return relabel(phi, frame), relabel(star_phi, frame)


# -- float versions of the linear maps -----------------------------------------

BASIS2 = basis_monomials(2)
BASIS6 = basis_monomials(6)


@lru_cache(maxsize=None)
def _matrices():
    t = np.zeros((21, 21))
    lmat = np.zeros((7, 21))
    pair = np.zeros((21, 21))
    for j, key in enumerate(BASIS2):
        b = ExteriorElement.basis(*key)
        t[:, j] = [float(c) for c in to_vector(t_map(b), 2)]
        lmat[:, j] = [float(c) for c in to_vector(project_plus_L(b), 6)]
        for i, key2 in enumerate(BASIS2):
            pair[i, j] = float(wedge_all(ExteriorElement.basis(*key2), b, PHI0).coeff(*TOP))
    return t, lmat, pair


def t_matrix() -> np.ndarray:
    """T on 2-forms, 21x21 in the sorted basis."""
    return _matrices()[0].copy()


def l_matrix() -> np.ndarray:
    """eta -> eta ^ *phi0, 6-form coordinates (7x21)."""
    return _matrices()[1].copy()


def phi_pairing() -> np.ndarray:
    """B[i, j] = coefficient of e^{1..7} in b_i ^ b_j ^ phi0."""
    return _matrices()[2].copy()


def plus_projector() -> np.ndarray:
    t = _matrices()[0]
    return (t + np.eye(21)) / 3.0


def minus_projector() -> np.ndarray:
    t = _matrices()[0]
    return (2.0 * np.eye(21) - t) / 3.0


def as_endo_array(F) -> np.ndarray:
    """Coerce an endomorphism-valued 2-form to a (21, r, r) complex array.

    Accepts a scalar 2-form, an r x r nested list of 2-forms, or an array.
    """
    if isinstance(F, ExteriorElement):
        _require_degree(F, 2)
        return np.array([float(c) for c in to_vector(F, 2)], dtype=complex)[:, None, None]
    if isinstance(F, (list, tuple)) and F and isinstance(F[0], (list, tuple)):
        r = len(F)
        out = np.zeros((21, r, r), dtype=complex)
        for i in range(r):
            for j in range(r):
                _require_degree(F[i][j], 2)
                out[:, i, j] = [float(c) for c in to_vector(F[i][j], 2)]
        return out
    arr = np.asarray(F, dtype=complex)
    if arr.shape[0] != 21:
        raise ValueError("2-form arrays need 21 leading components")
    if arr.ndim == 1:
        arr = arr[:, None, None]
    return arr


def instanton_residual(F) -> float:
    """Norm of F ^ *phi0; zero exactly when the self-dual part of F vanishes."""
    if isinstance(F, ExteriorElement):
        six = project_plus_L(F)
        return float(sum(v * v for v in six.terms.values())) ** 0.5
    if isinstance(F, (list, tuple)) and F and isinstance(F[0], (list, tuple)):
        total = Fraction(0)
        for row in F:
            for entry in row:
                six = project_plus_L(entry)
                total += sum(v * v for v in six.terms.values())
        return float(total) ** 0.5
    arr = as_endo_array(F)
    six = np.einsum("ij,j...->i...", _matrices()[1], arr)
    return float(np.sqrt(np.sum(np.abs(six) ** 2)))


def kahler_two_form_to_frame(coords: np.ndarray) -> np.ndarray:
    """Map 2-form coefficients from coordinate slots to the e-frame basis.

    ``coords`` has leading axis 21 indexed by sorted slot pairs.
    """
    out = np.zeros_like(coords)
    slot_to_e = {_SLOT[name]: idx for name, idx in KAHLER_FRAME.items()}
    pos = {key: n for n, key in enumerate(BASIS2)}
    for n, (a, b) in enumerate(BASIS2):
        ea, eb = slot_to_e[a], slot_to_e[b]
        sign = 1 if ea < eb else -1
        out[pos[tuple(sorted((ea, eb)))]] += sign * coords[n]
    return out


__all__ = [
    "identity_table",
    "PHI0",
    "STAR_PHI0",
    "VOLUME",
    "METRIC_NORMALIZATION",
    "ORIENTATION",
    "TwoFormSplit",
    "alpha",
    "cross",
    "metric_from_phi",
    "t_map",
    "t_map_trace",
    "octonion_mul",
    "t_eigen_split",
    "project_plus_L",
    "lift_kahler_structure",
    "standard_kahler_data",
    "instanton_residual",
    "t_matrix",
    "l_matrix",
    "phi_pairing",
    "plus_projector",
    "minus_projector",
    "unit_vector",
    "from_vector",
]


# -- identity table ------------------------------------------------------------------


def _hat(i: int) -> ExteriorElement:
    return E(*(k for k in TOP if k != i))


def _t_rational() -> "sp.Matrix":
    import sympy as sp

    cols = [to_vector(t_map(E(*key)), 2) for key in BASIS2]
    return sp.Matrix(21, 21, lambda r, c: sp.Rational(cols[c][r].numerator, cols[c][r].denominator))


def identity_table() -> list[dict]:
    """Exact checks of the algebraic identities.

    Rows with ``required=False`` compare against the alternative normalisation
    (no factor 3 in L alpha_i, unsigned dual form in the Kahler lift); they are
    reported but do not decide the outcome.
    """
    import sympy as sp

    rows = []

    def add(name, ok, required=True, detail=""):
        rows.append({"identity": name, "ok": bool(ok), "required": required, "detail": detail})

    T = _t_rational()
    I21 = sp.eye(21)
    dim_plus = 21 - (T - 2 * I21).rank()
    dim_minus = 21 - (T + I21).rank()
    add("T eigenspaces (+2, -1) have dimensions (7, 14)", (dim_plus, dim_minus) == (7, 14), detail=f"{dim_plus}/{dim_minus}")
    add("T^2 = T + 2", T * T == T + 2 * I21)
    add("T alpha_i = 2 alpha_i", all(t_map(alpha(i)) == alpha(i) * 2 for i in TOP))
    pairs = [(unit_vector(a), unit_vector(b)) for a in TOP for b in TOP]
    add(
        "6 <a,b> = -tr T_ab on all 49 basis pairs",
        all(6 * metric_from_phi(a, b) == -t_map_trace(a, b) for a, b in pairs),
    )
    add("phi0 ^ *phi0 = 7 e^1..7", wedge(PHI0, STAR_PHI0) == VOLUME * 7)
    add("*phi0 is the Hodge dual of phi0", hodge_star(PHI0) == STAR_PHI0)
    signed = all(
        project_plus_L(alpha(i)) == _hat(i) * (3 * (-1) ** (i - 1)) for i in TOP
    )
    add("alpha_i ^ *phi0 = 3 (-1)^(i-1) e^(1..i^..7)", signed)
    add(
        "alpha_i ^ *phi0 = e^(1..i^..7)",
        all(project_plus_L(alpha(i)) == _hat(i) for i in TOP),
        required=False,
        detail="differs by the factor 3 (-1)^(i-1)",
    )
    phi, star_phi = lift_kahler_structure()
    add("omega ^ dtheta + Im Omega = phi0", phi == PHI0)
    add("1/2 omega^2 - Re Omega ^ dtheta = -*phi0", star_phi == -STAR_PHI0)
    add(
        "1/2 omega^2 - Re Omega ^ dtheta = *phi0",
        star_phi == STAR_PHI0,
        required=False,
        detail="equal up to sign",
    )
    return rows
