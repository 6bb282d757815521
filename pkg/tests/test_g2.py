from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from hymflow import g2
from hymflow.exterior import ExteriorElement, hodge_star, wedge

E = ExteriorElement.basis
V = [g2.unit_vector(i) for i in range(1, 8)]


def test_orientation_from_phi():
    # (v1 _| phi0)^2 ^ phi0 is -6 e^1..7 for the printed phi0
    assert g2.METRIC_NORMALIZATION == -6
    assert g2.ORIENTATION == -1


def test_induced_metric_is_euclidean():
    for i, j in product(range(7), repeat=2):
        assert g2.metric_from_phi(V[i], V[j]) == int(i == j)


def test_cross_product_norm_and_orthogonality():
    # float oracle: |a x b|^2 = |a|^2 |b|^2 - <a,b>^2 and a x b is orthogonal to both
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = [Fraction(int(x)) for x in rng.integers(-3, 4, 7)]
        b = [Fraction(int(x)) for x in rng.integers(-3, 4, 7)]
        c = g2.cross(a, b)
        dot = lambda u, v: sum(x * y for x, y in zip(u, v))
        assert dot(c, c) == dot(a, a) * dot(b, b) - dot(a, b) ** 2
        assert dot(c, a) == 0 and dot(c, b) == 0


def test_octonions_normed_and_alternative():
    rng = np.random.default_rng(1)
    norm = lambda x: x[0] ** 2 + sum(v * v for v in x[1])
    for _ in range(5):
        x = (Fraction(int(rng.integers(-2, 3))), tuple(Fraction(int(v)) for v in rng.integers(-2, 3, 7)))
        y = (Fraction(int(rng.integers(-2, 3))), tuple(Fraction(int(v)) for v in rng.integers(-2, 3, 7)))
        assert norm(g2._octonion_full_mul(x, y)) == norm(x) * norm(y)
        assert g2._octonion_full_mul(x, g2._octonion_full_mul(x, y)) == g2._octonion_full_mul(
            g2._octonion_full_mul(x, x), y
        )


def test_imaginary_square_is_minus_norm():
    a = (1, 2, 0, 0, -1, 0, 3)
    real, vec = g2.octonion_mul(a, a)
    assert real == -15 and all(v == 0 for v in vec)


def test_t_spectrum_float_oracle():
    w = np.sort(np.linalg.eigvals(g2.t_matrix()).real)
    assert np.allclose(w[:14], -1) and np.allclose(w[14:], 2)


def test_t_quadratic_relation():
    T = g2.t_matrix()
    assert np.allclose(T @ T, T + 2 * np.eye(21))


def test_alpha_in_plus_eigenspace():
    for i in range(1, 8):
        assert g2.t_map(g2.alpha(i)) == g2.alpha(i) * 2


def test_split_of_e12_minus_e34():
    # e12 - e34 is not anti-self-dual: alpha_5 = e12 - e34 + e67 carries part of it
    eta = E(1, 2) - E(3, 4)
    split = g2.t_eigen_split(eta)
    assert split.plus == g2.alpha(5) * Fraction(2, 3)
    assert split.minus == (E(1, 2) - E(3, 4) - E(6, 7) * 2) * Fraction(1, 3)
    assert g2.t_map(split.minus) == -split.minus


def test_e12_minus_e34_plus_2e67_is_anti_self_dual():
    eta = E(1, 2) - E(3, 4) - E(6, 7) * 2
    assert g2.project_plus_L(eta).is_zero()
    assert g2.t_map(eta) == -eta


def test_plus_projection_factor():
    hat = lambda i: E(*[k for k in range(1, 8) if k != i])
    for i in range(1, 8):
        assert g2.project_plus_L(g2.alpha(i)) == hat(i) * (3 * (-1) ** (i - 1))


def test_star_phi0_matches_hodge_dual():
    assert hodge_star(g2.PHI0) == g2.STAR_PHI0
    assert wedge(g2.PHI0, g2.STAR_PHI0) == g2.VOLUME * 7


def test_kahler_lift():
    phi, star_phi = g2.lift_kahler_structure()
    assert phi == g2.PHI0
    assert star_phi == -g2.STAR_PHI0


def test_float_matrices_match_exact_maps():
    L = g2.l_matrix()
    for n, key in enumerate(g2.BASIS2):
        exact = g2.project_plus_L(E(*key))
        col = [float(exact.coeff(*k)) for k in g2.BASIS6]
        assert np.allclose(L[:, n], col)


def test_projectors_complementary():
    P, M = g2.plus_projector(), g2.minus_projector()
    assert np.allclose(P + M, np.eye(21))
    assert np.allclose(P @ P, P) and np.allclose(P @ M, 0)
    assert np.linalg.matrix_rank(P) == 7


def test_instanton_residual_exact_and_float():
    asd = E(1, 2) - E(3, 4) - E(6, 7) * 2
    assert g2.instanton_residual(asd) == 0.0
    assert g2.instanton_residual(g2.alpha(1)) > 0
    F = np.zeros((21, 2, 2), dtype=complex)
    F[:, 0, 1] = g2.as_endo_array(asd)[:, 0, 0]
    F[:, 1, 0] = -F[:, 0, 1].conj()
    assert g2.instanton_residual(F) < 1e-14


def test_as_endo_array_rejects_bad_shapes():
    with pytest.raises(ValueError):
        g2.as_endo_array(np.zeros((20, 2, 2)))
    with pytest.raises(ValueError):
        g2.as_endo_array(E(1, 2, 3))


def test_identity_table_required_rows_pass():
    rows = g2.identity_table()
    assert all(r["ok"] for r in rows if r["required"])
    info = {r["identity"]: r["ok"] for r in rows if not r["required"]}
    assert info and not any(info.values())
