"""Instanton monads O(-1)^c -> O^{2+2c} -> O(1)^c on P^3 and their Chern classes."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

import sympy as sp

X = sp.symbols("x0:4")


@dataclass(frozen=True)
class ChernPolynomial:
    """Integer polynomial in h truncated above h^dim."""

    coeffs: tuple
    dim: int = 3

    def __post_init__(self):
        c = tuple(int(a) for a in self.coeffs[: self.dim + 1])
        object.__setattr__(self, "coeffs", c + (0,) * (self.dim + 1 - len(c)))

    def __getitem__(self, k: int) -> int:
        return self.coeffs[k] if 0 <= k <= self.dim else 0

    def __mul__(self, other: "ChernPolynomial") -> "ChernPolynomial":
        out = [0] * (self.dim + 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                if i + j <= self.dim:
                    out[i + j] += a * b
        return ChernPolynomial(tuple(out), self.dim)

    def __pow__(self, k: int) -> "ChernPolynomial":
        base = self if k >= 0 else self.inverse()
        out = ChernPolynomial((1,), self.dim)
        for _ in range(abs(k)):
            out = out * base
        return out

    def inverse(self) -> "ChernPolynomial":
        if self.coeffs[0] != 1:
            raise ValueError("only total Chern classes (constant term 1) are invertible")
        out = [1] + [0] * self.dim
        for k in range(1, self.dim + 1):
            out[k] = -sum(self.coeffs[i] * out[k - i] for i in range(1, k + 1))
        return ChernPolynomial(tuple(out), self.dim)

    def __truediv__(self, other: "ChernPolynomial") -> "ChernPolynomial":
        return self * other.inverse()

    def __str__(self) -> str:
        terms = []
        for k, a in enumerate(self.coeffs):
            if a == 0:
                continue
            mono = "" if k == 0 else ("h" if k == 1 else f"h^{k}")
            coef = str(a) if (k == 0 or abs(a) != 1) else ("-" if a < 0 else "")
            terms.append(f"{coef}{mono}")
        return " + ".join(terms).replace("+ -", "- ") or "0"


def line(k: int, dim: int = 3) -> ChernPolynomial:
    """Total Chern class of O(k)."""
    return ChernPolynomial((1, k), dim)


def chern_of_monad(c: int, dim: int = 3) -> tuple[int, ChernPolynomial]:
    """Rank and total Chern class of the cohomology of the monad (Whitney quotient)."""
    if c < 1:
        raise ValueError("c must be >= 1")
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    middle = line(0, dim) ** (2 + 2 * c)
    total = middle / (line(-1, dim) ** c * line(1, dim) ** c)
    return 2 + 2 * c - 2 * c, total


def twist_rank2(chern: ChernPolynomial, k: int) -> ChernPolynomial:
    """c(E(k)) for rank 2: c1 + 2k h, c2 + k c1 + k^2."""
    c1, c2 = chern[1], chern[2]
    return ChernPolynomial((1, c1 + 2 * k, c2 + k * c1 + k * k), chern.dim)


@dataclass(frozen=True)
class RestrictionChern:
    d: int
    twisted: ChernPolynomial  # c(E(-d)) on P^3
    pushforward: ChernPolynomial  # c(E) / c(E(-d)), the class of E|_D on P^3
    on_divisor: ChernPolynomial  # pullback to D, in powers of the hyperplane of D
    c2_degree: int  # deg c2(E|_D) = c * d


def restriction_chern(d: int, c: int = 1, dim: int = 3) -> RestrictionChern:
    """Chern data of E|_D from 0 -> E(-d) -> E -> E|_D -> 0 on a degree-d divisor."""
    if d < 1:
        raise ValueError("d must be >= 1")
    total = ChernPolynomial((1,), dim) if c == 0 else chern_of_monad(c, dim)[1]
    twisted = twist_rank2(total, -d)
    on_divisor = ChernPolynomial(total.coeffs, dim - 1)
    return RestrictionChern(
        d=d,
        twisted=twisted,
        pushforward=total / twisted,
        on_divisor=on_divisor,
        c2_degree=on_divisor[2] * d if dim - 1 >= 2 else 0,
    )


# -- monads ---------------------------------------------------------------------------


@dataclass
class MonadData:
    c: int
    alpha: sp.Matrix  # (2+2c) x c, linear forms
    beta: sp.Matrix  # c x (2+2c), linear forms

    def composite(self) -> sp.Matrix:
        return (self.beta * self.alpha).applyfunc(sp.expand)

    def is_complex(self) -> bool:
        return all(e == 0 for e in self.composite())

    def fiber_ranks(self, point) -> tuple[int, int]:
        sub = dict(zip(X, [sp.Rational(p) for p in point]))
        return self.alpha.subs(sub).rank(), self.beta.subs(sub).rank()


def _bidiagonal(a, b, c: int) -> sp.Matrix:
    m = sp.zeros(c + 1, c)
    for i in range(c):
        m[i, i] = a
        m[i + 1, i] = b
    return m


def canonical_monad(c: int) -> MonadData:
    """alpha = (m(x0,x1); m(x2,x3)), beta = (m(x3,x2)^T, -m(x1,x0)^T)."""
    x0, x1, x2, x3 = X
    alpha = _bidiagonal(x0, x1, c).col_join(_bidiagonal(x2, x3, c))
    beta = _bidiagonal(x3, x2, c).T.row_join(-_bidiagonal(x1, x0, c).T)
    return MonadData(c, alpha, beta)


def _random_invertible(rng: random.Random, n: int, spread: int = 3) -> sp.Matrix:
    for _ in range(100):
        M = sp.Matrix(n, n, lambda i, j: rng.randint(-spread, spread))
        if M.det() != 0:
            return M
    raise RuntimeError("no invertible integer matrix found")


def sample_monad(c: int, seed: int = 0, retries: int = 100) -> MonadData:
    """Canonical monad moved by random GL actions on every space and on C^4.

    beta' = P beta Q^-1 and alpha' = Q alpha R keep beta' alpha' = P (beta alpha) R = 0.
    """
    if c < 1:
        raise ValueError("c must be >= 1")
    rng = random.Random(seed)
    base = canonical_monad(c)
    n = 2 + 2 * c
    for _ in range(retries):
        try:
            P = _random_invertible(rng, c)
            R = _random_invertible(rng, c)
            Q = _random_invertible(rng, n, spread=1)
            G = _random_invertible(rng, 4)
        except RuntimeError:
            continue
        new = G * sp.Matrix(X)
        sub = dict(zip(X, new))
        alpha = (Q * base.alpha * R).subs(sub, simultaneous=True).applyfunc(sp.expand)
        beta = (P * base.beta * Q.inv()).subs(sub, simultaneous=True).applyfunc(sp.expand)
        m = MonadData(c, alpha, beta)
        if m.fiber_ranks((1, 0, 0, 0)) == (c, c):
            return m
    raise RuntimeError(f"no full-rank monad after {retries} retries (c={c}, seed={seed})")


def exactness_report(monad: MonadData, points: int = 100, seed: int = 0) -> dict:
    """Fiber ranks of alpha and beta at random rational points of P^3."""
    rng = random.Random(seed)
    bad = []
    for _ in range(points):
        p = [Fraction(rng.randint(-20, 20), rng.randint(1, 9)) for _ in range(4)]
        if all(v == 0 for v in p):
            p[0] = Fraction(1)
        ra, rb = monad.fiber_ranks(p)
        if ra != monad.c or rb != monad.c:
            bad.append({"point": [str(v) for v in p], "rank_alpha": ra, "rank_beta": rb})
    return {"points": points, "failures": bad, "ok": not bad, "beta_alpha_zero": monad.is_complex()}


__all__ = [
    "ChernPolynomial",
    "MonadData",
    "RestrictionChern",
    "line",
    "chern_of_monad",
    "twist_rank2",
    "restriction_chern",
    "canonical_monad",
    "sample_monad",
    "exactness_report",
]
