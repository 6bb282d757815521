"""Exact exterior algebra on (R^7)* with rational coefficients.

Basis covectors are ``e^1 .. e^7``; a basis monomial is a strictly increasing
tuple of indices, e.g. ``(1, 2, 5)`` for ``e^125``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping

DIM = 7
TOP = tuple(range(1, DIM + 1))


def _sort_sign(indices: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Sort ``indices``; return (sign of the permutation, sorted tuple).

    A repeated index gives sign 0.
    """
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(idx)


@dataclass(frozen=True)
class ExteriorElement:
    """An element of the exterior algebra with exact rational coefficients."""

    terms: Mapping[tuple[int, ...], Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, val in self.terms.items():
            key = tuple(key)
            if any(k < 1 or k > DIM for k in key):
                raise ValueError(f"index out of range in {key}")
            sign, skey = _sort_sign(key)
            if sign == 0:
                continue
            val = Fraction(val) * sign
            clean[skey] = clean.get(skey, Fraction(0)) + val
        clean = {k: v for k, v in clean.items() if v != 0}
        object.__setattr__(self, "terms", clean)

    # construction -----------------------------------------------------
    @classmethod
    def basis(cls, *indices: int, coeff=1) -> "ExteriorElement":
        return cls({tuple(indices): Fraction(coeff)})

    @classmethod
    def scalar(cls, value) -> "ExteriorElement":
        return cls({(): Fraction(value)})

    @classmethod
    def zero(cls) -> "ExteriorElement":
        return cls({})

    # structure --------------------------------------------------------
    @property
    def degrees(self) -> set[int]:
        return {len(k) for k in self.terms}

    @property
    def degree(self) -> int:
        """Degree of a homogeneous element (zero counts as any degree: -1)."""
        degs = self.degrees
        if not degs:
            return -1
        if len(degs) > 1:
            raise ValueError(f"element is not homogeneous (degrees {sorted(degs)})")
        return degs.pop()

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, *indices: int) -> Fraction:
        sign, key = _sort_sign(indices)
        return sign * self.terms.get(key, Fraction(0))

    def component(self, p: int) -> "ExteriorElement":
        return ExteriorElement({k: v for k, v in self.terms.items() if len(k) == p})

    # arithmetic -------------------------------------------------------
    def __add__(self, other: "ExteriorElement") -> "ExteriorElement":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, Fraction(0)) + v
        return ExteriorElement(out)

    def __neg__(self) -> "ExteriorElement":
        return ExteriorElement({k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "ExteriorElement") -> "ExteriorElement":
        return self + (-other)

    def __mul__(self, scalar) -> "ExteriorElement":
        scalar = Fraction(scalar)
        return ExteriorElement({k: v * scalar for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __xor__(self, other: "ExteriorElement") -> "ExteriorElement":
        return wedge(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExteriorElement):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for key in sorted(self.terms, key=lambda k: (len(k), k)):
            v = self.terms[key]
            mono = "e" + "".join(map(str, key)) if key else "1"
            parts.append(f"{v}*{mono}" if v != 1 else mono)
        return " + ".join(parts)


def wedge(a: ExteriorElement, b: ExteriorElement) -> ExteriorElement:
    out: dict[tuple[int, ...], Fraction] = {}
    for ka, va in a.terms.items():
        for kb, vb in b.terms.items():
            sign, key = _sort_sign(ka + kb)
            if sign == 0:
                continue
            out[key] = out.get(key, Fraction(0)) + sign * va * vb
    return ExteriorElement(out)


def wedge_all(*elements: ExteriorElement) -> ExteriorElement:
    out = ExteriorElement.scalar(1)
    for el in elements:
        out = wedge(out, el)
    return out


def hodge_star(a: ExteriorElement) -> ExteriorElement:
    """Euclidean Hodge star on R^7, orientation e^{1...7}.

    Defined by ``e^I ^ *e^I = e^{1..7}`` on orthonormal monomials.
    """
    a.degree  # raises on non-homogeneous input
    out = {}
    for key, val in a.terms.items():
        comp = tuple(i for i in TOP if i not in key)
        sign, _ = _sort_sign(key + comp)
        out[comp] = val * sign
    return ExteriorElement(out)


def contract(x, a: ExteriorElement) -> ExteriorElement:
    """Interior product of the vector ``x`` (7 components) into ``a``."""
    x = [Fraction(c) for c in x]
    if len(x) != DIM:
        raise ValueError("vector must have 7 components")
    out: dict[tuple[int, ...], Fraction] = {}
    for key, val in a.terms.items():
        for pos, idx in enumerate(key):
            xi = x[idx - 1]
            if xi == 0:
                continue
            rest = key[:pos] + key[pos + 1:]
            out[rest] = out.get(rest, Fraction(0)) + (-1) ** pos * xi * val
    return ExteriorElement(out)


def basis_monomials(p: int) -> list[tuple[int, ...]]:
    return list(combinations(TOP, p))


def to_vector(a: ExteriorElement, p: int) -> list[Fraction]:
    """Coordinates of a degree-p element in the sorted monomial basis."""
    return [a.terms.get(k, Fraction(0)) for k in basis_monomials(p)]


def from_vector(coords, p: int) -> ExteriorElement:
    return ExteriorElement(dict(zip(basis_monomials(p), (Fraction(c) for c in coords))))
