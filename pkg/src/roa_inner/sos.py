"""Sum-of-squares parameterisation by Gram matrices and coefficient matching.

Polynomials whose coefficients are decision variables are carried as
:class:`LinPoly`: for each monomial, a sparse linear form over variable keys
(``('free', i)`` or ``('psd', block, i, j)``) plus a constant.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .conic import ProgramBuilder
from .poly import Basis, MultiIndex, Poly, add_exponents, basis


@dataclass
class LinPoly:
    nvars: int
    terms: dict = field(default_factory=dict)  # monomial -> {key: coef}
    const: dict = field(default_factory=dict)  # monomial -> float

    @classmethod
    def from_poly(cls, p: Poly) -> "LinPoly":
        return cls(p.nvars, {}, dict(p.terms))

    def copy(self) -> "LinPoly":
        return LinPoly(self.nvars, {m: dict(f) for m, f in self.terms.items()}, dict(self.const))

    def degree(self) -> int:
        return max((sum(m) for m in list(self.terms) + list(self.const)), default=0)

    def _acc(self, m, key, v):
        row = self.terms.setdefault(m, {})
        row[key] = row.get(key, 0.0) + v

    def __add__(self, other):
        if isinstance(other, Poly):
            other = LinPoly.from_poly(other)
        if self.nvars != other.nvars:
            raise ValueError("nvars mismatch")
        out = self.copy()
        for m, form in other.terms.items():
            for key, v in form.items():
                out._acc(m, key, v)
        for m, v in other.const.items():
            out.const[m] = out.const.get(m, 0.0) + v
        return out

    def scale(self, s: float) -> "LinPoly":
        return LinPoly(
            self.nvars,
            {m: {k: v * s for k, v in f.items()} for m, f in self.terms.items()},
            {m: v * s for m, v in self.const.items()},
        )

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        if isinstance(other, Poly):
            other = LinPoly.from_poly(other)
        return self + (-other)

    def times(self, g: Poly) -> "LinPoly":
        """Multiply by a known polynomial."""
        if g.nvars != self.nvars:
            raise ValueError("nvars mismatch")
        out = LinPoly(self.nvars)
        for m, form in self.terms.items():
            for gam, gc in g.terms.items():
                mm = add_exponents(m, gam)
                for key, v in form.items():
                    out._acc(mm, key, v * gc)
        for m, c in self.const.items():
            for gam, gc in g.terms.items():
                mm = add_exponents(m, gam)
                out.const[mm] = out.const.get(mm, 0.0) + c * gc
        return out

    def map_monomials(self, fn: Callable[[MultiIndex], Poly], nvars: int | None = None) -> "LinPoly":
        """Apply a linear operator given by its action on single monomials."""
        out = LinPoly(self.nvars if nvars is None else nvars)
        cache: dict = {}
        for m, form in self.terms.items():
            img = cache.setdefault(m, fn(m))
            for mm, c in img.terms.items():
                for key, v in form.items():
                    out._acc(mm, key, v * c)
        for m, cv in self.const.items():
            img = cache.setdefault(m, fn(m))
            for mm, c in img.terms.items():
                out.const[mm] = out.const.get(mm, 0.0) + cv * c
        return out

    def evaluate(self, values: Callable) -> Poly:
        """Substitute numeric values for the variable keys."""
        out = dict(self.const)
        for m, form in self.terms.items():
            out[m] = out.get(m, 0.0) + sum(v * values(k) for k, v in form.items())
        return Poly(self.nvars, out)


def free_poly(builder: ProgramBuilder, name: str, nvars: int, deg: int) -> tuple[LinPoly, Basis]:
    """Polynomial of degree <= deg with free coefficients, one column per basis monomial."""
    b = basis(nvars, deg)
    keys = builder.add_free(name, len(b))
    return LinPoly(nvars, {m: {k: 1.0} for m, k in zip(b.monomials, keys)}), b


def gram_to_poly_map(b: Basis) -> dict[MultiIndex, list[tuple[int, int, float]]]:
    """For every monomial of ``m(x)^T Q m(x)``, the upper-triangular Gram entries
    feeding it, with weight 2 for off-diagonal pairs."""
    out: dict = defaultdict(list)
    mons = b.monomials
    for i in range(len(mons)):
        for j in range(i, len(mons)):
            out[add_exponents(mons[i], mons[j])].append((i, j, 1.0 if i == j else 2.0))
    return dict(out)


def gram_poly(b: Basis, Q: np.ndarray) -> Poly:
    """Expand ``m(x)^T Q m(x)`` using the coefficient map."""
    Q = np.asarray(Q, dtype=float)
    return Poly(b.nvars, {m: sum(w * Q[i, j] for i, j, w in entries) for m, entries in gram_to_poly_map(b).items()})


@dataclass
class GramBlock:
    name: str
    basis: Basis
    block: int

    def linpoly(self) -> LinPoly:
        terms = {
            m: {("psd", self.block, i, j): w for i, j, w in entries}
            for m, entries in gram_to_poly_map(self.basis).items()
        }
        return LinPoly(self.basis.nvars, terms)


def sos_poly(builder: ProgramBuilder, name: str, nvars: int, halfdeg: int, exclude=None) -> GramBlock:
    if halfdeg < 0:
        raise ValueError(f"multiplier {name!r} has an empty basis (half-degree {halfdeg})")
    b = basis(nvars, halfdeg, exclude)
    return GramBlock(name, b, builder.add_psd(name, len(b)))


def multiplier_halfdeg(budget: int, factor: Poly) -> int:
    """Largest half-degree whose square times ``factor`` stays within ``budget``."""
    return (budget - factor.degree()) // 2


@dataclass
class CoeffMatch:
    monomial: MultiIndex
    coefs: dict
    rhs: float


def match_identity(lhs: LinPoly, rhs: Iterable[LinPoly], maxdeg: int) -> list[CoeffMatch]:
    """Rows of ``lhs - sum(rhs) == 0``, one per monomial of degree <= maxdeg, in graded-lex order."""
    diff = lhs.copy()
    for part in rhs:
        diff = diff - part
    if diff.degree() > maxdeg:
        raise ValueError(f"identity has degree {diff.degree()} above its budget {maxdeg}")
    rows = []
    for m in basis(lhs.nvars, maxdeg):
        coefs = {k: v for k, v in diff.terms.get(m, {}).items() if v != 0.0}
        rows.append(CoeffMatch(m, coefs, -diff.const.get(m, 0.0)))
    return rows


def emit(builder: ProgramBuilder, name: str, rows: list[CoeffMatch]) -> None:
    builder.begin_rows(name)
    for r in rows:
        if not r.coefs:
            if abs(r.rhs) > 0.0:
                raise ValueError(f"identity {name!r} cannot match monomial {r.monomial}")
            continue
        builder.add_row(r.coefs, r.rhs)
    builder.end_rows()


def time_weight(lo: float, hi: float, nvars: int) -> Poly:
    """``(t - lo) * (hi - t)`` in (t, x) with ``nvars`` variables (time first); nonnegative on ``[lo, hi]``."""
    if hi <= lo:
        raise ValueError("time window must have positive length")
    t = Poly.var(nvars, 0)
    return (t - lo) * (Poly.const(nvars, hi) - t)
