"""Sparse multivariate polynomials over float coefficients.

Monomials are plain tuples of nonnegative exponents.  When a time variable is
present it is always variable 0, so a polynomial in ``(t, x1..xn)`` simply has
``nvars == n + 1``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

DROP_TOL = 1e-14

MultiIndex = tuple[int, ...]


def degree(alpha: MultiIndex) -> int:
    return sum(alpha)


def add_exponents(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(i + j for i, j in zip(a, b))


def _grlex_key(alpha: MultiIndex):
    # graded, then lexicographic with variable 0 most significant (x1 before x2)
    return (sum(alpha), tuple(-a for a in alpha))


@lru_cache(maxsize=None)
def _monomials(nvars: int, maxdeg: int) -> tuple[MultiIndex, ...]:
    out = []
    for d in range(maxdeg + 1):
        level = []
        for combo in combinations_with_replacement(range(nvars), d):
            alpha = [0] * nvars
            for v in combo:
                alpha[v] += 1
            level.append(tuple(alpha))
        level.sort(key=_grlex_key)
        out.extend(level)
    return tuple(out)


class Basis:
    """All monomials of total degree <= ``maxdeg`` in graded-lex order.

    ``exclude`` drops every monomial divisible by the given one (a normal set
    modulo a principal ideal with that leading monomial).
    """

    def __init__(self, nvars: int, maxdeg: int, exclude: MultiIndex | None = None):
        if nvars < 1:
            raise ValueError("nvars must be >= 1")
        if maxdeg < 0:
            raise ValueError("maxdeg must be >= 0")
        self.nvars = nvars
        self.maxdeg = maxdeg
        mons = _monomials(nvars, maxdeg)
        if exclude is not None:
            mons = tuple(m for m in mons if not all(a >= e for a, e in zip(m, exclude)))
        self.exclude = exclude
        self.monomials = mons
        self._index = {m: i for i, m in enumerate(self.monomials)}

    def __len__(self) -> int:
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i: int) -> MultiIndex:
        return self.monomials[i]

    def __contains__(self, alpha) -> bool:
        return alpha in self._index

    def index(self, alpha: MultiIndex) -> int:
        return self._index[alpha]

    def __repr__(self) -> str:
        return f"Basis(nvars={self.nvars}, maxdeg={self.maxdeg}, size={len(self)})"


def leading_monomial(p: Poly) -> MultiIndex:
    """Largest monomial of ``p`` in graded-lex order (variable 0 most significant)."""
    if p.is_zero():
        raise ValueError("zero polynomial has no leading monomial")
    return min(p.terms, key=lambda a: (-sum(a), tuple(-v for v in a)))


@lru_cache(maxsize=64)
def basis(nvars: int, maxdeg: int, exclude: MultiIndex | None = None) -> Basis:
    return Basis(nvars, maxdeg, exclude)


def basis_size(nvars: int, maxdeg: int) -> int:
    return math.comb(nvars + maxdeg, maxdeg)


@dataclass(frozen=True)
class Poly:
    """Immutable sparse polynomial ``sum c_alpha * z^alpha``."""

    nvars: int
    terms: Mapping[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.nvars:
                raise ValueError(f"exponent {alpha} does not match nvars={self.nvars}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if abs(c) >= DROP_TOL:
                clean[alpha] = clean.get(alpha, 0.0) + c
        object.__setattr__(self, "terms", {a: c for a, c in clean.items() if abs(c) >= DROP_TOL})

    # construction helpers
    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars, {})

    @classmethod
    def const(cls, nvars: int, c: float) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, i: int) -> "Poly":
        alpha = [0] * nvars
        alpha[i] = 1
        return cls(nvars, {tuple(alpha): 1.0})

    @classmethod
    def from_coeffs(cls, b: Basis, coeffs: Sequence[float]) -> "Poly":
        return cls(b.nvars, {m: c for m, c in zip(b.monomials, coeffs)})

    def coeffs(self, b: Basis) -> np.ndarray:
        """Dense coefficient vector in basis ``b``; raises if a term falls outside it."""
        out = np.zeros(len(b))
        for alpha, c in self.terms.items():
            out[b.index(alpha)] = c
        return out

    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, alpha: MultiIndex) -> float:
        return self.terms.get(tuple(alpha), 0.0)

    # arithmetic
    def _check(self, other: "Poly"):
        if self.nvars != other.nvars:
            raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(self.nvars, other)
        self._check(other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            out[a] = out.get(a, 0.0) + c
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        self._check(other)
        out: dict[MultiIndex, float] = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                m = add_exponents(a, b)
                out[m] = out.get(m, 0.0) + ca * cb
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(self.nvars, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def scale(self, s: float) -> "Poly":
        s = float(s)
        return Poly(self.nvars, {a: c * s for a, c in self.terms.items()})

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, tuple(sorted(self.terms.items()))))

    def allclose(self, other: "Poly", atol: float = 1e-12) -> bool:
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.coeff(k) - other.coeff(k)) <= atol for k in keys)

    # evaluation
    def eval(self, point: Sequence[float]) -> float:
        """Evaluate at one point with compensated (fsum) accumulation."""
        z = [float(v) for v in np.atleast_1d(point)]
        if len(z) != self.nvars:
            raise ValueError(f"point has {len(z)} coordinates, expected {self.nvars}")
        return math.fsum(c * math.prod(zi**ai for zi, ai in zip(z, a)) for a, c in self.terms.items())

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at the rows of ``points`` (shape (N, nvars))."""
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(-1, 1) if pts.ndim == 1 and self.nvars == 1 else np.atleast_2d(pts)
        if pts.shape[1] != self.nvars:
            raise ValueError(f"points have {pts.shape[1]} columns, expected {self.nvars}")
        if not self.terms:
            return np.zeros(len(pts))
        dmax = max(max(a) for a in self.terms)
        powers = pts[:, :, None] ** np.arange(dmax + 1)[None, None, :]
        out = np.zeros(len(pts))
        for a, c in self.terms.items():
            term = np.full(len(pts), c)
            for i, ai in enumerate(a):
                if ai:
                    term *= powers[:, i, ai]
            out += term
        return out

    # calculus / substitution
    def diff(self, var: int) -> "Poly":
        if not 0 <= var < self.nvars:
            raise IndexError(f"variable {var} out of range for nvars={self.nvars}")
        out = {}
        for a, c in self.terms.items():
            if a[var]:
                b = list(a)
                b[var] -= 1
                out[tuple(b)] = c * a[var]
        return Poly(self.nvars, out)

    def promote(self) -> "Poly":
        """Inject an x-polynomial into (t, x) space (time as new variable 0)."""
        return Poly(self.nvars + 1, {(0,) + a: c for a, c in self.terms.items()})

    def fix_first(self, value: float) -> "Poly":
        """Substitute variable 0 (time) by a constant; returns a polynomial in the rest."""
        out: dict[MultiIndex, float] = {}
        for a, c in self.terms.items():
            out[a[1:]] = out.get(a[1:], 0.0) + c * value ** a[0]
        return Poly(self.nvars - 1, out)

    def scale_var(self, var: int, s: float) -> "Poly":
        """Return p with variable ``var`` replaced by ``s * var``."""
        return Poly(self.nvars, {a: c * s ** a[var] for a, c in self.terms.items()})

    def affine_var(self, var: int, a: float, b: float) -> "Poly":
        """Return p with variable ``var`` replaced by ``a * var + b``."""
        out = Poly.zero(self.nvars)
        lin = Poly.var(self.nvars, var) * a + b
        pows: dict[int, Poly] = {0: Poly.const(self.nvars, 1.0)}
        for e in sorted({m[var] for m in self.terms}):
            while max(pows) < e:
                pows[max(pows) + 1] = pows[max(pows)] * lin
        for m, c in self.terms.items():
            rest = list(m)
            rest[var] = 0
            out = out + Poly(self.nvars, {tuple(rest): c}) * pows[m[var]]
        return out

    def sorted_terms(self) -> list[tuple[MultiIndex, float]]:
        return sorted(self.terms.items(), key=lambda kv: _grlex_key(kv[0]))

    def __repr__(self) -> str:
        return f"Poly({self.nvars}, {to_string(self, _default_names(self.nvars, False))!r})"


def lie(v: Poly, f: Sequence[Poly]) -> Poly:
    """``dv/dt + grad_x v . f`` for ``v`` and ``f_i`` in (t, x) variables, time first."""
    n = len(f)
    if v.nvars != n + 1:
        raise ValueError(f"v has nvars={v.nvars}, expected {n + 1} for {n} states")
    for fi in f:
        if fi.nvars != n + 1:
            raise ValueError("every f_i must be a polynomial in (t, x)")
    out = v.diff(0)
    for i, fi in enumerate(f):
        dv = v.diff(i + 1)
        if not dv.is_zero():
            out = out + dv * fi
    return out


# ---------------------------------------------------------------------------
# text syntax:  2.5*x1^2*x2 - 0.8*t + 1,  parentheses allowed, no implicit '*'

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(\S))")


class PolySyntaxError(ValueError):
    pass


def _default_names(nvars: int, with_time: bool) -> list[str]:
    if with_time:
        return ["t"] + [f"x{i}" for i in range(1, nvars)]
    return [f"x{i}" for i in range(1, nvars + 1)]


def _tokenize(text: str):
    pos = 0
    toks = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PolySyntaxError(f"cannot tokenize at {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            toks.append(("num", num))
        elif name is not None:
            toks.append(("name", name))
        else:
            toks.append(("op", op))
        pos = m.end()
    return toks


def parse_poly(text: str, n: int, with_time: bool = True) -> Poly:
    """Parse a polynomial in ``t, x1..xn`` (or ``x1..xn`` when ``with_time`` is False)."""
    names = _default_names(n + 1 if with_time else n, with_time)
    nvars = len(names)
    index = {nm: i for i, nm in enumerate(names)}
    toks = _tokenize(text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else (None, None)

    def take():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def expr() -> Poly:
        kind, val = peek()
        sign = 1.0
        if (kind, val) in (("op", "-"), ("op", "+")):
            take()
            sign = -1.0 if val == "-" else 1.0
        acc = term().scale(sign)
        while peek() in (("op", "+"), ("op", "-")):
            _, op = take()
            rhs = term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term() -> Poly:
        acc = power()
        while True:
            kind, val = peek()
            if (kind, val) == ("op", "*"):
                take()
                acc = acc * power()
            elif kind in ("num", "name") or (kind, val) == ("op", "("):
                raise PolySyntaxError(f"implicit multiplication before {val!r} is not allowed")
            else:
                return acc

    def power() -> Poly:
        base = atom()
        if peek() == ("op", "^"):
            take()
            kind, val = take()
            if kind != "num" or not val.isdigit():
                raise PolySyntaxError(f"exponent must be a nonnegative integer, got {val!r}")
            base = base ** int(val)
        return base

    def atom() -> Poly:
        kind, val = take()
        if kind == "num":
            return Poly.const(nvars, float(val))
        if kind == "name":
            if val not in index:
                raise PolySyntaxError(f"unknown identifier {val!r} (allowed: {', '.join(names)})")
            return Poly.var(nvars, index[val])
        if (kind, val) == ("op", "("):
            inner = expr()
            if take() != ("op", ")"):
                raise PolySyntaxError("missing ')'")
            return inner
        if (kind, val) == ("op", "-"):
            return -power()
        raise PolySyntaxError(f"unexpected token {val!r}")

    if not toks:
        raise PolySyntaxError("empty polynomial")
    result = expr()
    if pos != len(toks):
        raise PolySyntaxError(f"trailing input at token {toks[pos][1]!r}")
    return result


def to_string(p: Poly, names: Sequence[str] | None = None) -> str:
    """Render in the same syntax accepted by :func:`parse_poly`."""
    if names is None:
        names = _default_names(p.nvars, False)
    if p.is_zero():
        return "0"
    parts = []
    for alpha, c in p.sorted_terms():
        factors = []
        for nm, a in zip(names, alpha):
            if a == 1:
                factors.append(nm)
            elif a > 1:
                factors.append(f"{nm}^{a}")
        mag = abs(c)
        if not factors:
            body = repr(mag)
        elif mag == 1.0:
            body = "*".join(factors)
        else:
            body = "*".join([repr(mag)] + factors)
        parts.append(("-" if c < 0 else "+", body))
    s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        s += f" {sign} {body}"
    return s


def poly_vector_degree(polys: Iterable[Poly]) -> int:
    return max((p.degree() for p in polys), default=0)
