"""Lebesgue moments of simple domains and moment / localizing matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .poly import Basis, MultiIndex, Poly, add_exponents, basis


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds differ in length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box needs lower < upper componentwise")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def volume(self) -> float:
        return math.prod(hi - lo for lo, hi in zip(self.lower, self.upper))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lower), np.array(self.upper)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def to_dict(self) -> dict:
        return {"kind": "box", "lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def volume(self) -> float:
        n = self.dim
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius**n

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.sum((pts - np.array(self.center)) ** 2, axis=1) <= self.radius**2

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


DomainDescriptor = Box | Ball


def domain_from_dict(d: dict) -> DomainDescriptor:
    kind = d.get("kind")
    if kind == "box":
        return Box(tuple(d["lower"]), tuple(d["upper"]))
    if kind == "ball":
        return Ball(tuple(d["center"]), d["radius"])
    raise ValueError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True)
class MomentVector:
    basis: Basis
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != len(self.basis):
            raise ValueError("moment vector length does not match its basis")

    def __getitem__(self, alpha: MultiIndex) -> float:
        return float(self.values[self.basis.index(tuple(alpha))])

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def integrate(self, p: Poly) -> float:
        """Linear functional ``L_y(p) = sum_a p_a y_a``."""
        return math.fsum(c * self[a] for a, c in p.terms.items())


def _centered_ball_moment(alpha: MultiIndex, radius: float) -> float:
    if any(a % 2 for a in alpha):
        return 0.0
    n = len(alpha)
    d = sum(alpha)
    betas = [(a + 1) / 2 for a in alpha]
    log_sphere = math.log(2.0) + sum(math.lgamma(b) for b in betas) - math.lgamma(sum(betas))
    return math.exp(log_sphere) * radius ** (d + n) / (d + n)


def _monomial_integral(dom: DomainDescriptor, alpha: MultiIndex) -> float:
    if isinstance(dom, Box):
        return math.prod(
            (hi ** (a + 1) - lo ** (a + 1)) / (a + 1) for a, lo, hi in zip(alpha, dom.lower, dom.upper)
        )
    # ball: expand prod (c_i + u_i)^a_i over the centered ball
    c = dom.center
    total = []
    ranges = [range(a + 1) for a in alpha]
    for gamma in np.ndindex(*[len(r) for r in ranges]):
        if any(g % 2 for g in gamma):
            continue
        coef = math.prod(math.comb(a, g) * ci ** (a - g) for a, g, ci in zip(alpha, gamma, c))
        if coef:
            total.append(coef * _centered_ball_moment(tuple(gamma), dom.radius))
    return math.fsum(total)


def lebesgue_moments(dom: DomainDescriptor, nvars: int, maxdeg: int) -> MomentVector:
    """Exact moments ``int_dom x^alpha dx`` for every monomial of degree <= maxdeg."""
    if dom.dim != nvars:
        raise ValueError(f"domain has dimension {dom.dim}, expected {nvars}")
    b = basis(nvars, maxdeg)
    return MomentVector(b, np.array([_monomial_integral(dom, a) for a in b]))


def dirac_moments(points: np.ndarray, maxdeg: int, weights: Sequence[float] | None = None) -> MomentVector:
    """Moments of a weighted sum of Dirac masses (empirical measure)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nvars = pts.shape[1]
    b = basis(nvars, maxdeg)
    w = np.full(len(pts), 1.0 / len(pts)) if weights is None else np.asarray(weights, dtype=float)
    exps = np.array(b.monomials)
    vals = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
    return MomentVector(b, w @ vals)


def half_degree(g: Poly) -> int:
    return math.ceil(g.degree() / 2)


def localizing_matrix(g: Poly, y: MomentVector, k: int) -> np.ndarray:
    """Matrix with entries ``sum_gamma g_gamma y[alpha + beta + gamma]`` over ``alpha, beta`` of
    degree <= ``k - ceil(deg g / 2)``."""
    order = k - half_degree(g)
    if order < 0:
        raise ValueError(f"order k={k} too small for a localizer of degree {g.degree()}")
    if y.basis.maxdeg < 2 * k:
        raise ValueError(f"moment vector has degree {y.basis.maxdeg}, need {2 * k}")
    if g.nvars != y.basis.nvars:
        raise ValueError("localizing polynomial and moments live in different spaces")
    rows = basis(y.basis.nvars, order).monomials
    size = len(rows)
    out = np.zeros((size, size))
    for i in range(size):
        for j in range(i, size):
            ab = add_exponents(rows[i], rows[j])
            out[i, j] = out[j, i] = math.fsum(c * y[add_exponents(ab, gam)] for gam, c in g.terms.items())
    return out


def moment_matrix(y: MomentVector, k: int) -> np.ndarray:
    return localizing_matrix(Poly.const(y.basis.nvars, 1.0), y, k)
