"""Trajectory oracle: fixed-step RK4 with boundary-hit detection, ROA labels, volumes.

The oracle integrates ``x' = f(t, x)`` from ``t = 0`` to ``T`` and decides
whether the trajectory stays in ``X = {g_X > 0}`` and ends in
``X_T = {g_T > 0}``.  Points whose decisive test values fall within a small
margin of zero are labelled *boundary-uncertain* and kept out of every count.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .poly import Poly
from .relax import SystemSpec

REACHED_T = "reached-T"
HIT_BOUNDARY = "hit-boundary"
LEFT_WINDOW = "left-window"

IN_ROA = "in-ROA"
OUT_ROA = "out-ROA"
UNCERTAIN = "boundary-uncertain"
LABELS = (OUT_ROA, IN_ROA, UNCERTAIN)  # integer codes 0, 1, 2

EVENT_TOL = 1e-10
DEFAULT_MARGIN = 1e-7
_BLOWUP = 1e12


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    flag: str
    tau: float | None = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def default_step(spec: SystemSpec) -> float:
    return spec.T / 2000.0


def _field(spec: SystemSpec) -> Callable[[float, np.ndarray], np.ndarray]:
    """Vectorised ``f(t, X)`` for an ``(m, n)`` array of states."""
    f = spec.f

    def rhs(t: float, X: np.ndarray) -> np.ndarray:
        Z = np.column_stack([np.full(X.shape[0], t), X])
        return np.column_stack([fi.eval_many(Z) for fi in f])

    return rhs


def _rk4(rhs, t: float, X: np.ndarray, h) -> np.ndarray:
    """One classic RK4 step; ``h`` may be a scalar or a per-row array."""
    hc = np.reshape(h, (-1, 1)) if np.ndim(h) else h
    th = t + 0.5 * np.asarray(h)
    # time enters only through f; per-row steps share the row's own time
    if np.ndim(h):
        k1 = rhs(t, X)
        k2 = _rhs_rows(rhs, th, X + 0.5 * hc * k1)
        k3 = _rhs_rows(rhs, th, X + 0.5 * hc * k2)
        k4 = _rhs_rows(rhs, t + np.asarray(h), X + hc * k3)
    else:
        k1 = rhs(t, X)
        k2 = rhs(th, X + 0.5 * h * k1)
        k3 = rhs(th, X + 0.5 * h * k2)
        k4 = rhs(t + h, X + h * k3)
    return X + hc * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _rhs_rows(rhs, ts: np.ndarray, X: np.ndarray) -> np.ndarray:
    if np.all(ts == ts[0]):
        return rhs(float(ts[0]), X)
    return np.vstack([rhs(float(t), X[i : i + 1]) for i, t in enumerate(ts)])


def _refine_hit(rhs, g: Poly, t: float, X: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Bisect the sub-step ``theta in (0, h]`` where ``g`` first reaches zero.

    ``X`` holds states with ``g > 0`` at time ``t`` whose full step ends with
    ``g <= 0``.  Returns ``(theta, state at t + theta)`` per row with
    ``|g| <= EVENT_TOL`` (or the bracket collapsed to machine precision).
    """
    lo = np.zeros(X.shape[0])
    hi = np.full(X.shape[0], h)
    Xhi = _rk4(rhs, t, X, hi)
    ghi = g.eval_many(Xhi)
    for _ in range(200):
        done = np.abs(ghi) <= EVENT_TOL
        if done.all():
            break
        if np.all(hi - lo <= 4.0 * np.finfo(float).eps * max(h, abs(t), 1.0)):
            if np.all(np.abs(ghi) <= 1e3 * EVENT_TOL):
                break
            raise FloatingPointError("step underflow while locating the boundary hit")
        mid = 0.5 * (lo + hi)
        Xm = _rk4(rhs, t, X, mid)
        gm = g.eval_many(Xm)
        upper = (gm <= 0.0) & ~done
        lower = (gm > 0.0) & ~done
        hi = np.where(upper, mid, hi)
        Xhi = np.where(upper[:, None], Xm, Xhi)
        ghi = np.where(upper, gm, ghi)
        lo = np.where(lower, mid, lo)
        # when the midpoint itself is on the boundary to tolerance, accept it
        close = (np.abs(gm) <= EVENT_TOL) & ~done
        hi = np.where(close, mid, hi)
        Xhi = np.where(close[:, None], Xm, Xhi)
        ghi = np.where(close, gm, ghi)
    return hi, Xhi


def integrate(spec: SystemSpec, x0: Sequence[float], h: float | None = None) -> Trajectory:
    """Integrate one trajectory from ``x0`` at ``t = 0`` up to ``min(tau, T)``.

    ``tau`` is the first time ``g_X`` reaches zero, located by bisection to
    ``|g_X| <= 1e-10``.
    """
    h = default_step(spec) if h is None else float(h)
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x0, dtype=float).reshape(1, spec.n)
    g0 = float(spec.g_X.eval_many(x)[0])
    if g0 < -EVENT_TOL:
        raise ValueError("initial state lies outside the constraint set")
    rhs = _field(spec)
    nsteps = max(1, int(np.ceil(spec.T / h - 1e-12)))
    times, states = [0.0], [x[0].copy()]
    if abs(g0) <= EVENT_TOL:
        return Trajectory(np.array(times), np.array(states), HIT_BOUNDARY, 0.0)
    t = 0.0
    for i in range(nsteps):
        step = min(h, spec.T - t)
        xn = _rk4(rhs, t, x, step)
        if not np.all(np.isfinite(xn)) or np.abs(xn).max() > _BLOWUP:
            return Trajectory(np.array(times), np.array(states), LEFT_WINDOW)
        if spec.g_X.eval_many(xn)[0] <= 0.0:
            theta, xe = _refine_hit(rhs, spec.g_X, t, x, step)
            tau = t + float(theta[0])
            times.append(tau)
            states.append(xe[0])
            return Trajectory(np.array(times), np.array(states), HIT_BOUNDARY, tau)
        t = spec.T if i == nsteps - 1 else (i + 1) * h
        x = xn
        times.append(t)
        states.append(x[0].copy())
    return Trajectory(np.array(times), np.array(states), REACHED_T)


def _margins(spec: SystemSpec, margin: float) -> tuple[float, float]:
    def scaled(g: Poly) -> float:
        return margin * max((abs(c) for c in g.terms.values()), default=1.0)

    return scaled(spec.g_X), scaled(spec.g_T)


def label_codes(
    spec: SystemSpec, pts: np.ndarray, h: float | None = None, margin: float = DEFAULT_MARGIN
) -> np.ndarray:
    """Integer ROA labels (indices into :data:`LABELS`) for many initial states.

    All points are integrated together.  A point is in the ROA when its
    trajectory reaches ``T`` with ``g_X > margin`` at every sample and
    ``g_T(x(T)) > margin``; it is out when ``g_X`` crosses below zero or
    ``g_T(x(T)) < -margin`` without any decisive value inside the margin band;
    otherwise it is boundary-uncertain.  ``margin`` is relative to the largest
    coefficient of the respective polynomial.
    """
    h = default_step(spec) if h is None else float(h)
    if h <= 0:
        raise ValueError("step must be positive")
    X = np.array(pts, dtype=float).reshape(-1, spec.n)
    mX, mT = _margins(spec, margin)
    rhs = _field(spec)
    m = X.shape[0]
    gmin = spec.g_X.eval_many(X)
    if np.any(gmin < -mX):
        raise ValueError("initial states must lie in the constraint set")
    hit = np.zeros(m, dtype=bool)
    active = np.arange(m)
    nsteps = max(1, int(np.ceil(spec.T / h - 1e-12)))
    t = 0.0
    for i in range(nsteps):
        if active.size == 0:
            break
        step = min(h, spec.T - t)
        Xn = _rk4(rhs, t, X[active], step)
        bad = ~np.all(np.isfinite(Xn), axis=1) | (np.abs(Xn).max(axis=1) > _BLOWUP)
        g = np.where(bad, -np.inf, spec.g_X.eval_many(np.where(bad[:, None], 0.0, Xn)))
        crossed = g <= 0.0
        gmin[active] = np.minimum(gmin[active], np.where(crossed, gmin[active], g))
        hit[active[crossed]] = True
        keep = ~crossed
        X[active[keep]] = Xn[keep]
        active = active[keep]
        t = spec.T if i == nsteps - 1 else (i + 1) * h
    gT = spec.g_T.eval_many(X)
    codes = np.full(m, 1, dtype=np.int8)
    reached = ~hit
    codes[reached & (gT < -mT)] = 0
    codes[reached & (np.abs(gT) <= mT)] = 2
    codes[reached & (gmin <= mX)] = 2
    # a crossing is decisive unless the trajectory was already grazing before it
    codes[hit] = np.where(gmin[hit] <= mX, 2, 0)
    return codes


def label_points(spec: SystemSpec, pts: np.ndarray, h: float | None = None, margin: float = DEFAULT_MARGIN) -> list[str]:
    return [LABELS[c] for c in label_codes(spec, pts, h, margin)]


def in_roa(spec: SystemSpec, x0: Sequence[float], h: float | None = None, margin: float = DEFAULT_MARGIN) -> str:
    """ROA label of a single initial state."""
    return LABELS[int(label_codes(spec, np.asarray(x0, dtype=float).reshape(1, -1), h, margin)[0])]


# ---------------------------------------------------------------------------
# sampling and volumes


@dataclass(frozen=True)
class SamplingPlan:
    """Cell-centred grid (``res`` points per axis) or seeded Monte Carlo (``samples`` points).

    Samples cover the domain's bounding box; points outside the domain are
    dropped, and each kept point carries the weight ``box volume / total``.
    """

    kind: str = "grid"
    res: int = 2001
    samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("grid", "mc"):
            raise ValueError("sampling kind must be 'grid' or 'mc'")
        if self.res < 1 or self.samples < 1:
            raise ValueError("sample counts must be positive")

    def points(self, spec: SystemSpec) -> tuple[np.ndarray, float]:
        """Sample points inside the domain and the volume weight of each."""
        lo, hi = spec.domain.bounding_box()
        box = float(np.prod(hi - lo))
        if self.kind == "grid":
            axes = [lo[i] + (np.arange(self.res) + 0.5) * (hi[i] - lo[i]) / self.res for i in range(spec.n)]
            mesh = np.meshgrid(*axes, indexing="ij")
            P = np.column_stack([m.ravel() for m in mesh])
        else:
            rng = np.random.default_rng(self.seed)
            P = lo + (hi - lo) * rng.random((self.samples, spec.n))
        weight = box / P.shape[0]
        P = P[spec.domain.contains(P)]
        P = P[spec.g_X.eval_many(P) > 0.0]
        return P, weight

    def to_dict(self) -> dict:
        return {"kind": self.kind, "res": self.res, "samples": self.samples, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingPlan":
        return cls(**{k: d[k] for k in ("kind", "res", "samples", "seed") if k in d})


@dataclass
class RoaEstimate:
    """Labelled sample set with ROA / inner-set volumes."""

    plan: SamplingPlan
    points: np.ndarray
    codes: np.ndarray
    w_values: np.ndarray
    weight: float
    vol_roa: float
    vol_inner: float
    relative_error: float
    std_error: float
    violations: int
    n_uncertain: int
    extra: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return [LABELS[c] for c in self.codes]

    def violation_points(self) -> np.ndarray:
        return self.points[self.extra["violation_mask"]]

    def uncertain_points(self) -> np.ndarray:
        return self.points[self.codes == 2]

    def summary(self) -> dict:
        return {
            "vol_roa": self.vol_roa,
            "vol_inner": self.vol_inner,
            "relative_error": self.relative_error,
            "std_error": self.std_error,
            "violations": self.violations,
            "boundary_uncertain": self.n_uncertain,
            "samples": int(self.points.shape[0]),
        }


def volume_error(
    spec: SystemSpec,
    w,
    plan: SamplingPlan | None = None,
    h: float | None = None,
    margin: float = DEFAULT_MARGIN,
    inner_tol: float = 1e-9,
    violation_tol: float = 1e-6,
) -> RoaEstimate:
    """Compare the inner set ``{w < 1}`` with the simulated ROA on a sample set.

    ``w`` is anything with ``eval_many`` (a :class:`Poly` or a running
    minimum).  Values within ``inner_tol`` of 1 count as outside the inner set.
    A violation is an out-ROA point with ``w < 1 - violation_tol``.
    Boundary-uncertain points are excluded from both volumes.
    """
    plan = plan or SamplingPlan()
    P, weight = plan.points(spec)
    codes = label_codes(spec, P, h, margin)
    wv = w.eval_many(P) if P.shape[0] else np.zeros(0)
    sure = codes != 2
    in_set = (wv < 1.0 - inner_tol) & sure
    roa = codes == 1
    vol_roa = float(roa.sum() * weight)
    if vol_roa <= 0.0:
        raise ValueError("sampled ROA volume is zero")
    vol_inner = float(in_set.sum() * weight)
    viol = (codes == 0) & (wv < 1.0 - violation_tol)
    rel = (vol_roa - vol_inner) / vol_roa
    if plan.kind == "mc":
        lo, hi = spec.domain.bounding_box()
        box = float(np.prod(hi - lo))
        N = plan.samples
        # standard error of the difference estimator (vol_roa - vol_inner)
        p_diff = float((roa & ~in_set).sum() - (in_set & ~roa).sum()) / N
        var = (float((roa ^ in_set).sum()) / N - p_diff**2) / N
        se = box * np.sqrt(max(var, 0.0)) / vol_roa
    else:
        se = 0.0
    return RoaEstimate(
        plan=plan,
        points=P,
        codes=codes,
        w_values=wv,
        weight=weight,
        vol_roa=vol_roa,
        vol_inner=vol_inner,
        relative_error=float(rel),
        std_error=float(se),
        violations=int(viol.sum()),
        n_uncertain=int((~sure).sum()),
        extra={"violation_mask": viol},
    )


def mc_volume(mask_fn: Callable[[np.ndarray], np.ndarray], spec: SystemSpec, samples: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo volume of ``{x in domain : mask_fn(x)}`` with its standard error."""
    lo, hi = spec.domain.bounding_box()
    box = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    P = lo + (hi - lo) * rng.random((samples, spec.n))
    hit = np.zeros(samples, dtype=bool)
    dom = spec.domain.contains(P)
    hit[dom] = mask_fn(P[dom])
    p = hit.mean()
    return box * p, box * np.sqrt(p * (1 - p) / samples)


def roa_volume(spec: SystemSpec, plan: SamplingPlan, h: float | None = None, margin: float = DEFAULT_MARGIN) -> tuple[float, float]:
    """Volume of the simulated ROA (and its standard error; zero for grids)."""
    P, weight = plan.points(spec)
    codes = label_codes(spec, P, h, margin)
    vol = float((codes == 1).sum() * weight)
    if plan.kind == "grid":
        return vol, 0.0
    lo, hi = spec.domain.bounding_box()
    box = float(np.prod(hi - lo))
    p = (codes == 1).sum() / plan.samples
    return vol, box * float(np.sqrt(p * (1 - p) / plan.samples))


def write_csv(path, est: RoaEstimate, names: Sequence[str] | None = None) -> None:
    """Write ``coordinates, w, label`` rows for external plotting."""
    n = est.points.shape[1]
    names = list(names) if names else [f"x{i + 1}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([*names, "w", "label"])
        for p, wv, c in zip(est.points, est.w_values, est.codes):
            wr.writerow([*(repr(float(v)) for v in p), repr(float(wv)), LABELS[c]])


__all__ = [
    "Trajectory",
    "integrate",
    "in_roa",
    "label_codes",
    "label_points",
    "SamplingPlan",
    "RoaEstimate",
    "volume_error",
    "roa_volume",
    "mc_volume",
    "write_csv",
    "LABELS",
    "IN_ROA",
    "OUT_ROA",
    "UNCERTAIN",
    "REACHED_T",
    "HIT_BOUNDARY",
    "LEFT_WINDOW",
]
