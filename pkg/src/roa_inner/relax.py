"""Order-k moment / sum-of-squares relaxations for inner ROA approximation.

Both programs are assembled in normalised time ``s = 2 t / T - 1`` on
``[-1, 1]`` with the vector field scaled to ``(T/2) f(T (s + 1) / 2, x)``.
This is an exact change of variables; it only keeps the monomial basis in
time well conditioned (moment matrices on a symmetric interval are far
better conditioned than on ``[0, 1]``).  The returned certificate ``v`` is
mapped back to physical time.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .conic import ConicProgram, ProgramBuilder, tri_size, vech_to_mat
from .moments import Ball, Box, DomainDescriptor, half_degree, lebesgue_moments
from .poly import Poly, basis, leading_monomial, lie
from .sos import (
    emit,
    free_poly,
    gram_poly,
    match_identity,
    multiplier_halfdeg,
    sos_poly,
    time_weight,
)

S0, S1 = -1.0, 1.0  # normalised time window


class SolverFailure(RuntimeError):
    """The conic solver ended without an (near-)optimal point; ``solution`` holds its trace."""

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class SystemSpec:
    """Polynomial system ``x' = f(t, x)`` on ``X = {g_X > 0}`` with target ``{g_T > 0}``.

    ``f`` entries live in (t, x) (``n + 1`` variables, time first); ``g_X`` and
    ``g_T`` live in x.  ``domain`` is a box or ball equal to (or containing) X,
    used for the Lebesgue moments of the objective.
    """

    n: int
    f: tuple[Poly, ...]
    g_X: Poly
    g_T: Poly
    T: float
    domain: DomainDescriptor
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(self.f))
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        if len(self.f) != self.n:
            raise ValueError(f"expected {self.n} dynamics entries, got {len(self.f)}")
        if any(fi.nvars != self.n + 1 for fi in self.f):
            raise ValueError("dynamics must be polynomials in (t, x1..xn)")
        if self.g_X.nvars != self.n or self.g_T.nvars != self.n:
            raise ValueError("g_X and g_T must be polynomials in x1..xn")
        if self.domain.dim != self.n:
            raise ValueError("domain dimension differs from the state dimension")

    @property
    def deg_f(self) -> int:
        return max(fi.degree() for fi in self.f)

    def scaled_dynamics(self) -> tuple[Poly, ...]:
        """Vector field in normalised time: ``(T/2) f(T (s + 1) / 2, x)``."""
        h = 0.5 * self.T
        return tuple(fi.affine_var(0, h, h).scale(h) for fi in self.f)

    def field_values(self, t: float, x: np.ndarray) -> np.ndarray:
        z = np.concatenate(([t], np.atleast_1d(x)))
        return np.array([fi.eval(z) for fi in self.f])

    def state_scaling(self) -> "StateScaling":
        lo, hi = self.domain.bounding_box()
        return StateScaling(tuple((lo + hi) / 2.0), tuple((hi - lo) / 2.0))

    def normalized(self) -> "SystemSpec":
        """Equivalent system on the unit box ``[-1, 1]^n`` (or unit ball).

        States are mapped by ``x = c + h * u`` with ``[c - h, c + h]`` the
        domain's bounding box; ``g_X`` and ``g_T`` are rescaled to unit maximal
        coefficient (positive scaling leaves their superlevel sets unchanged).
        """
        sc = self.state_scaling()
        f = tuple(sc.to_unit(fi, offset=1).scale(1.0 / h) for fi, h in zip(self.f, sc.half_width))

        def unit_g(g: Poly) -> Poly:
            gu = sc.to_unit(g)
            top = max((abs(c) for c in gu.terms.values()), default=1.0)
            return gu.scale(1.0 / top)

        if isinstance(self.domain, Ball):
            dom: DomainDescriptor = Ball((0.0,) * self.n, 1.0)
        else:
            dom = Box((-1.0,) * self.n, (1.0,) * self.n)
        return SystemSpec(self.n, f, unit_g(self.g_X), unit_g(self.g_T), self.T, dom, self.name)


@dataclass(frozen=True)
class StateScaling:
    """Affine state map ``x = center + half_width * u`` onto the unit box."""

    center: tuple[float, ...]
    half_width: tuple[float, ...]

    @property
    def jacobian(self) -> float:
        return float(np.prod(self.half_width))

    def to_unit(self, p: Poly, offset: int = 0) -> Poly:
        """``p`` expressed in unit coordinates (state variables start at ``offset``)."""
        for i, (c, h) in enumerate(zip(self.center, self.half_width)):
            p = p.affine_var(offset + i, h, c)
        return p

    def from_unit(self, p: Poly, offset: int = 0) -> Poly:
        """Inverse of :meth:`to_unit`."""
        for i, (c, h) in enumerate(zip(self.center, self.half_width)):
            p = p.affine_var(offset + i, 1.0 / h, -c / h)
        return p


def lie_degree(spec: SystemSpec, deg_v: int) -> int:
    return max(deg_v - 1 + max(spec.deg_f, 1), 0)


def degrees_for(spec: SystemSpec, d: int) -> tuple[int, int, int]:
    """Map a table "degree d" to ``(k, deg_w, deg_v)``.

    Both ``w`` and ``v`` have degree ``d``; the order ``k`` is the smallest
    one whose multipliers can absorb ``L v`` (degree ``d + deg f - 1``), so
    odd ``d`` rounds ``2k`` up to the next even number.
    """
    if d < 1:
        raise ValueError("degree must be >= 1")
    return order_for(spec, d, d), d, d


def order_for(spec: SystemSpec, deg_w: int, deg_v: int) -> int:
    """Smallest order k accommodating explicit degrees of w and v."""
    return max(math.ceil(lie_degree(spec, deg_v) / 2), math.ceil(deg_v / 2), math.ceil(deg_w / 2), 1)


def _check_degrees(spec: SystemSpec, k: int, deg_w: int, deg_v: int):
    if deg_v > 2 * k or deg_w > 2 * k:
        raise ValueError(f"deg_v={deg_v}, deg_w={deg_w} exceed 2k={2 * k}")
    if lie_degree(spec, deg_v) > 2 * k:
        raise ValueError(
            f"Lie derivative of a degree-{deg_v} v has degree {lie_degree(spec, deg_v)} > 2k={2 * k}"
        )
    if deg_w < 0 or deg_v < 0:
        raise ValueError("degrees must be nonnegative")


def _w_budget(deg_w: int) -> int:
    return 2 * math.ceil(deg_w / 2)


# ---------------------------------------------------------------------------
# dual: sum-of-squares program


def build_dual(spec: SystemSpec, k: int, deg_w: int, deg_v: int, reduce_boundary: bool = True) -> ConicProgram:
    """SOS program: minimise ``int w dlambda`` subject to the five Putinar identities.

    With ``reduce_boundary`` the Gram bases of the boundary multipliers skip
    monomials divisible by the leading monomial of ``g_X``: the free multiplier
    of ``g_X`` absorbs those terms anyway, and keeping them leaves a zero-cost
    ray in the feasible set that interior-point iterates drift along.
    """
    _check_degrees(spec, k, deg_w, deg_v)
    n = spec.n
    ntx = n + 1
    D = 2 * k
    Dw = _w_budget(deg_w)
    fs = spec.scaled_dynamics()
    gX = spec.g_X
    gXt = gX.promote()
    tw = time_weight(S0, S1, ntx)
    one_x = Poly.const(n, 1.0)
    one_tx = Poly.const(ntx, 1.0)

    bld = ProgramBuilder()
    v, vb = free_poly(bld, "v", ntx, deg_v)
    w, wb = free_poly(bld, "w", n, deg_w)
    r_deg = D - gXt.degree()
    if r_deg < 0:
        raise ValueError(f"order k={k} too small for deg g_X={gX.degree()}")
    r, _ = free_poly(bld, "r", ntx, r_deg)

    lm = leading_monomial(gXt) if reduce_boundary else None

    def sos(name, nvars, budget, factor, exclude=None):
        return sos_poly(bld, name, nvars, multiplier_halfdeg(budget, factor), exclude)

    mult = {
        "p": (sos("p", ntx, D, one_tx), one_tx),
        "q1": (sos("q1", ntx, D, tw), tw),
        "q2": (sos("q2", ntx, D, gXt), gXt),
        "p0": (sos("p0", n, D, one_x), one_x),
        "q01": (sos("q01", n, D, gX), gX),
        "pT1": (sos("pT1", ntx, D, one_tx, lm), one_tx),
        "qT1": (sos("qT1", ntx, D, tw, lm), tw),
        "pT2": (sos("pT2", n, D, one_x), one_x),
        "qT2": (sos("qT2", n, D, gX), gX),
        "qT3": (sos("qT3", n, D, spec.g_T), -spec.g_T),
        "s0": (sos("s0", n, Dw, one_x), one_x),
        "s1": (sos("s1", n, Dw, gX), gX),
    }

    def term(name):
        blk, factor = mult[name]
        return blk.linpoly().times(factor)

    lie_v = v.map_monomials(lambda m: lie(Poly(ntx, {m: 1.0}), fs))
    v0 = v.map_monomials(lambda m: Poly(ntx, {m: 1.0}).fix_first(S0), nvars=n)
    v1 = v.map_monomials(lambda m: Poly(ntx, {m: 1.0}).fix_first(S1), nvars=n)

    emit(bld, "decrease", match_identity(-lie_v, [term("p"), term("q1"), term("q2")], D))
    emit(bld, "initial", match_identity(w - v0 - one_x, [term("p0"), term("q01")], D))
    emit(bld, "boundary", match_identity(v, [term("pT1"), term("qT1"), r.times(gXt)], D))
    emit(bld, "terminal", match_identity(v1, [term("pT2"), term("qT2"), term("qT3")], D))
    emit(bld, "w_nonneg", match_identity(w, [term("s0"), term("s1")], Dw))

    leb = lebesgue_moments(spec.domain, n, deg_w)
    bld.set_objective({key: leb.values[i] for i, m in enumerate(wb.monomials) for key in w.terms[m]})
    prog = bld.build("min")
    prog.meta = {
        "kind": "dual",
        "k": k,
        "deg_w": deg_w,
        "deg_v": deg_v,
        "v_basis": vb,
        "w_basis": wb,
        "multipliers": {nm: (blk.block, blk.basis) for nm, (blk, _) in mult.items()},
    }
    return prog


# ---------------------------------------------------------------------------
# primal: moment program


def _moment_vars(bld, name, nvars, deg):
    b = basis(nvars, deg)
    keys = bld.add_free(name, len(b))
    return b, dict(zip(b.monomials, keys))


def _localizer_rows(bld, name, g: Poly, mom: dict, order: int, exclude=None):
    """PSD slack ``S = M_order(g, y)`` as equality rows ``S_ij - sum g_c y[a+b+c] = 0``."""
    if order < 0:
        raise ValueError(f"localizer {name!r} has negative order {order}")
    b = basis(g.nvars, order, exclude)
    rows = b.monomials
    blk = bld.add_psd(name, len(rows))
    bld.begin_rows(name)
    for i in range(len(rows)):
        for j in range(i, len(rows)):
            coefs = {("psd", blk, i, j): 1.0}
            for gam, c in g.terms.items():
                m = tuple(a + b + e for a, b, e in zip(rows[i], rows[j], gam))
                key = mom[m]
                coefs[key] = coefs.get(key, 0.0) - c
            bld.add_row(coefs, 0.0)
    bld.end_rows()
    return blk, b


def _functional(mom: dict, p: Poly, sign: float = 1.0) -> dict:
    out: dict = {}
    for m, c in p.terms.items():
        key = mom[m]
        out[key] = out.get(key, 0.0) + sign * c
    return out


def _merge(*forms: dict) -> dict:
    out: dict = {}
    for f in forms:
        for k, v in f.items():
            out[k] = out.get(k, 0.0) + v
    return out


def build_primal(
    spec: SystemSpec,
    k: int,
    deg_w: int | None = None,
    deg_v: int | None = None,
    reduce_boundary: bool = True,
) -> ConicProgram:
    """Moment program: maximise the mass of the initial measure.

    Five truncated moment vectors (occupation ``y``, initial ``y0``, boundary
    final ``yT1``, terminal final ``yT2`` and slack ``yhat``) are free columns;
    every moment / localizing matrix is a PSD slack tied to them by equality
    rows.  The ``g_X = 0`` support of ``yT1`` is imposed as linear equalities,
    and ``reduce_boundary`` indexes the ``yT1`` moment matrices by the same
    normal set as the dual boundary multipliers.
    """
    if deg_w is None or deg_v is None:
        _, dw, dv = degrees_for(spec, 2 * k)
        deg_w = dw if deg_w is None else deg_w
        deg_v = dv if deg_v is None else deg_v
    _check_degrees(spec, k, deg_w, deg_v)
    n, ntx, D = spec.n, spec.n + 1, 2 * k
    kw = _w_budget(deg_w) // 2
    fs = spec.scaled_dynamics()
    gX, gT = spec.g_X, spec.g_T
    gXt = gX.promote()
    tw = time_weight(S0, S1, ntx)
    dX, dT = half_degree(gX), half_degree(gT)
    one_x, one_tx = Poly.const(n, 1.0), Poly.const(ntx, 1.0)

    bld = ProgramBuilder()
    _, y = _moment_vars(bld, "y", ntx, D)
    _, y0 = _moment_vars(bld, "y0", n, D)
    _, yT1 = _moment_vars(bld, "yT1", ntx, D)
    _, yT2 = _moment_vars(bld, "yT2", n, D)
    _, yh = _moment_vars(bld, "yhat", n, 2 * kw)

    v_rows = []
    bld.begin_rows("liouville")
    for m in basis(ntx, deg_v):
        mono = Poly(ntx, {m: 1.0})
        row = _merge(
            _functional(yT1, mono),
            _functional(yT2, mono.fix_first(S1)),
            _functional(y0, mono.fix_first(S0), -1.0),
            _functional(y, lie(mono, fs), -1.0),
        )
        row = {kk: vv for kk, vv in row.items() if vv != 0.0}
        if row:
            bld.add_row(row, 0.0)
            v_rows.append(m)
    bld.end_rows()

    leb = lebesgue_moments(spec.domain, n, deg_w)
    bld.begin_rows("domination")
    for i, m in enumerate(leb.basis.monomials):
        bld.add_row({y0[m]: 1.0, yh[m]: 1.0}, leb.values[i])
    bld.end_rows()

    bld.begin_rows("boundary_support")
    for m in basis(ntx, D - gXt.degree()):
        bld.add_row(_functional(yT1, gXt * Poly(ntx, {m: 1.0})), 0.0)
    bld.end_rows()

    lm = leading_monomial(gXt) if reduce_boundary else None
    # each localizing matrix is paired with the SOS multiplier of the same name
    # in the dual program; its dual slack is that multiplier's Gram matrix
    loc = {
        "p": ("M(y)", one_tx, y, k, None),
        "q1": ("M(tw,y)", tw, y, k - 1, None),
        "q2": ("M(gX,y)", gXt, y, k - dX, None),
        "p0": ("M(y0)", one_x, y0, k, None),
        "q01": ("M(gX,y0)", gX, y0, k - dX, None),
        "pT1": ("M(yT1)", one_tx, yT1, k, lm),
        "qT1": ("M(tw,yT1)", tw, yT1, k - 1, lm),
        "pT2": ("M(yT2)", one_x, yT2, k, None),
        "qT2": ("M(gX,yT2)", gX, yT2, k - dX, None),
        "qT3": ("M(-gT,yT2)", -gT, yT2, k - dT, None),
        "s0": ("M(yhat)", one_x, yh, kw, None),
        "s1": ("M(gX,yhat)", gX, yh, kw - dX, None),
    }
    mults = {nm: _localizer_rows(bld, *args) for nm, args in loc.items()}

    bld.set_objective({y0[(0,) * n]: 1.0})
    prog = bld.build("max")
    prog.meta = {
        "kind": "primal",
        "k": k,
        "deg_w": deg_w,
        "deg_v": deg_v,
        "v_basis": basis(ntx, deg_v),
        "v_rows": v_rows,
        "w_basis": leb.basis,
        "r_basis": basis(ntx, D - gXt.degree()),
        "multipliers": mults,
    }
    return prog


# ---------------------------------------------------------------------------
# extraction


@dataclass
class RelaxationResult:
    k: int
    deg_w: int
    deg_v: int
    w: Poly
    v: Poly
    dual_opt: float
    primal_opt: float | None
    status: str
    residuals: dict = field(default_factory=dict)
    multipliers: dict = field(default_factory=dict)
    v_scaled: Poly | None = None
    T: float = 1.0
    wall_time: float = 0.0
    w_hat: Poly | None = None
    scaling: StateScaling | None = None

    def denormalized(self, sc: StateScaling) -> "RelaxationResult":
        """Map a result computed on the unit-box system back to original states.

        ``w_hat``, ``v_scaled`` and the multipliers stay in unit coordinates;
        objective values pick up the Jacobian of the state map.
        """
        J = sc.jacobian
        return replace(
            self,
            w=sc.from_unit(self.w),
            v=sc.from_unit(self.v, offset=1),
            dual_opt=self.dual_opt * J,
            primal_opt=None if self.primal_opt is None else self.primal_opt * J,
            w_hat=self.w,
            scaling=sc,
        )

    def inner_mask(self, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Membership in ``{w < 1}``; values within ``tol`` of 1 count as outside."""
        return self.w.eval_many(pts) < 1.0 - tol


def _certificate_from_sos(spec: SystemSpec, prog: ConicProgram, sol):
    x = sol.x
    meta = prog.meta
    w = Poly.from_coeffs(meta["w_basis"], prog.group(x, "w"))
    v_hat = Poly.from_coeffs(meta["v_basis"], prog.group(x, "v"))
    grams = {name: prog.block_matrix(x, blk) for name, (blk, _) in meta["multipliers"].items()}
    r = Poly.from_coeffs(basis(spec.n + 1, 2 * meta["k"] - spec.g_X.degree()), prog.group(x, "r"))
    return w, v_hat, grams, r, sol.dual_obj


def _certificate_from_moments(spec: SystemSpec, prog: ConicProgram, sol):
    """The SOS certificate is the multiplier vector of the moment program.

    Multipliers of the Liouville rows are the coefficients of ``v``, those of
    the domination rows the coefficients of ``w``, those of the support rows
    ``-r``; each localizing matrix's dual slack is the Gram matrix of the
    matching SOS multiplier.
    """
    meta = prog.meta
    y = sol.y
    sgn = 1.0 if prog.sense == "min" else -1.0
    slack = sgn * (prog.c - prog.A.T @ y)

    def rows(name):
        lo, hi = prog.row_groups[name]
        return y[lo:hi]

    v_terms = dict(zip(meta["v_rows"], rows("liouville")))
    v_hat = Poly(spec.n + 1, v_terms)
    w = Poly.from_coeffs(meta["w_basis"], rows("domination"))
    r = Poly.from_coeffs(meta["r_basis"], -rows("boundary_support"))
    offs = prog.block_offsets()
    grams = {}
    for name, (blk, _) in meta["multipliers"].items():
        n = prog.psd_orders[blk]
        G = vech_to_mat(slack[offs[blk] : offs[blk] + tri_size(n)], n)
        G[~np.eye(n, dtype=bool)] *= 0.5
        grams[name] = G
    return w, v_hat, grams, r, sol.primal_obj


def extract(spec: SystemSpec, prog: ConicProgram, sol, wall_time: float = 0.0) -> RelaxationResult:
    """Read ``w`` and ``v`` (plus the Gram multipliers) out of a solved program of either form."""
    kind = prog.meta.get("kind")
    if kind not in ("dual", "primal"):
        raise ValueError("extract expects a program produced by build_dual or build_primal")
    if sol.status not in ("optimal", "near-optimal"):
        hist = sol.info.get("history") or []
        tail = ""
        if hist:
            _, pobj, dobj, pinf, dinf, gap, *_ = hist[-1]
            tail = f" after {len(hist) - 1} iterations (pinf {pinf:.1e}, dinf {dinf:.1e}, gap {gap:.1e})"
        raise SolverFailure(f"solver returned status {sol.status!r}{tail}", sol)
    meta = prog.meta
    reader = _certificate_from_sos if kind == "dual" else _certificate_from_moments
    w, v_hat, grams, r, p_opt = reader(spec, prog, sol)
    mults = {name: gram_poly(b, grams[name]) for name, (_, b) in meta["multipliers"].items()}
    mults["r"] = r
    leb = lebesgue_moments(spec.domain, spec.n, meta["deg_w"])
    d_opt = math.fsum(leb.values * w.coeffs(leb.basis)) if not w.is_zero() else 0.0
    residuals = dict(sol.residuals)
    residuals["gram_min_eig"] = min(float(np.linalg.eigvalsh(G).min()) for G in grams.values())
    return RelaxationResult(
        k=meta["k"],
        deg_w=meta["deg_w"],
        deg_v=meta["deg_v"],
        w=w,
        v=v_hat.affine_var(0, 2.0 / spec.T, -1.0),
        dual_opt=d_opt,
        primal_opt=p_opt,
        status=sol.status,
        residuals=residuals,
        multipliers=mults,
        v_scaled=v_hat,
        T=spec.T,
        wall_time=wall_time,
    )


def identity_residuals(spec: SystemSpec, res: RelaxationResult, pts_tx: np.ndarray) -> dict[str, float]:
    """Evaluate the five certificate identities at normalised (s, x) points.

    Points are in the coordinates the program was solved in: time in
    ``[-1, 1]`` and, for state-normalised results, states in the unit box.
    Returns, per identity, ``max |lhs - rhs| / (1 + max |coefficient|)``.
    """
    w = res.w
    if res.scaling is not None:
        spec, w = spec.normalized(), res.w_hat
    n, ntx = spec.n, spec.n + 1
    mu = res.multipliers
    fs = spec.scaled_dynamics()
    v = res.v_scaled
    gXt = spec.g_X.promote()
    tw = time_weight(S0, S1, ntx)
    pts_x = pts_tx[:, 1:]

    def scale(*polys):
        return 1.0 + max((max((abs(c) for c in p.terms.values()), default=0.0) for p in polys), default=0.0)

    def rel(lhs: Poly, rhs: Poly, pts):
        return float(np.max(np.abs(lhs.eval_many(pts) - rhs.eval_many(pts)))) / scale(lhs, rhs)

    one_x = Poly.const(n, 1.0)
    return {
        "decrease": rel(-lie(v, fs), mu["p"] + mu["q1"] * tw + mu["q2"] * gXt, pts_tx),
        "initial": rel(w - v.fix_first(S0) - one_x, mu["p0"] + mu["q01"] * spec.g_X, pts_x),
        "boundary": rel(v, mu["pT1"] + mu["qT1"] * tw + mu["r"] * gXt, pts_tx),
        "terminal": rel(v.fix_first(S1), mu["pT2"] + mu["qT2"] * spec.g_X - mu["qT3"] * spec.g_T, pts_x),
        "w_nonneg": rel(w, mu["s0"] + mu["s1"] * spec.g_X, pts_x),
    }


# ---------------------------------------------------------------------------


class RunningMin:
    """Pointwise minimum of several certificates ``w_i``."""

    def __init__(self, results: Sequence[RelaxationResult]):
        if not results:
            raise ValueError("running minimum needs at least one result")
        self.ws = [r.w for r in results]

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        return np.min(np.vstack([w.eval_many(pts) for w in self.ws]), axis=0)

    def eval(self, point) -> float:
        return min(w.eval(point) for w in self.ws)

    def inner_mask(self, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        return self.eval_many(pts) < 1.0 - tol


def running_min(results: Sequence[RelaxationResult]) -> RunningMin:
    return RunningMin(results)


FORMS = ("moment", "sos")
RELAXATION_NEAR_TOL = 1e-5


def solve_relaxation(
    spec: SystemSpec,
    k: int,
    deg_w: int,
    deg_v: int,
    solver: str | None = None,
    form: str = "sos",
    normalize: bool = True,
    **opts,
) -> RelaxationResult:
    """Build, solve and extract the relaxation at one order.

    ``form="sos"`` solves the SOS program (Gram matrices as primal variables,
    moments as multipliers); ``form="moment"`` hands the moment program to
    the solver and reads the certificate off its multipliers.  Both give the
    same optimum; the moment form is several times larger in this encoding.
    With ``normalize`` the program is built on the unit-box system of
    :meth:`SystemSpec.normalized` and the result mapped back.
    """
    from .solver import solve

    # a feasible iterate is a valid certificate whatever the remaining gap;
    # high orders stall around 1e-6 in double precision
    opts.setdefault("near_tol", RELAXATION_NEAR_TOL)
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}")
    t0 = time.perf_counter()
    work = spec.normalized() if normalize else spec
    build = build_primal if form == "moment" else build_dual
    prog = build(work, k, deg_w, deg_v)
    sol = solve(prog, backend=solver, **opts)
    res = extract(work, prog, sol, wall_time=time.perf_counter() - t0)
    return res.denormalized(spec.state_scaling()) if normalize else res


def solve_degree(spec: SystemSpec, d: int, solver: str | None = None, **kw) -> RelaxationResult:
    k, dw, dv = degrees_for(spec, d)
    return solve_relaxation(spec, k, dw, dv, solver=solver, **kw)
