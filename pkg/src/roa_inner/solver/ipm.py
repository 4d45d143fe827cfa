"""Dense primal-dual interior-point method for standard-form conic programs.

Infeasible path-following with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps.  Free columns are kept in the Newton system as a
saddle-point block instead of being split, so the search direction solves

    [ M    A_f ] [dy ]   [ r1 ]
    [ A_f' 0   ] [dxf] = [ r2 ],     M = sum_j A_j (W_j x W_j) A_j' + A_l D A_l'.

Everything is dense; block orders up to a few hundred are the intended scale.
"""
from __future__ import annotations

import logging
import time

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from ..conic import ConicProgram, tri_size
from . import Solution, SolverOptions, residuals

log = logging.getLogger(__name__)


def _coef_to_sym(v: np.ndarray, n: int) -> np.ndarray:
    """Symmetric matrix whose inner product with X equals ``v . vech(X)``."""
    out = np.zeros((n, n))
    iu = np.triu_indices(n)
    out[iu] = v
    out = out + out.T
    out[np.diag_indices(n)] *= 0.5
    off = ~np.eye(n, dtype=bool)
    out[off] *= 0.5
    return out


def _sym_to_coef(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`_coef_to_sym` (off-diagonals doubled)."""
    n = S.shape[0]
    iu = np.triu_indices(n)
    v = S[iu].copy()
    v[iu[0] != iu[1]] *= 2.0
    return v


def _vech(X: np.ndarray) -> np.ndarray:
    return X[np.triu_indices(X.shape[0])]


def _unvech(v: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    iu = np.triu_indices(n)
    out[iu] = v
    out.T[iu] = v
    return out


def _sym(X):
    return 0.5 * (X + X.T)


class _Block:
    """Data of one PSD block: column slice and the rows touching it."""

    def __init__(self, A: sp.csr_matrix, off: int, n: int):
        self.n = n
        self.sl = slice(off, off + tri_size(n))
        Ab = A[:, self.sl].tocsr()
        self.rows = np.flatnonzero(np.diff(Ab.indptr))
        self.Ab = Ab  # m x tri(n)
        self.AbT = Ab.T.tocsr()
        self.sub = Ab[self.rows].tocsr()

    def mats(self, lo: int, hi: int) -> np.ndarray:
        """Dense symmetric constraint matrices of touching rows ``lo:hi``."""
        sub = self.sub[lo:hi].toarray()
        return np.stack([_coef_to_sym(r, self.n) for r in sub]) if len(sub) else np.zeros((0, self.n, self.n))

    def scaled_rows(self, R: np.ndarray, out: np.ndarray) -> None:
        """Write ``svec(R' A_i R)`` for the touching rows into ``out[rows]``.

        Rows are processed in chunks so that at most a few tens of megabytes
        of dense ``n x n`` matrices exist at a time.
        """
        n = self.n
        iu = np.triu_indices(n)
        wt = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
        chunk = max(1, int(_CHUNK_BYTES // (16 * n * n)))
        for lo in range(0, len(self.rows), chunk):
            hi = min(lo + chunk, len(self.rows))
            G = np.matmul(np.matmul(R.T, self.mats(lo, hi)), R)
            out[self.rows[lo:hi]] = G[:, iu[0], iu[1]] * wt


_CHUNK_BYTES = 64e6


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    try:
        L = la.cholesky(X, lower=True)
    except la.LinAlgError:
        return 0.0
    Li = la.solve_triangular(L, dX, lower=True)
    G = la.solve_triangular(L, Li.T, lower=True)
    lam = la.eigvalsh(_sym(G))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _nt_scaling(X: np.ndarray, S: np.ndarray):
    """R with R' S R = R^{-1} X R^{-T} = diag(lam)."""
    Lx = la.cholesky(X, lower=True)
    Ls = la.cholesky(S, lower=True)
    U, lam, Vt = la.svd(Ls.T @ Lx)
    R = Lx @ Vt.T / np.sqrt(lam)
    Rinv = (np.sqrt(lam)[:, None] * Vt) @ la.solve_triangular(Lx, np.eye(len(lam)), lower=True)
    return R, Rinv, lam


def _kkt_solver(V: np.ndarray, Q1: np.ndarray, Q2: np.ndarray, Rf: np.ndarray):
    """Solver for ``[[M, A_f], [A_f', 0]] (dy, dxf) = (r1, r2)`` with ``M = V V'`` and ``A_f = Q1 Rf``.

    The reduced Schur complement ``Q2' M Q2`` is factored as ``R' R`` from a QR
    decomposition of ``V' Q2`` rather than by Cholesky, which would square the
    (already large) condition number near the optimum.
    """
    m2 = Q2.shape[1]
    # incremental QR over column chunks of V keeps the workspace bounded
    chunk = max(m2, int(_CHUNK_BYTES // (8 * max(m2, 1))))
    Rm = np.zeros((0, m2))
    for lo in range(0, V.shape[1], chunk):
        B = np.vstack([Rm, V[:, lo : lo + chunk].T @ Q2])
        Rm = la.qr(B, mode="r", overwrite_a=True, check_finite=False)[0][: min(B.shape)]
    if Rm.shape[0] < m2:
        Rm = np.vstack([Rm, np.zeros((m2 - Rm.shape[0], m2))])
    d = np.abs(np.diag(Rm))
    if not len(d):
        Rm = np.zeros((0, 0))
    else:
        floor = 1e-15 * d.max(initial=1.0)
        # rank-deficient directions: tiny regularisation keeps the triangle invertible
        Rm[np.diag_indices_from(Rm)] = np.where(d < floor, floor, np.diag(Rm))
    nf = Rf.shape[0]
    m = V.shape[0]

    def M_apply(u):
        return V @ (V.T @ u)

    def red_solve(h):
        return la.solve_triangular(Rm, la.solve_triangular(Rm, h, trans="T", check_finite=False), check_finite=False)

    def solve(rhs: np.ndarray) -> np.ndarray:
        r1, r2 = rhs[:m], rhs[m:]
        dy0 = Q1 @ la.solve_triangular(Rf, r2, trans="T") if nf else np.zeros(m)
        h = Q2.T @ (r1 - M_apply(dy0))
        z = red_solve(h)
        for _ in range(2):
            z = z + red_solve(h - Q2.T @ M_apply(Q2 @ z))
        dy = dy0 + Q2 @ z
        dxf = la.solve_triangular(Rf, Q1.T @ (r1 - M_apply(dy))) if nf else np.zeros(0)
        if log.isEnabledFor(logging.DEBUG):
            res1 = M_apply(dy) + Q1 @ (Rf @ dxf) - r1
            log.debug("kkt residual %.1e / %.1e", np.linalg.norm(res1), np.linalg.norm(r1))
        return np.concatenate([dy, dxf])

    return solve


def solve_ipm(prog: ConicProgram, opts: SolverOptions) -> Solution:
    t_start = time.perf_counter()
    sgn = 1.0 if prog.sense == "min" else -1.0
    A0 = sp.csr_matrix(prog.A, dtype=float)
    b0 = np.asarray(prog.b, dtype=float)
    c0 = sgn * np.asarray(prog.c, dtype=float)
    m, N = A0.shape
    nf, nl = prog.n_free, prog.n_nonneg

    # --- scaling: rows by inf-norm, then b and c by their magnitudes
    if opts.scale_rows and m:
        rnorm = np.asarray(abs(A0).max(axis=1).todense()).ravel()
        rnorm[rnorm == 0] = 1.0
        Dr = 1.0 / rnorm
    else:
        Dr = np.ones(m)
    colscale = np.ones(N)
    if opts.degree_scaling and nf:
        cn = np.asarray(abs(A0[:, :nf]).max(axis=0).todense()).ravel()
        cn[cn == 0] = 1.0
        colscale[:nf] = 1.0 / cn
    A = sp.diags(Dr) @ A0 @ sp.diags(colscale)
    A = sp.csr_matrix(A)
    b = Dr * b0
    c = colscale * c0
    bs = max(1.0, np.abs(b).max(initial=0.0))
    cs = max(1.0, np.abs(c).max(initial=0.0))
    b = b / bs
    c = c / cs

    Af = A[:, :nf].tocsc()
    Al = A[:, nf : nf + nl].tocsc()
    blocks = [_Block(A, off, n) for off, n in zip(prog.block_offsets(), prog.psd_orders)]
    nu = nl + sum(blk.n for blk in blocks)

    # --- initial point
    anorm = max(1.0, float(abs(A).max()) if A.nnz else 0.0)
    xi = max(10.0, np.sqrt(max(nu, 1)), max((blk.n for blk in blocks), default=1) * (1.0 + np.abs(b).max(initial=0.0)) / (1.0 + anorm))
    eta = max(10.0, np.sqrt(max(nu, 1)), 1.0 + max(anorm, np.abs(c).max(initial=0.0)))
    X = [xi * np.eye(blk.n) for blk in blocks]
    S = [eta * np.eye(blk.n) for blk in blocks]
    xl = np.full(nl, xi)
    sl = np.full(nl, eta)
    xf = np.zeros(nf)
    y = np.zeros(m)

    # min-norm projector onto {A d = e}; used to strip the residual the
    # ill-conditioned Schur solve leaves in A d = r_p
    AAt = (A @ A.T).toarray()
    AAt[np.diag_indices(m)] += 1e-14 * max(1.0, np.abs(np.diag(AAt)).max(initial=1.0))
    try:
        aat = la.cho_factor(AAt, lower=True, check_finite=False)
    except la.LinAlgError:
        aat = None

    # free columns are eliminated through a QR factorisation of A_f: the
    # constraint A_f' dy = r_d fixes dy on range(A_f), leaving an SPD system
    # on its orthogonal complement
    if nf:
        Qfull, Rfull = la.qr(Af.toarray(), mode="full")
        Q1, Q2, Rf = Qfull[:, :nf], Qfull[:, nf:], Rfull[:nf]
        if np.abs(np.diag(Rf)).min(initial=np.inf) <= 1e-12 * np.abs(Rf).max(initial=1.0):
            raise ValueError("free columns of the program are linearly dependent")
    else:
        Q1, Q2, Rf = np.zeros((m, 0)), np.eye(m), np.zeros((0, 0))

    cf = c[:nf]
    cl = c[nf : nf + nl]
    cb = [c[blk.sl] for blk in blocks]

    def assemble_x():
        x = np.empty(N)
        x[:nf] = xf
        x[nf : nf + nl] = xl
        for blk, Xj in zip(blocks, X):
            x[blk.sl] = _vech(Xj)
        return x

    def apply_A_blocks(mats):
        out = np.zeros(m)
        for blk, Mj in zip(blocks, mats):
            out += blk.Ab @ _vech(Mj)
        return out

    def AT_block(blk, yv):
        return _coef_to_sym(blk.AbT @ yv, blk.n)

    status = "numerical-failure"
    history = []
    best = None
    it = 0
    bnorm, cnorm = np.linalg.norm(b), np.linalg.norm(c)
    stall = 0
    ap = ad = 0.0
    for it in range(opts.max_iter + 1):
        x = assemble_x()
        rp = b - A @ x
        rdf = cf - Af.T @ y
        rdl = cl - Al.T @ y - sl
        rdb = [_coef_to_sym(cbj, blk.n) - AT_block(blk, y) - Sj for blk, cbj, Sj in zip(blocks, cb, S)]
        pobj = float(c @ x)
        dobj = float(b @ y)
        comp = float(xl @ sl) + sum(float(np.sum(Xj * Sj)) for Xj, Sj in zip(X, S))
        mu = comp / max(nu, 1)
        pinf = np.linalg.norm(rp) / (1.0 + bnorm)
        dres = np.sqrt(
            np.linalg.norm(rdf) ** 2
            + np.linalg.norm(rdl) ** 2
            + sum(np.linalg.norm(Rj) ** 2 for Rj in rdb)
        )
        dinf = dres / (1.0 + cnorm)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        history.append((it, pobj * bs * cs, dobj * bs * cs, pinf, dinf, gap, mu, ap, ad))
        if opts.verbose:
            log.info("it %3d pobj %+.9e dobj %+.9e pinf %.1e dinf %.1e gap %.1e mu %.1e ap %.2f ad %.2f", *history[-1])
        # fallback candidate: prefer feasible iterates (smallest gap), then
        # gap-closed ones (smallest infeasibility)
        feas = max(pinf, dinf)
        if feas <= opts.feas_tol:
            cand = (0, gap)
        elif gap <= opts.near_tol:
            cand = (1, feas)
        else:
            cand = None
        if cand is not None and (best is None or cand < best[0]):
            best = (cand, x.copy(), y.copy())
        if pinf <= opts.feas_tol and dinf <= opts.feas_tol and gap <= opts.gap_tol:
            status = "optimal"
            break
        if best is not None and feas > 1e3 * max(best[0][1] if best[0][0] else 0.0, opts.feas_tol):
            log.info("feasibility lost at iteration %d; keeping the best gap-closed iterate", it)
            break
        # infeasibility: the iterates approach a ray certifying it
        if dobj > 0 and (cnorm + dres) / dobj < 1e-8:
            status = "infeasible"
            break
        if pobj < 0 and (bnorm + np.linalg.norm(rp)) / (-pobj) < 1e-8:
            status = "unbounded"
            break
        if it == opts.max_iter:
            break

        if log.isEnabledFor(logging.DEBUG):
            for j, (Xj, Sj) in enumerate(zip(X, S)):
                ex, es = la.eigvalsh(Xj), la.eigvalsh(Sj)
                log.debug("blk %d n=%d X [%.1e, %.1e] S [%.1e, %.1e]", j, len(ex), ex[0], ex[-1], es[0], es[-1])
        # --- scaling matrices and Schur complement
        try:
            scal = [_nt_scaling(Xj, Sj) for Xj, Sj in zip(X, S)]
        except la.LinAlgError:
            log.info("lost positive definiteness at iteration %d", it)
            break
        W = [R @ R.T for R, _, _ in scal]
        # M = V V' with V's columns svec(R' A_i R) per block (and sqrt(x/s) A_l)
        used = [(blk, R) for blk, (R, _, _) in zip(blocks, scal) if len(blk.rows)]
        V = np.zeros((m, sum(tri_size(blk.n) for blk, _ in used) + nl))
        col = 0
        for blk, R in used:
            Vb = V[:, col : col + tri_size(blk.n)]
            blk.scaled_rows(R, Vb)
            col += tri_size(blk.n)
        if nl:
            V[:, col:] = (Al @ sp.diags(np.sqrt(xl / sl))).toarray()
        try:
            kkt_solve = _kkt_solver(V, Q1, Q2, Rf)
        except (la.LinAlgError, ValueError):
            log.warning("KKT factorisation failed at iteration %d", it)
            break

        def direction(targets, tl):
            """targets: per-block complementarity right-hand side in scaled space."""
            Rc = []
            for (R, _, lam), T in zip(scal, targets):
                U = 2.0 * T / (lam[:, None] + lam[None, :])
                Rc.append(R @ U @ R.T)
            rcl = tl / sl if nl else np.zeros(0)
            # r1 = rp - A_cone(Rc - W Rd W)
            tmp = [Rcj - Wj @ Rdj @ Wj for Rcj, Wj, Rdj in zip(Rc, W, rdb)]
            r1 = rp - apply_A_blocks(tmp)
            if nl:
                r1 -= Al @ (rcl - (xl / sl) * rdl)
            rhs = np.concatenate([r1, rdf])
            sol = kkt_solve(rhs)
            dy, dxf = sol[:m], sol[m:]
            dS = [Rdj - AT_block(blk, dy) for blk, Rdj in zip(blocks, rdb)]
            dX = [_sym(Rcj - Wj @ dSj @ Wj) for Rcj, Wj, dSj in zip(Rc, W, dS)]
            dsl = rdl - Al.T @ dy if nl else np.zeros(0)
            dxl = rcl - (xl / sl) * dsl if nl else np.zeros(0)
            return dxf, dxl, dX, dy, dsl, [_sym(d) for d in dS]

        def project(dxf, dxl, dX):
            """Remove the residual of ``A d = r_p`` left by the Schur solve (min-norm correction)."""
            if aat is None:
                return dxf, dxl, dX
            d = np.concatenate([dxf, dxl] + [_vech(dXj) for dXj in dX])
            e = rp - A @ d
            if not np.any(e):
                return dxf, dxl, dX
            d = d + A.T @ la.cho_solve(aat, e, check_finite=False)
            return d[:nf], d[nf : nf + nl], [_unvech(d[blk.sl], blk.n) for blk in blocks]

        def steps(dxl, dX, dsl, dS):
            ap = min([_max_step(Xj, dXj) for Xj, dXj in zip(X, dX)] + [np.inf])
            ad = min([_max_step(Sj, dSj) for Sj, dSj in zip(S, dS)] + [np.inf])
            if nl:
                neg = dxl < 0
                if neg.any():
                    ap = min(ap, np.min(-xl[neg] / dxl[neg]))
                neg = dsl < 0
                if neg.any():
                    ad = min(ad, np.min(-sl[neg] / dsl[neg]))
            return ap, ad

        # predictor
        lam2 = [-np.diag(lam**2) for _, _, lam in scal]
        dxf, dxl, dX, dy, dsl, dS = direction(lam2, -xl * sl)
        ap, ad = steps(dxl, dX, dsl, dS)
        ap, ad = min(1.0, ap), min(1.0, ad)
        comp_aff = float((xl + ap * dxl) @ (sl + ad * dsl)) + sum(
            float(np.sum((Xj + ap * dXj) * (Sj + ad * dSj))) for Xj, dXj, Sj, dSj in zip(X, dX, S, dS)
        )
        mu_aff = comp_aff / max(nu, 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector with second-order term
        targets = []
        for (R, Rinv, lam), dXj, dSj in zip(scal, dX, dS):
            dxs = Rinv @ dXj @ Rinv.T
            dzs = R.T @ dSj @ R
            cross = 0.5 * (dxs @ dzs + dzs @ dxs)
            targets.append(sigma * mu * np.eye(len(lam)) - np.diag(lam**2) - cross)
        tl = sigma * mu - xl * sl - dxl * dsl if nl else np.zeros(0)
        dxf, dxl, dX, dy, dsl, dS = direction(targets, tl)
        dxf, dxl, dX = project(dxf, dxl, dX)
        ap, ad = steps(dxl, dX, dsl, dS)
        ap = min(1.0, opts.step * ap)
        ad = min(1.0, opts.step * ad)
        # the primal step is blocked once the projected direction leaves the cone
        if min(ap, ad) < 1e-3:
            stall += 1
            if stall >= 5:
                log.info("step length stalled at iteration %d", it)
                break
        else:
            stall = 0
        X = [_sym(Xj + ap * dXj) for Xj, dXj in zip(X, dX)]
        S = [_sym(Sj + ad * dSj) for Sj, dSj in zip(S, dS)]
        xf = xf + ap * dxf
        xl = xl + ap * dxl
        y = y + ad * dy
        sl = sl + ad * dsl

    # --- unscale and report
    near = best is not None and (
        (best[0][0] == 0 and best[0][1] <= opts.near_tol) or (best[0][0] == 1 and best[0][1] <= opts.near_feas_tol)
    )
    if status == "numerical-failure" and near:
        status = "near-optimal"
        x, y = best[1], best[2]
    x_s = x
    x_out = colscale * x_s * bs
    y_out = Dr * y * cs
    y_rep = sgn * y_out
    res = residuals(prog, x_out, y_rep)
    return Solution(
        x=x_out,
        y=y_rep,
        status=status,
        primal_obj=float(prog.c @ x_out) + prog.offset,
        dual_obj=float(prog.b @ y_rep) + prog.offset,
        residuals=res,
        iterations=it,
        info={"backend": "ipm", "history": history, "solve_time": time.perf_counter() - t_start},
    )
