"""Adapter to the Clarabel conic solver (optional cross-check backend)."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..conic import ConicProgram, tri_size
from . import Solution, SolverOptions, residuals


def _svec_map(n: int, offset: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows of the map vech(X) -> Clarabel svec (column-major upper triangle, sqrt2 off-diagonal)."""
    rows, cols, vals = [], [], []
    r = 0
    for j in range(n):
        for i in range(j + 1):
            rows.append(r)
            # our vech column for (i, j), i <= j, row-major
            cols.append(offset + i * n - i * (i - 1) // 2 + (j - i))
            vals.append(1.0 if i == j else np.sqrt(2.0))
            r += 1
    return np.array(rows), np.array(cols), np.array(vals)


def solve_clarabel(prog: ConicProgram, opts: SolverOptions) -> Solution:
    import clarabel

    sgn = 1.0 if prog.sense == "min" else -1.0
    N = prog.n_vars
    m = prog.n_rows
    blocks = [sp.csc_matrix(prog.A)]
    cones = [clarabel.ZeroConeT(m)]
    rhs = [prog.b]
    if prog.n_nonneg:
        sel = sp.csc_matrix(
            (-np.ones(prog.n_nonneg), (np.arange(prog.n_nonneg), prog.n_free + np.arange(prog.n_nonneg))),
            shape=(prog.n_nonneg, N),
        )
        blocks.append(sel)
        cones.append(clarabel.NonnegativeConeT(prog.n_nonneg))
        rhs.append(np.zeros(prog.n_nonneg))
    for off, n in zip(prog.block_offsets(), prog.psd_orders):
        r, c, v = _svec_map(n, off)
        blocks.append(sp.csc_matrix((-v, (r, c)), shape=(tri_size(n), N)))
        cones.append(clarabel.PSDTriangleConeT(n))
        rhs.append(np.zeros(tri_size(n)))
    A = sp.vstack(blocks).tocsc()
    b = np.concatenate(rhs)
    P = sp.csc_matrix((N, N))
    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.tol_gap_abs = opts.gap_tol
    settings.tol_gap_rel = opts.gap_tol
    settings.tol_feas = opts.feas_tol
    settings.max_iter = opts.max_iter
    settings.presolve_enable = False
    sol = clarabel.DefaultSolver(P, sgn * prog.c, A, b, cones, settings).solve()
    status = str(sol.status)
    mapped = {
        "Solved": "optimal",
        "AlmostSolved": "near-optimal",
        "PrimalInfeasible": "infeasible",
        "AlmostPrimalInfeasible": "infeasible",
        "DualInfeasible": "unbounded",
        "AlmostDualInfeasible": "unbounded",
    }.get(status, "numerical-failure")
    x = np.array(sol.x)
    z = np.array(sol.z)
    y = -sgn * z[:m]
    res = residuals(prog, x, y)
    return Solution(
        x=x,
        y=y,
        status=mapped,
        primal_obj=float(prog.c @ x) + prog.offset,
        dual_obj=float(prog.b @ y) + prog.offset,
        residuals=res,
        iterations=int(sol.iterations),
        info={"backend": "clarabel", "raw_status": status, "solve_time": sol.solve_time},
    )
