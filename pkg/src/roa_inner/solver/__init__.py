"""Conic solvers for :class:`~roa_inner.conic.ConicProgram`.

The built-in dense interior-point method is the default backend.  Other
backends plug in through :data:`BACKENDS`; each takes ``(program, options)``
and returns a :class:`Solution`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..conic import ConicProgram

STATUSES = ("optimal", "near-optimal", "infeasible", "unbounded", "numerical-failure")


@dataclass
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    near_tol: float = 1e-6
    near_feas_tol: float = 1e-4
    max_iter: int = 200
    step: float = 0.98
    scale_rows: bool = True
    degree_scaling: bool = False
    verbose: bool = False


@dataclass
class Solution:
    """Primal point ``x``, equality multipliers ``y`` and objective values.

    Objectives are reported in the program's own sense: ``primal_obj`` is
    ``c @ x + offset`` and ``dual_obj`` is ``b @ y + offset``.
    """

    x: np.ndarray
    y: np.ndarray
    status: str
    primal_obj: float
    dual_obj: float
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def dual_multipliers(self) -> np.ndarray:
        return self.y


def _ipm(prog: ConicProgram, opts: SolverOptions) -> Solution:
    from .ipm import solve_ipm

    return solve_ipm(prog, opts)


def _clarabel(prog: ConicProgram, opts: SolverOptions) -> Solution:
    from .clarabel_backend import solve_clarabel

    return solve_clarabel(prog, opts)


BACKENDS: dict[str, Callable[[ConicProgram, SolverOptions], Solution]] = {
    "ipm": _ipm,
    "clarabel": _clarabel,
}


def solve(prog: ConicProgram, backend: str | None = None, opts: SolverOptions | None = None, **kw) -> Solution:
    """Solve ``prog`` with the named backend (default: built-in ``ipm``)."""
    opts = replace(opts or SolverOptions(), **kw)
    name = backend or "ipm"
    if name not in BACKENDS:
        raise ValueError(f"unknown solver backend {name!r}; choose from {sorted(BACKENDS)}")
    return BACKENDS[name](prog, opts)


def residuals(prog: ConicProgram, x: np.ndarray, y: np.ndarray) -> dict:
    """Relative primal / dual infeasibility, gap and PSD eigenvalue extremes in original data."""
    sgn = 1.0 if prog.sense == "min" else -1.0
    rp = prog.A @ x - prog.b
    s = sgn * (prog.c - prog.A.T @ y)
    pobj = float(prog.c @ x)
    dobj = float(prog.b @ y)
    min_x = min((float(np.linalg.eigvalsh(prog.block_matrix(x, j)).min()) for j in range(len(prog.psd_orders))), default=0.0)
    min_s = np.inf
    offs = prog.block_offsets()
    from ..conic import tri_size, vech_to_mat

    for j, n in enumerate(prog.psd_orders):
        sv = s[offs[j] : offs[j] + tri_size(n)].copy()
        S = vech_to_mat(sv, n)
        S[~np.eye(n, dtype=bool)] *= 0.5
        min_s = min(min_s, float(np.linalg.eigvalsh(S).min()))
    free_res = s[: prog.n_free]
    return {
        "primal_eq": float(np.linalg.norm(rp) / (1.0 + np.linalg.norm(prog.b))),
        "dual_free": float(np.linalg.norm(free_res) / (1.0 + np.linalg.norm(prog.c))),
        "gap": abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj)),
        "min_eig_x": min_x,
        "min_eig_s": float(min_s) if np.isfinite(min_s) else 0.0,
    }


__all__ = ["Solution", "SolverOptions", "solve", "BACKENDS", "STATUSES", "residuals"]
