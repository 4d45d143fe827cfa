"""Shared helpers for the reproduction scripts."""
import json
import time

from roa_inner import sim
from roa_inner.cli import load_problem
from roa_inner.relax import SolverFailure, order_for, running_min, solve_relaxation


def run(problem: str, pairs, plan=None, out=None):
    """Solve ``(deg_w, deg_v)`` pairs of a bundled problem and print an error table."""
    prob = load_problem(problem)
    spec = prob.spec
    plan = plan or prob.sampling
    rows, solved = [], []
    print(f"{problem}: sampling {plan.to_dict()}")
    print(f"{'deg_w':>5} {'deg_v':>5} {'k':>3} {'d*':>12} {'status':>13} {'error %':>8} {'viol':>5} {'time s':>8}")
    for dw, dv in pairs:
        k = order_for(spec, dw, dv)
        t0 = time.perf_counter()
        try:
            res = solve_relaxation(spec, k, dw, dv, solver=prob.solver.get("backend"))
        except SolverFailure as exc:
            print(f"{dw:>5} {dv:>5} {k:>3} {'-':>12} {'failed':>13}   ({exc})")
            rows.append({"deg_w": dw, "deg_v": dv, "k": k, "status": "numerical-failure"})
            continue
        est = sim.volume_error(spec, res.w, plan)
        dt = time.perf_counter() - t0
        solved.append(res)
        rows.append({"deg_w": dw, "deg_v": dv, "k": k, "d_opt": res.dual_opt, "status": res.status,
                     "relative_error": est.relative_error, "violations": est.violations, "time": dt})
        print(f"{dw:>5} {dv:>5} {k:>3} {res.dual_opt:>12.6f} {res.status:>13} "
              f"{100 * est.relative_error:>8.2f} {est.violations:>5} {dt:>8.1f}")
    if len(solved) > 1:
        est = sim.volume_error(spec, running_min(solved), plan)
        print(f"running minimum: error {100 * est.relative_error:.2f}%, violations {est.violations}")
    if out:
        with open(out, "w") as fh:
            json.dump({"problem": problem, "rows": rows}, fh, indent=1)
    return rows
