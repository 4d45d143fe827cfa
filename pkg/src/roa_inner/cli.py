"""Command-line interface: problem files in, result files out.

Problem files are YAML (see the bundled ``problems/*.yaml``); result files
are JSON with coefficients stored as ``[exponents, value]`` pairs.  Floats are
written with ``repr`` precision, so coefficients round-trip bit-exactly.

Exit codes: 0 success, 2 parse error, 3 solver failure, 4 validation failure.
"""
from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import click
import numpy as np
import yaml

from . import sim
from .moments import domain_from_dict
from .poly import Poly, PolySyntaxError, parse_poly
from .relax import (
    RelaxationResult,
    SystemSpec,
    degrees_for,
    order_for,
    running_min,
    solve_relaxation,
)

__version__ = "0.1.0"

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4
JOBS_ENV = "ROA_INNER_JOBS"
BUNDLED = ("cubic", "cubic_low", "vanderpol", "vanderpol_low", "static")

log = logging.getLogger("roa_inner")


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# problem files


@dataclass(frozen=True)
class DegreeRequest:
    """A hierarchy entry: a table degree ``d`` or an explicit ``(deg_w, deg_v)`` pair."""

    degree: int | None = None
    deg_w: int | None = None
    deg_v: int | None = None

    def resolve(self, spec: SystemSpec) -> tuple[int, int, int]:
        if self.degree is not None:
            return degrees_for(spec, self.degree)
        return order_for(spec, self.deg_w, self.deg_v), self.deg_w, self.deg_v

    def sort_key(self) -> tuple[int, int]:
        if self.degree is not None:
            return (self.degree, self.degree)
        return (self.deg_v, self.deg_w)

    def to_dict(self):
        if self.degree is not None:
            return self.degree
        return {"deg_w": self.deg_w, "deg_v": self.deg_v}

    @classmethod
    def parse(cls, item) -> "DegreeRequest":
        if isinstance(item, bool):
            raise ParseError(f"invalid degree entry {item!r}")
        if isinstance(item, int):
            if item < 1:
                raise ParseError("degrees must be positive")
            return cls(degree=item)
        if isinstance(item, dict) and "deg_v" in item:
            dv = item["deg_v"]
            dw = item.get("deg_w", dv)
            if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in (dv, dw)):
                raise ParseError(f"invalid degree entry {item!r}")
            return cls(deg_w=dw, deg_v=dv)
        raise ParseError(f"invalid degree entry {item!r}")


@dataclass
class ProblemFile:
    name: str
    spec: SystemSpec
    degrees: list[DegreeRequest]
    solver: dict = field(default_factory=dict)
    sampling: sim.SamplingPlan = field(default_factory=sim.SamplingPlan)
    raw: dict = field(default_factory=dict)


_REQUIRED = ("n", "dynamics", "g_X", "g_T", "T", "domain", "degrees")


def problem_from_dict(d: dict) -> ProblemFile:
    if not isinstance(d, dict):
        raise ParseError("problem file must be a mapping")
    missing = [k for k in _REQUIRED if k not in d]
    if missing:
        raise ParseError(f"problem file lacks {', '.join(missing)}")
    try:
        n = int(d["n"])
        dyn = d["dynamics"]
        if not isinstance(dyn, list):
            raise ParseError("dynamics must be a list of polynomial strings")
        f = [parse_poly(str(s), n, with_time=True) for s in dyn]
        gX = parse_poly(str(d["g_X"]), n, with_time=False)
        gT = parse_poly(str(d["g_T"]), n, with_time=False)
        dom = domain_from_dict(d["domain"])
        spec = SystemSpec(n, f, gX, gT, float(d["T"]), dom, str(d.get("name", "")))
        degs = d["degrees"]
        if not isinstance(degs, list) or not degs:
            raise ParseError("degree list must be nonempty")
        degrees = [DegreeRequest.parse(x) for x in degs]
        sampling = sim.SamplingPlan.from_dict(d.get("sampling") or {})
    except ParseError:
        raise
    except (PolySyntaxError, ValueError, TypeError, KeyError) as exc:
        raise ParseError(str(exc)) from exc
    solver = dict(d.get("solver") or {})
    return ProblemFile(str(d.get("name", "")), spec, degrees, solver, sampling, dict(d))


def load_problem(path) -> ProblemFile:
    """Load a problem from a YAML file or a bundled problem name."""
    text = _problem_text(path)
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from exc
    return problem_from_dict(d)


def _problem_text(path) -> str:
    p = Path(path)
    if p.exists():
        return p.read_text()
    name = str(path).replace("-", "_")
    if name in BUNDLED:
        return resources.files("roa_inner.problems").joinpath(f"{name}.yaml").read_text()
    raise ParseError(f"no problem file {path!r} (bundled: {', '.join(BUNDLED)})")


def bundled_problem(name: str) -> ProblemFile:
    return load_problem(name)


# ---------------------------------------------------------------------------
# result files


def poly_to_pairs(p: Poly) -> list:
    return [[list(a), c] for a, c in p.sorted_terms()]


def poly_from_pairs(pairs: list, nvars: int) -> Poly:
    terms = {}
    for a, c in pairs:
        a = tuple(int(e) for e in a)
        if len(a) != nvars:
            raise ParseError(f"exponent tuple {a} does not have {nvars} entries")
        terms[a] = float(c)
    return Poly(nvars, terms)


def record_from_result(req: DegreeRequest, res: RelaxationResult) -> dict:
    return {
        "degree": req.degree,
        "deg_w": res.deg_w,
        "deg_v": res.deg_v,
        "k": res.k,
        "d_opt": res.dual_opt,
        "p_opt": res.primal_opt,
        "status": res.status,
        "w": poly_to_pairs(res.w),
        "v": poly_to_pairs(res.v),
        "relative_error": None,
        "wall_time": res.wall_time,
        "residuals": {k: float(v) for k, v in res.residuals.items()},
    }


def failed_record(req: DegreeRequest, spec: SystemSpec, status: str, message: str) -> dict:
    k, dw, dv = req.resolve(spec)
    return {
        "degree": req.degree,
        "deg_w": dw,
        "deg_v": dv,
        "k": k,
        "d_opt": None,
        "p_opt": None,
        "status": status,
        "w": None,
        "v": None,
        "relative_error": None,
        "wall_time": 0.0,
        "error": message,
    }


def solved(rec: dict) -> bool:
    """True when the record carries certificates (failed solves store ``None``)."""
    return rec.get("w") is not None


def record_w(rec: dict, n: int) -> Poly:
    return poly_from_pairs(rec["w"], n)


def record_v(rec: dict, n: int) -> Poly:
    return poly_from_pairs(rec["v"], n + 1)


def save_result(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, allow_nan=True) + "\n")


def load_result(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ParseError(f"no result file {path!r}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid result file: {exc}") from exc
    if not isinstance(doc, dict) or "problem" not in doc or "records" not in doc:
        raise ParseError("result file lacks 'problem' or 'records'")
    return doc


def result_problem(doc: dict) -> ProblemFile:
    return problem_from_dict(doc["problem"])


# ---------------------------------------------------------------------------
# running solves


def _solve_one(args) -> dict:
    spec, req, solver = args
    opts = dict(solver)
    backend = opts.pop("backend", None)
    k, dw, dv = req.resolve(spec)
    try:
        res = solve_relaxation(spec, k, dw, dv, solver=backend, **opts)
    except RuntimeError as exc:
        return failed_record(req, spec, "numerical-failure", str(exc)[:500])
    return record_from_result(req, res)


def run_requests(prob: ProblemFile, reqs: list[DegreeRequest], jobs: int = 1) -> list[dict]:
    """Solve every request (in parallel up to ``jobs``) and return records sorted by degree."""
    reqs = sorted(reqs, key=DegreeRequest.sort_key)
    work = [(prob.spec, r, prob.solver) for r in reqs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as ex:
            return list(ex.map(_solve_one, work))
    return [_solve_one(w) for w in work]


def attach_volumes(prob: ProblemFile, records: list[dict], plan: sim.SamplingPlan | None = None) -> dict:
    """Fill ``relative_error`` per record; return the running-minimum summary."""
    plan = plan or prob.sampling
    ok = [r for r in records if solved(r)]
    for r in ok:
        est = sim.volume_error(prob.spec, record_w(r, prob.spec.n), plan)
        r["relative_error"] = est.relative_error
        r["violations"] = est.violations
    if not ok:
        return {}
    rm = running_min([_as_result(r, prob.spec.n) for r in ok])
    est = sim.volume_error(prob.spec, rm, plan)
    return {"relative_error": est.relative_error, "violations": est.violations, "vol_roa": est.vol_roa}


def _as_result(rec: dict, n: int) -> RelaxationResult:
    return RelaxationResult(
        rec["k"], rec["deg_w"], rec["deg_v"], record_w(rec, n), record_v(rec, n), rec["d_opt"], rec["p_opt"], rec["status"]
    )


def result_document(prob: ProblemFile, records: list[dict], seed: int, extra: dict | None = None) -> dict:
    doc = {
        "tool": "roa-inner",
        "version": __version__,
        "seed": seed,
        "problem": prob.raw,
        "records": records,
    }
    if extra:
        doc.update(extra)
    return doc


def validate_record(spec: SystemSpec, rec: dict, pts: np.ndarray, codes: np.ndarray, tol: float = 1e-6) -> dict:
    """Inner-ness and certificate sign checks of one record on labelled samples."""
    w = record_w(rec, spec.n)
    v = record_v(rec, spec.n)
    wv = w.eval_many(pts)
    viol = (codes == 0) & (wv < 1.0 - tol)
    scale = 1.0 + max((abs(c) for c in w.terms.values()), default=0.0)
    # w >= 0 and w >= v(0, .) + 1 on X; v(T, .) >= 0 outside the target
    v0 = v.fix_first(0.0).eval_many(pts)
    vT = v.fix_first(spec.T).eval_many(pts)
    outside_target = spec.g_T.eval_many(pts) <= 0.0
    checks = {
        "w_nonneg": float(wv.min()) if len(wv) else 0.0,
        "initial": float((wv - v0 - 1.0).min()) if len(wv) else 0.0,
        "terminal": float(vT[outside_target].min()) if outside_target.any() else 0.0,
    }
    feasible = all(val >= -tol * scale for val in checks.values())
    return {
        "deg_w": rec["deg_w"],
        "deg_v": rec["deg_v"],
        "violations": int(viol.sum()),
        "violation_points": pts[viol].tolist()[:20],
        "boundary_uncertain": int((codes == 2).sum()),
        "min_values": checks,
        "feasible": feasible,
        "pass": bool(feasible and not viol.any()),
    }


# ---------------------------------------------------------------------------
# click commands


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_problem_or_exit(path) -> ProblemFile:
    try:
        return load_problem(path)
    except ParseError as exc:
        _fail(EXIT_PARSE, str(exc))


def _load_result_or_exit(path) -> tuple[dict, ProblemFile]:
    try:
        doc = load_result(path)
        return doc, result_problem(doc)
    except ParseError as exc:
        _fail(EXIT_PARSE, str(exc))


def _parse_degrees(text: str) -> list[DegreeRequest]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            dw, dv = part.split(":", 1)
            out.append(DegreeRequest.parse({"deg_w": int(dw), "deg_v": int(dv)}))
        else:
            out.append(DegreeRequest.parse(int(part)))
    if not out:
        raise ParseError("degree list must be nonempty")
    return out


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.version_option(__version__)
def main(verbose: int):
    """Inner approximations of finite-time regions of attraction."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--problem", "problem_path", required=True, help="Problem YAML file or bundled name.")
@click.option("--degree", type=int, default=None, help="Table degree d (k = ceil(d/2)).")
@click.option("--deg-v", type=int, default=None, help="Explicit degree of v.")
@click.option("--deg-w", type=int, default=None, help="Explicit degree of w (defaults to --deg-v).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--volume/--no-volume", default=True, help="Estimate the relative volume error.")
def solve(problem_path, degree, deg_v, deg_w, out_path, volume):
    """Solve one relaxation and write a result file."""
    prob = _load_problem_or_exit(problem_path)
    if (degree is None) == (deg_v is None):
        _fail(EXIT_PARSE, "give exactly one of --degree or --deg-v")
    try:
        req = DegreeRequest.parse(degree) if degree is not None else DegreeRequest.parse(
            {"deg_v": deg_v, "deg_w": deg_w if deg_w is not None else deg_v}
        )
        req.resolve(prob.spec)
    except (ParseError, ValueError) as exc:
        _fail(EXIT_PARSE, str(exc))
    records = run_requests(prob, [req])
    extra = {}
    if volume and solved(records[0]):
        attach_volumes(prob, records)
    save_result(out_path, result_document(prob, records, prob.sampling.seed, extra))
    rec = records[0]
    click.echo(_record_line(rec))
    if rec["status"] not in ("optimal", "near-optimal"):
        sys.exit(EXIT_SOLVER)


def _record_line(rec: dict) -> str:
    err = rec.get("relative_error")
    err_s = "n/a" if err is None else f"{100 * err:.2f}%"
    d = rec["d_opt"]
    d_s = "n/a" if d is None else f"{d:.6f}"
    label = rec["degree"] if rec["degree"] is not None else f"w{rec['deg_w']}/v{rec['deg_v']}"
    return f"degree {label}: k={rec['k']} deg_w={rec['deg_w']} deg_v={rec['deg_v']} status={rec['status']} d*={d_s} error={err_s} time={rec['wall_time']:.1f}s"


@main.command()
@click.option("--problem", "problem_path", required=True)
@click.option("--degrees", default=None, help="Comma list of degrees or w:v pairs (defaults to the problem file).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--jobs", type=int, default=None, help=f"Parallel solves (default ${JOBS_ENV} or 1).")
@click.option("--volume/--no-volume", default=True)
def sweep(problem_path, degrees, out_path, jobs, volume):
    """Solve a list of degrees; records are merged in degree order."""
    prob = _load_problem_or_exit(problem_path)
    try:
        reqs = _parse_degrees(degrees) if degrees else list(prob.degrees)
        for r in reqs:
            r.resolve(prob.spec)
    except (ParseError, ValueError) as exc:
        _fail(EXIT_PARSE, str(exc))
    records = run_requests(prob, reqs, jobs or _default_jobs())
    extra = {}
    if volume:
        extra["running_min"] = attach_volumes(prob, records)
    save_result(out_path, result_document(prob, records, prob.sampling.seed, extra))
    for rec in records:
        click.echo(_record_line(rec))
    if extra.get("running_min"):
        click.echo(f"running minimum: error={100 * extra['running_min']['relative_error']:.2f}%")
    if any(r["status"] not in ("optimal", "near-optimal") for r in records):
        sys.exit(EXIT_SOLVER)


@main.command()
@click.option("--result", "result_path", required=True)
@click.option("--samples", type=int, default=10_000)
@click.option("--seed", type=int, default=0)
@click.option("--tol", type=float, default=1e-6, help="Inner-ness tolerance on w.")
def validate(result_path, samples, seed, tol):
    """Check certificates against the simulation oracle on random samples."""
    doc, prob = _load_result_or_exit(result_path)
    plan = sim.SamplingPlan("mc", samples=samples, seed=seed)
    pts, _ = plan.points(prob.spec)
    codes = sim.label_codes(prob.spec, pts)
    reports = []
    for rec in doc["records"]:
        if not solved(rec):
            continue
        try:
            reports.append(validate_record(prob.spec, rec, pts, codes, tol))
        except ParseError as exc:
            _fail(EXIT_PARSE, str(exc))
    out = {"samples": int(len(pts)), "seed": seed, "records": reports}
    click.echo(json.dumps(out, indent=1))
    if not reports or not all(r["pass"] for r in reports):
        sys.exit(EXIT_VALIDATION)


@main.command()
@click.option("--result", "result_path", required=True)
@click.option("--res", type=int, default=400, help="Grid points per axis.")
@click.option("--record", "index", type=int, default=-1, help="Record index (default: last).")
@click.option("--labels/--no-labels", default=True, help="Add oracle labels to each point.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def grid(result_path, res, index, labels, out_path):
    """Write a grid of w values (and oracle labels) as CSV for plotting."""
    doc, prob = _load_result_or_exit(result_path)
    recs = [r for r in doc["records"] if solved(r)]
    if not recs:
        _fail(EXIT_SOLVER, "result file has no solved records")
    try:
        rec = recs[index]
    except IndexError:
        _fail(EXIT_PARSE, f"no record {index}")
    w = record_w(rec, prob.spec.n)
    plan = sim.SamplingPlan("grid", res=res)
    pts, weight = plan.points(prob.spec)
    codes = sim.label_codes(prob.spec, pts) if labels else np.full(len(pts), -1)
    est = sim.RoaEstimate(plan, pts, codes, w.eval_many(pts), weight, 0.0, 0.0, 0.0, 0.0, 0, 0)
    if labels:
        sim.write_csv(out_path, est)
    else:
        _write_plain_csv(out_path, pts, est.w_values)
    click.echo(f"wrote {len(pts)} points to {out_path}")


def _write_plain_csv(path, pts, wv):
    import csv

    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([*(f"x{i + 1}" for i in range(pts.shape[1])), "w"])
        for p, v in zip(pts, wv):
            wr.writerow([*(repr(float(c)) for c in p), repr(float(v))])


@main.command()
@click.option("--result", "result_path", required=True)
@click.option("--grid-res", type=int, default=None, help="Use a cell-centred grid with this many points per axis.")
@click.option("--samples", type=int, default=None, help="Use seeded Monte Carlo with this many points.")
@click.option("--seed", type=int, default=0)
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False), help="Also write labelled samples of the last record.")
def volume(result_path, grid_res, samples, seed, csv_path):
    """Relative volume errors of every record (and their running minimum)."""
    doc, prob = _load_result_or_exit(result_path)
    if grid_res is not None and samples is not None:
        _fail(EXIT_PARSE, "give at most one of --grid-res and --samples")
    if grid_res is not None:
        plan = sim.SamplingPlan("grid", res=grid_res)
    elif samples is not None:
        plan = sim.SamplingPlan("mc", samples=samples, seed=seed)
    else:
        plan = prob.sampling
    recs = [r for r in doc["records"] if solved(r)]
    if not recs:
        _fail(EXIT_SOLVER, "result file has no solved records")
    rows = []
    est = None
    for rec in recs:
        est = sim.volume_error(prob.spec, record_w(rec, prob.spec.n), plan)
        rows.append({"deg_w": rec["deg_w"], "deg_v": rec["deg_v"], **est.summary()})
    summary = {"plan": plan.to_dict(), "records": rows}
    if len(recs) > 1:
        rm = running_min([_as_result(r, prob.spec.n) for r in recs])
        summary["running_min"] = sim.volume_error(prob.spec, rm, plan).summary()
    if csv_path and est is not None:
        sim.write_csv(csv_path, est)
    click.echo(json.dumps(summary, indent=1))


if __name__ == "__main__":  # pragma: no cover
    main()
