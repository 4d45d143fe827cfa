import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from roa_inner import cli
from roa_inner.poly import Poly


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def cubic_result(tmp_path_factory):
    path = tmp_path_factory.mktemp("res") / "cubic10.json"
    out = CliRunner().invoke(cli.main, ["solve", "--problem", "cubic", "--degree", "10", "--out", str(path)])
    assert out.exit_code == 0, out.output
    return path


def strip_times(doc):
    for r in doc["records"]:
        r.pop("wall_time")
    return doc


@pytest.mark.parametrize("name", cli.BUNDLED)
def test_bundled_problems_parse(name):
    prob = cli.load_problem(name)
    assert prob.degrees and prob.spec.n in (1, 2)
    assert prob.name.replace("-", "_") == name


def test_parse_errors_exit_2(runner, tmp_path):
    bad = tmp_path / "bad.yaml"
    raw = yaml.safe_load(open(cli.__file__.replace("cli.py", "problems/cubic.yaml")))
    raw["dynamics"] = ["x1 +"]
    bad.write_text(yaml.safe_dump(raw))
    out = runner.invoke(cli.main, ["solve", "--problem", str(bad), "--degree", "8", "--out", str(tmp_path / "r.json")])
    assert out.exit_code == cli.EXIT_PARSE
    out = runner.invoke(cli.main, ["solve", "--problem", "nope", "--degree", "8", "--out", str(tmp_path / "r.json")])
    assert out.exit_code == cli.EXIT_PARSE
    out = runner.invoke(cli.main, ["solve", "--problem", "cubic", "--out", str(tmp_path / "r.json")])
    assert out.exit_code == cli.EXIT_PARSE
    out = runner.invoke(cli.main, ["validate", "--result", str(tmp_path / "missing.json")])
    assert out.exit_code == cli.EXIT_PARSE
    with pytest.raises(cli.ParseError):
        cli.problem_from_dict({**raw, "degrees": []})
    with pytest.raises(cli.ParseError):
        cli.DegreeRequest.parse(True)


def test_solve_writes_a_record(cubic_result):
    doc = cli.load_result(cubic_result)
    (rec,) = doc["records"]
    assert rec["status"] in ("optimal", "near-optimal")
    assert (rec["k"], rec["deg_w"], rec["deg_v"]) == (6, 10, 10)
    assert 0.0 < rec["relative_error"] < 1.0 and rec["violations"] == 0
    assert all(len(e) == 1 for e, _ in rec["w"]) and all(len(e) == 2 for e, _ in rec["v"])


def test_result_round_trip_is_bit_exact(cubic_result, tmp_path):
    doc = cli.load_result(cubic_result)
    again = tmp_path / "again.json"
    cli.save_result(again, doc)
    assert cli.load_result(again) == doc
    w = cli.record_w(doc["records"][0], 1)
    assert cli.poly_from_pairs(cli.poly_to_pairs(w), 1) == w


def test_solve_is_deterministic(runner, cubic_result, tmp_path):
    path = tmp_path / "b.json"
    out = runner.invoke(cli.main, ["solve", "--problem", "cubic", "--degree", "10", "--out", str(path)])
    assert out.exit_code == 0
    assert strip_times(cli.load_result(path)) == strip_times(cli.load_result(cubic_result))


def test_validate_passes_on_a_solved_result(runner, cubic_result):
    out = runner.invoke(cli.main, ["validate", "--result", str(cubic_result), "--samples", "2000"])
    assert out.exit_code == 0, out.output
    rep = json.loads(out.output)["records"][0]
    assert rep["violations"] == 0 and rep["feasible"]


def test_validate_flags_a_constant_certificate(runner, cubic_result, tmp_path):
    doc = cli.load_result(cubic_result)
    doc["records"][0]["w"] = cli.poly_to_pairs(Poly.const(1, 0.0))
    bad = tmp_path / "bad.json"
    cli.save_result(bad, doc)
    out = runner.invoke(cli.main, ["validate", "--result", str(bad), "--samples", "2000"])
    assert out.exit_code == cli.EXIT_VALIDATION
    rep = json.loads(out.output)["records"][0]
    assert rep["violations"] > 0
    assert all(abs(p[0]) > 0.49 for p in rep["violation_points"])


def test_grid_and_volume(runner, cubic_result, tmp_path):
    csv_path = tmp_path / "g.csv"
    out = runner.invoke(cli.main, ["grid", "--result", str(cubic_result), "--res", "50", "--out", str(csv_path)])
    assert out.exit_code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "x1,w,label" and len(lines) == 51
    out = runner.invoke(cli.main, ["grid", "--result", str(cubic_result), "--res", "20", "--no-labels", "--out", str(csv_path)])
    assert csv_path.read_text().splitlines()[0] == "x1,w"
    out = runner.invoke(cli.main, ["volume", "--result", str(cubic_result), "--grid-res", "2001"])
    assert out.exit_code == 0
    summary = json.loads(out.output)
    rec = cli.load_result(cubic_result)["records"][0]
    assert summary["records"][0]["relative_error"] == pytest.approx(rec["relative_error"], abs=1e-12)
    out = runner.invoke(cli.main, ["volume", "--result", str(cubic_result), "--grid-res", "5", "--samples", "5"])
    assert out.exit_code == cli.EXIT_PARSE


def test_sweep_with_jobs_is_ordered_and_deterministic(runner, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    out = runner.invoke(cli.main, ["sweep", "--problem", "cubic", "--degrees", "10,8", "--out", str(a), "--jobs", "2"])
    assert out.exit_code == 0, out.output
    out = runner.invoke(cli.main, ["sweep", "--problem", "cubic", "--degrees", "8,10", "--out", str(b), "--jobs", "1"])
    assert out.exit_code == 0
    da, db = strip_times(cli.load_result(a)), strip_times(cli.load_result(b))
    assert da == db
    ds = [r["d_opt"] for r in da["records"]]
    assert [r["degree"] for r in da["records"]] == [8, 10]
    assert ds[1] <= ds[0] * (1 + 1e-6)
    errs = [r["relative_error"] for r in da["records"]]
    assert da["running_min"]["relative_error"] <= min(errs) + 1e-12
    assert np.isfinite(da["running_min"]["vol_roa"])


def test_explicit_degree_pair(runner, tmp_path):
    path = tmp_path / "low.json"
    out = runner.invoke(
        cli.main, ["solve", "--problem", "cubic_low", "--deg-v", "8", "--deg-w", "4", "--out", str(path), "--no-volume"]
    )
    assert out.exit_code == 0, out.output
    rec = cli.load_result(path)["records"][0]
    assert (rec["deg_w"], rec["deg_v"]) == (4, 8) and rec["relative_error"] is None
