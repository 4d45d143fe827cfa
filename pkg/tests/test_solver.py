import numpy as np
import pytest
import scipy.sparse as sp

from roa_inner.conic import ConicProgram, ProgramBuilder, dump_program, load_program
from roa_inner.poly import parse_poly
from roa_inner.solver import BACKENDS, solve
from roa_inner.sos import LinPoly, emit, match_identity, sos_poly


def one_by_one():
    """min x s.t. x >= 0 as a 1x1 PSD block, with a vacuous row."""
    return ConicProgram(0, 0, [1], sp.csr_matrix((1, 1)), np.zeros(1), np.array([1.0]))


def corner_2x2():
    """min Q12 s.t. Q11 = 1, Q22 = 1, Q PSD  -> -1."""
    bld = ProgramBuilder()
    k = bld.add_psd("Q", 2)
    bld.add_row({("psd", k, 0, 0): 1.0}, 1.0)
    bld.add_row({("psd", k, 1, 1): 1.0}, 1.0)
    bld.set_objective({("psd", k, 0, 1): 1.0})
    return bld.build()


def sos_lower_bound():
    """max gamma s.t. x^4 - 3x^2 + 2 - gamma is SOS."""
    p = parse_poly("x1^4 - 3*x1^2 + 2", 1, with_time=False)
    bld = ProgramBuilder()
    (g,) = bld.add_free("gamma", 1)
    blk = sos_poly(bld, "s", 1, 2)
    lhs = LinPoly.from_poly(p) - LinPoly(1, {(0,): {g: 1.0}})
    emit(bld, "id", match_identity(lhs, [blk.linpoly()], 4))
    bld.set_objective({g: 1.0})
    return bld.build(sense="max")


def calculus_minimum():
    # oracle: d/dx (x^4 - 3x^2 + 2) = 0 at x^2 = 3/2, value 9/4 - 9/2 + 2
    return 1.5**2 - 3 * 1.5 + 2


def test_scalar_psd_block():
    sol = solve(one_by_one())
    assert sol.status == "optimal"
    assert abs(sol.primal_obj) < 1e-7


def test_two_by_two_corner():
    sol = solve(corner_2x2())
    assert sol.status == "optimal"
    assert abs(sol.primal_obj + 1.0) < 1e-7
    assert abs(sol.dual_obj + 1.0) < 1e-7


def test_sos_lower_bound_matches_calculus():
    sol = solve(sos_lower_bound())
    assert sol.status == "optimal"
    assert abs(sol.primal_obj - calculus_minimum()) < 1e-7
    assert abs(calculus_minimum() + 0.25) < 1e-15


@pytest.mark.parametrize("make", [one_by_one, corner_2x2, sos_lower_bound])
def test_solution_invariants(make):
    prog = make()
    a, b = solve(prog), solve(prog)
    # determinism
    assert a.primal_obj == b.primal_obj and a.dual_obj == b.dual_obj
    assert np.array_equal(a.x, b.x)
    # weak duality within tolerance and PSD blocks
    sgn = 1.0 if prog.sense == "min" else -1.0
    assert sgn * (a.primal_obj - a.dual_obj) >= -1e-7
    for j in range(len(prog.psd_orders)):
        assert np.linalg.eigvalsh(prog.block_matrix(a.x, j)).min() >= -1e-8
    assert a.residuals["primal_eq"] <= 1e-8
    assert a.residuals["gap"] <= 1e-8


def test_infeasible_program_is_reported():
    # Q PSD with Q11 = -1
    bld = ProgramBuilder()
    k = bld.add_psd("Q", 1)
    bld.add_row({("psd", k, 0, 0): 1.0}, -1.0)
    bld.set_objective({("psd", k, 0, 0): 1.0})
    sol = solve(bld.build())
    assert sol.status in ("infeasible", "numerical-failure")
    assert "history" in sol.info


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve(corner_2x2(), backend="nope")


def test_program_dump_round_trip(tmp_path):
    prog = sos_lower_bound()
    path = tmp_path / "p.txt"
    dump_program(prog, path)
    back = load_program(path)
    assert back.sense == prog.sense and back.psd_orders == prog.psd_orders
    assert np.array_equal(back.b, prog.b) and np.array_equal(back.c, prog.c)
    assert (back.A != prog.A).nnz == 0
    assert abs(solve(back).primal_obj - solve(prog).primal_obj) < 1e-10


@pytest.mark.skipif("clarabel" not in BACKENDS, reason="backend not registered")
def test_clarabel_backend_agrees():
    pytest.importorskip("clarabel")
    for make, ref in [(corner_2x2, -1.0), (sos_lower_bound, -0.25)]:
        sol = solve(make(), backend="clarabel")
        assert sol.status == "optimal"
        assert abs(sol.primal_obj - ref) < 1e-6
