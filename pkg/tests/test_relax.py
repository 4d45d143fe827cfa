import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roa_inner import sim
from roa_inner.moments import Box
from roa_inner.poly import Poly, parse_poly
from roa_inner.relax import (
    StateScaling,
    SystemSpec,
    build_dual,
    build_primal,
    degrees_for,
    identity_residuals,
    order_for,
    running_min,
    solve_degree,
    solve_relaxation,
)

from conftest import make_cubic

# Finite-time ROA of the cubic for T = 10: x(10) = 0.3 from x0 = +-0.4970319947...,
# found with a tight-tolerance adaptive integrator (scipy solve_ivp, rtol 1e-12)
CUBIC_ROA_LENGTH = 0.9940639895600969


@pytest.fixture(scope="module")
def cubic12():
    return solve_degree(make_cubic(), 12)


def test_degree_convention(cubic, vdp, static):
    assert degrees_for(cubic, 16) == (9, 16, 16)
    assert degrees_for(vdp, 9) == (6, 9, 9)
    assert degrees_for(vdp, 12) == (7, 12, 12)
    assert degrees_for(static, 16) == (8, 16, 16)
    assert order_for(cubic, 6, 16) == 9
    with pytest.raises(ValueError):
        degrees_for(cubic, 0)


def test_order_too_small_is_rejected(cubic):
    with pytest.raises(ValueError):
        build_dual(cubic, 4, 8, 8)
    with pytest.raises(ValueError):
        build_primal(cubic, 4, 10, 6)


def test_spec_validation():
    f = [parse_poly("x1", 1)]
    g = parse_poly("1 - x1^2", 1, False)
    with pytest.raises(ValueError):
        SystemSpec(1, f, g, g, 0.0, Box((-1,), (1,)))
    with pytest.raises(ValueError):
        SystemSpec(2, f, g, g, 1.0, Box((-1,), (1,)))
    with pytest.raises(ValueError):
        SystemSpec(1, [parse_poly("x1", 1, False)], g, g, 1.0, Box((-1,), (1,)))


@given(
    st.floats(-2, 2),
    st.floats(0.1, 3),
    st.floats(-1, 1),
    st.floats(-1, 1),
)
def test_state_scaling_round_trip(c, h, u, s):
    sc = StateScaling((c,), (h,))
    p = parse_poly("1 + 2*x1 - 3*x1^3", 1, with_time=False)
    q = sc.to_unit(p)
    assert math.isclose(q.eval([u]), p.eval([c + h * u]), rel_tol=1e-9, abs_tol=1e-9)
    assert sc.from_unit(q).allclose(p, atol=1e-9)
    v = parse_poly("t*x1^2 - x1", 1)
    assert sc.from_unit(sc.to_unit(v, offset=1), offset=1).allclose(v, atol=1e-9)


def test_normalized_system_is_conjugate(cubic_low):
    ns = cubic_low.normalized()
    sc = cubic_low.state_scaling()
    assert ns.domain == Box((-1.0,), (1.0,))
    # u' = f(t, c + h u) / h
    for u in (-0.9, 0.1, 0.6):
        x = sc.center[0] + sc.half_width[0] * u
        lhs = ns.f[0].eval([2.0, u])
        rhs = cubic_low.f[0].eval([2.0, x]) / sc.half_width[0]
        assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-14)
        # constraint sets coincide up to positive scaling
        assert np.sign(ns.g_X.eval([u])) == np.sign(cubic_low.g_X.eval([x]))


def test_certificate_identities_hold(cubic12, cubic):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(100, 2))
    res = identity_residuals(cubic, cubic12, pts)
    assert max(res.values()) <= 1e-6
    assert cubic12.residuals["gram_min_eig"] >= -1e-8


def test_certificate_inequalities_on_samples(cubic12, cubic):
    xs = np.linspace(-1, 1, 401).reshape(-1, 1)
    w = cubic12.w.eval_many(xs)
    v0 = cubic12.v.fix_first(0.0).eval_many(xs)
    assert w.min() >= -1e-7
    assert (w - v0 - 1).min() >= -1e-7
    # v >= 0 on the boundary x = +-1 for t in [0, T]
    ts = np.linspace(0, cubic.T, 51)
    for xb in (-1.0, 1.0):
        vb = cubic12.v.eval_many(np.column_stack([ts, np.full_like(ts, xb)]))
        assert vb.min() >= -1e-6


def test_complement_bound(cubic12, cubic):
    # d* >= lambda(X_0^c) = lambda(X) - lambda(X_0)
    assert cubic12.dual_opt >= 2.0 - CUBIC_ROA_LENGTH - 1e-6


def test_inner_approximation_is_inside_roa(cubic12, cubic):
    est = sim.volume_error(cubic, cubic12.w, sim.SamplingPlan("grid", res=2001))
    assert est.violations == 0
    assert 0.0 < est.relative_error < 1.0


def test_forms_agree_and_gap_closes(cubic):
    a = solve_degree(cubic, 10, form="sos")
    b = solve_degree(cubic, 10, form="moment")
    assert abs(a.dual_opt - b.dual_opt) <= 1e-5 * (1 + abs(a.dual_opt))
    for r in (a, b):
        assert abs(r.primal_opt - r.dual_opt) <= 1e-4 * (1 + abs(r.dual_opt))


def test_normalization_does_not_change_the_optimum(cubic_low):
    k = order_for(cubic_low, 4, 8)
    a = solve_relaxation(cubic_low, k, 4, 8, normalize=True)
    b = solve_relaxation(cubic_low, k, 4, 8, normalize=False)
    assert abs(a.dual_opt - b.dual_opt) <= 1e-5 * (1 + abs(a.dual_opt))
    xs = np.linspace(-0.7, 0.7, 51).reshape(-1, 1)
    assert np.allclose(a.w.eval_many(xs), b.w.eval_many(xs), atol=1e-3)


def test_hierarchy_is_monotone(cubic, cubic12):
    ds = [solve_degree(cubic, d).dual_opt for d in (8, 10)] + [cubic12.dual_opt]
    assert all(b <= a * (1 + 1e-6) for a, b in zip(ds, ds[1:]))


def test_running_min_is_below_each(cubic, cubic12):
    r10 = solve_degree(cubic, 10)
    rm = running_min([r10, cubic12])
    xs = np.linspace(-1, 1, 101).reshape(-1, 1)
    assert np.all(rm.eval_many(xs) <= np.minimum(r10.w.eval_many(xs), cubic12.w.eval_many(xs)) + 1e-15)
    with pytest.raises(ValueError):
        running_min([])


def test_static_dynamics_recover_the_target(static):
    res = solve_degree(static, 16)
    xs = np.linspace(-1, 1, 4001).reshape(-1, 1)
    inner = res.inner_mask(xs)
    vol = inner.mean() * 2.0
    assert 0.0 < vol <= 0.6
    # the inner set lies inside the target [-0.3, 0.3]
    assert np.all(np.abs(xs[inner, 0]) < 0.3)


def test_constant_certificate_is_not_inner(cubic):
    # w = 0 claims the whole constraint set; the oracle flags points outside the ROA
    est = sim.volume_error(cubic, Poly.const(1, 0.0), sim.SamplingPlan("grid", res=2001))
    assert est.violations > 0
