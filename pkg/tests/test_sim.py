import csv

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from roa_inner import sim
from roa_inner.poly import Poly


def cubic_rhs(t, x):
    return x * (x - 0.5) * (x + 0.5)


def adaptive_final(x0, T=10.0):
    """High-accuracy adaptive oracle; stops at |x| = 1."""

    def hit(t, x):
        return 1.0 - x[0] ** 2

    hit.terminal = True
    return solve_ivp(cubic_rhs, (0, T), [x0], rtol=1e-12, atol=1e-14, events=hit)


def oracle_roa_half_length():
    # the ROA edge x0 satisfies x(10; x0) = 0.3 exactly
    return brentq(lambda x0: adaptive_final(x0).y[0, -1] - 0.3, 0.45, 0.5, xtol=1e-14)


def test_static_trajectory_is_constant(static):
    tr = sim.integrate(static, [0.2])
    assert tr.flag == sim.REACHED_T
    assert np.all(tr.states == 0.2)
    assert np.all(np.diff(tr.times) > 0) and tr.times[0] == 0.0 and tr.times[-1] == static.T


def test_cubic_decays_like_the_adaptive_oracle(cubic):
    tr = sim.integrate(cubic, [0.4])
    ref = adaptive_final(0.4)
    assert tr.flag == sim.REACHED_T
    assert abs(tr.final_state[0]) < 0.3
    assert abs(tr.final_state[0] - ref.y[0, -1]) < 1e-8


def test_cubic_hits_the_boundary_at_the_oracle_time(cubic):
    tr = sim.integrate(cubic, [0.6])
    ref = adaptive_final(0.6)
    assert tr.flag == sim.HIT_BOUNDARY
    assert tr.tau < 10.0
    assert abs(tr.tau - ref.t_events[0][0]) < 1e-6
    assert abs(cubic.g_X.eval(tr.final_state)) <= sim.EVENT_TOL


def test_integrate_preconditions(cubic):
    with pytest.raises(ValueError):
        sim.integrate(cubic, [1.5])
    with pytest.raises(ValueError):
        sim.integrate(cubic, [0.0], h=0.0)
    assert sim.integrate(cubic, [1.0]).flag == sim.HIT_BOUNDARY


def test_in_roa_examples(cubic, vdp):
    assert sim.in_roa(cubic, [0.0]) == sim.IN_ROA
    assert sim.in_roa(cubic, [0.7]) == sim.OUT_ROA
    assert sim.in_roa(cubic, [-0.7]) == sim.OUT_ROA
    assert sim.in_roa(vdp, [0.0, 0.0]) == sim.IN_ROA


def test_cubic_grid_roa_length_matches_adaptive_oracle(cubic):
    a = oracle_roa_half_length()
    vol, se = sim.roa_volume(cubic, sim.SamplingPlan("grid", res=2001))
    assert se == 0.0
    # one grid cell (2/2001) of slack on each edge
    assert abs(vol - 2 * a) <= 2 * 2.0 / 2001


def test_labels_are_stable_under_step_halving(vdp):
    pts, _ = sim.SamplingPlan("mc", samples=4000, seed=3).points(vdp)
    h = sim.default_step(vdp)
    a = sim.label_codes(vdp, pts, h)
    b = sim.label_codes(vdp, pts, h / 2)
    assert np.mean(a == b) >= 0.999


def test_constant_certificates(cubic):
    plan = sim.SamplingPlan("grid", res=2001)
    est = sim.volume_error(cubic, Poly.const(1, 2.0), plan)
    assert est.vol_inner == 0.0 and est.relative_error == 1.0 and est.violations == 0
    est = sim.volume_error(cubic, Poly.const(1, 0.0), plan)
    bad = est.violation_points()[:, 0]
    assert est.violations > 0 and np.all(np.abs(bad) > 0.49)


def test_volume_error_without_roa_is_rejected(cubic):
    from dataclasses import replace

    from roa_inner.poly import parse_poly

    empty_target = replace(cubic, g_T=parse_poly("-1 - x1^2", 1, False))
    with pytest.raises(ValueError):
        sim.volume_error(empty_target, Poly.const(1, 0.0), sim.SamplingPlan("grid", res=101))


def test_mc_standard_error_scales_as_inverse_sqrt(vdp):
    inside_target = lambda P: vdp.g_T.eval_many(P) > 0  # noqa: E731
    area = np.pi * 0.25
    for seed in range(3):
        ses = []
        for n in (2_500, 40_000):
            vol, se = sim.mc_volume(inside_target, vdp, n, seed)
            assert abs(vol - area) <= 4 * se
            ses.append(se)
        assert 3.0 <= ses[0] / ses[1] <= 5.3  # sqrt(16) = 4


def test_mc_labels_reproducible_from_seed(vdp):
    plan = sim.SamplingPlan("mc", samples=500, seed=11)
    a = sim.volume_error(vdp, Poly.const(2, 2.0), plan)
    b = sim.volume_error(vdp, Poly.const(2, 2.0), plan)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.codes, b.codes)
    assert 0.0 <= a.vol_roa <= np.pi * 1.21
    assert sim.SamplingPlan.from_dict(plan.to_dict()) == plan
    with pytest.raises(ValueError):
        sim.SamplingPlan("sobol")


def test_csv_output(tmp_path, cubic):
    est = sim.volume_error(cubic, Poly.const(1, 2.0), sim.SamplingPlan("grid", res=11))
    path = tmp_path / "grid.csv"
    sim.write_csv(path, est)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x1", "w", "label"]
    assert len(rows) == 1 + est.points.shape[0]
    assert {r[2] for r in rows[1:]} <= set(sim.LABELS)
    assert float(rows[6][0]) == pytest.approx(0.0, abs=1e-12)
