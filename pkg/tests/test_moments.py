import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roa_inner.moments import (
    Ball,
    Box,
    dirac_moments,
    domain_from_dict,
    lebesgue_moments,
    localizing_matrix,
    moment_matrix,
)
from roa_inner.poly import basis, parse_poly

N_MC = 200_000


def mc_moments(dom, n, maxdeg, seed):
    """Monte Carlo oracle: uniform samples of the bounding box, masked to the domain."""
    rng = np.random.default_rng(seed)
    lo, hi = dom.bounding_box()
    pts = lo + (hi - lo) * rng.random((N_MC, n))
    inside = dom.contains(pts)
    vol_box = float(np.prod(hi - lo))
    out = {}
    for a in basis(n, maxdeg):
        vals = np.prod(pts ** np.array(a), axis=1) * inside * vol_box
        out[a] = (vals.mean(), vals.std(ddof=1) / math.sqrt(N_MC))
    return out


DOMAINS = [
    Box((-1.0,), (1.0,)),
    Box((-0.7,), (0.4,)),
    Box((-1.0, 0.0), (0.5, 2.0)),
    Ball((0.0, 0.0), 1.1),
    Ball((0.3, -0.2), 0.8),
    Box((-1.0, -1.0, -0.5), (1.0, 0.5, 1.0)),
    Ball((0.1, 0.0, -0.1), 0.9),
]


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: type(d).__name__ + str(d.dim))
def test_lebesgue_moments_agree_with_monte_carlo(dom):
    n = dom.dim
    maxdeg = 8
    exact = lebesgue_moments(dom, n, maxdeg)
    mc = mc_moments(dom, n, maxdeg, seed=n)
    for a, (mean, se) in mc.items():
        assert abs(exact[a] - mean) <= 3 * se + 1e-12, (a, exact[a], mean, se)


def test_degree_eight_three_dimensional_moments():
    dom = Box((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    exact = lebesgue_moments(dom, 3, 8)
    # closed form on the cube: prod of 2/(a+1) for even a, zero otherwise
    for a in basis(3, 8):
        ref = math.prod(0.0 if ai % 2 else 2.0 / (ai + 1) for ai in a)
        assert math.isclose(exact[a], ref, abs_tol=1e-14)


def test_ball_mass_and_second_moment():
    dom = Ball((0.0, 0.0), 1.1)
    y = lebesgue_moments(dom, 2, 2)
    assert math.isclose(y.mass, math.pi * 1.21, rel_tol=1e-14)
    # int x^2 over a disk of radius R = pi R^4 / 4
    assert math.isclose(y[(2, 0)], math.pi * 1.1**4 / 4, rel_tol=1e-14)


@pytest.mark.parametrize("dom", DOMAINS[:5], ids=str)
def test_moment_and_localizing_matrices_are_psd(dom):
    n = dom.dim
    y = lebesgue_moments(dom, n, 8)
    assert np.linalg.eigvalsh(moment_matrix(y, 4)).min() > -1e-12
    lo, hi = dom.bounding_box()
    # product of the interval constraints is nonnegative on the box
    g = parse_poly(f"({hi[0]} - x1)*(x1 - {lo[0]})", n, with_time=False)
    assert np.linalg.eigvalsh(localizing_matrix(g, y, 4)).min() > -1e-12


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=10))
def test_dirac_moments_integrate_polynomials(xs):
    pts = np.array(xs).reshape(-1, 1)
    y = dirac_moments(pts, 4)
    p = parse_poly("1 - 2*x1 + x1^3", 1, with_time=False)
    assert math.isclose(y.integrate(p), float(np.mean(p.eval_many(pts))), abs_tol=1e-12)


def test_domain_validation_and_round_trip():
    with pytest.raises(ValueError):
        Box((1.0,), (0.0,))
    with pytest.raises(ValueError):
        Ball((0.0,), 0.0)
    for dom in DOMAINS:
        assert domain_from_dict(dom.to_dict()) == dom
    with pytest.raises(ValueError):
        domain_from_dict({"kind": "simplex"})


def test_localizer_order_too_small():
    y = lebesgue_moments(Box((-1.0,), (1.0,)), 1, 4)
    with pytest.raises(ValueError):
        localizing_matrix(parse_poly("x1^6", 1, with_time=False), y, 2)
