import os

import pytest
from hypothesis import HealthCheck, settings

from roa_inner.moments import Ball, Box
from roa_inner.poly import parse_poly
from roa_inner.relax import SystemSpec

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_cubic(lo: float = -1.0, hi: float = 1.0) -> SystemSpec:
    return SystemSpec(
        1,
        [parse_poly("x1*(x1-0.5)*(x1+0.5)", 1)],
        parse_poly(f"{hi * hi} - x1^2", 1, False),
        parse_poly("0.09 - x1^2", 1, False),
        10.0,
        Box((lo,), (hi,)),
        "cubic",
    )


def make_vdp() -> SystemSpec:
    return SystemSpec(
        2,
        [parse_poly("-2*x2", 2), parse_poly("0.8*x1 + 10*(x1^2 - 0.21)*x2", 2)],
        parse_poly("1.21 - x1^2 - x2^2", 2, False),
        parse_poly("0.25 - x1^2 - x2^2", 2, False),
        1.0,
        Ball((0.0, 0.0), 1.1),
        "vanderpol",
    )


def make_static() -> SystemSpec:
    return SystemSpec(
        1,
        [parse_poly("0", 1)],
        parse_poly("1 - x1^2", 1, False),
        parse_poly("0.09 - x1^2", 1, False),
        1.0,
        Box((-1.0,), (1.0,)),
        "static",
    )


@pytest.fixture
def cubic():
    return make_cubic()


@pytest.fixture
def cubic_low():
    return make_cubic(-0.7, 0.7)


@pytest.fixture
def vdp():
    return make_vdp()


@pytest.fixture
def static():
    return make_static()


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
