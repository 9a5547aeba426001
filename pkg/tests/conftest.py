from __future__ import annotations

import functools

import pytest

from jscatter import numeric as nm
from jscatter.direct import scattering_data
from jscatter.steplike import make_spec

# decimal strings keep the fixture coefficients exact at working precision
FREE = (["0.5"], ["0"])
STEP_LEFT = (["0.5"], ["1"])


def free_spec():
    return make_spec(FREE, FREE)


def bump_spec():
    """Free background with b(0) = 1; one eigenvalue at sqrt(2)."""
    return make_spec(FREE, FREE, {0: ("0.5", "1")})


def step_spec():
    """a = 1/2 everywhere, b = 1 on the left and 0 on the right."""
    return make_spec(STEP_LEFT, FREE)


def two_site_spec():
    return make_spec(STEP_LEFT, FREE, {-1: ("0.6", "0.8"), 0: ("0.4", "-0.3")})


def golden_spec():
    """Period-2 background with a Dirichlet point sitting on the edge E = 1."""
    bg = (["0.5", "0.5"], ["0", "1"])
    return make_spec(bg, bg, {1: ("0.7", "0.2")})


def mixed_spec():
    """Genus-one left background against a shifted free right background."""
    return make_spec(
        (["0.5", "1"], ["0", "0"]), (["0.5"], ["0.2"]), {0: ("0.6", "0.1"), 1: ("0.55", "-0.2")}
    )


SPECS = {
    "free": free_spec,
    "bump": bump_spec,
    "step": step_spec,
    "two_site": two_site_spec,
    "golden": golden_spec,
    "mixed": mixed_spec,
}


@functools.lru_cache(maxsize=None)
def get_spec(name):
    return SPECS[name]()


@functools.lru_cache(maxsize=None)
def get_data(name, nodes=256):
    return scattering_data(get_spec(name), nodes)


@pytest.fixture
def mp():
    """Run the test body at working precision."""
    with nm.precision_context():
        yield


# acceptance lines are collected here and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
