from __future__ import annotations

import gmpy2
import pytest
from gmpy2 import mpfr

from jscatter.background import build_background
from jscatter.errors import EmptyBand, SymmetryViolation
from jscatter.quadrature import (
    band_rule,
    contour_integral,
    gauss_legendre,
    measure_integral,
    spectral_rules,
    split_interval,
)


def test_gauss_legendre_exact_for_polynomials(mp):
    xs, ws = gauss_legendre(8)
    # exact up to degree 15
    for k in range(16):
        got = sum(w * x**k for x, w in zip(xs, ws))
        want = 0 if k % 2 else mpfr(2) / (k + 1)
        assert abs(got - want) < 1e-70


def test_band_rule_orders_nodes(mp):
    r = band_rule((-1, 2), 16)
    assert list(r.nodes) == sorted(r.nodes)
    assert -1 < r.nodes[0] and r.nodes[-1] < 2


@pytest.mark.parametrize(
    "name",
    ["length", "semicircle", "arcsine"],
)
def test_endpoint_singularities(mp, name):
    f = {
        "length": lambda x: 1,
        "semicircle": lambda x: gmpy2.sqrt(1 - x * x),
        "arcsine": lambda x: 1 / gmpy2.sqrt(1 - x * x),
    }[name]
    pi = gmpy2.const_pi()
    want = {"length": 2, "semicircle": pi / 2, "arcsine": pi}[name]
    r = band_rule((-1, 1), 64)
    assert abs(r.integrate(f(x) for x in r.nodes) - want) < 1e-60


def test_geometric_convergence(mp):
    # smooth times 1/sqrt: error decays fast in the node count
    def err(n):
        r = band_rule((0, 1), n)
        got = r.integrate(gmpy2.exp(x) / gmpy2.sqrt(x * (1 - x)) for x in r.nodes)
        ref = gmpy2.const_pi() * gmpy2.exp(mpfr("0.5")) * _bessel_i0(mpfr("0.5"))
        return abs(got - ref)

    assert err(8) < 1e-8
    assert err(16) < 1e-17
    assert err(32) < 1e-40
    assert err(64) < 1e-70


def _bessel_i0(x):
    # power series, plenty of terms for x = 1/2
    s, t = mpfr(0), mpfr(1)
    for k in range(1, 80):
        s += t
        t *= (x / 2) ** 2 / (k * k)
    return s


def test_split_interval():
    assert split_interval(0, 3, [1, 2, 5, 0]) == [(0, 1), (1, 2), (2, 3)]
    assert split_interval(0, 1, []) == [(0, 1)]


def test_empty_band():
    with pytest.raises(EmptyBand):
        band_rule((1, 1), 8)
    with pytest.raises(ValueError):
        band_rule((0, 1), 2)


def test_symmetry_violation(mp):
    r = band_rule((-1, 1), 16)
    with pytest.raises(SymmetryViolation):
        contour_integral(r, lambda x, s: gmpy2.mpc(0, 1) * (1 + x))


def test_contour_matches_explicit_sum(mp):
    r = band_rule((-1, 1), 16)

    def f(x, s):
        return gmpy2.mpc(x, 1 if s == "u" else -1)

    assert abs(contour_integral(r, f) - contour_integral(r, f, check_symmetry=False)) < 1e-70


@pytest.mark.parametrize("a, b", [([0.5], [0.0]), ([0.5, 0.5], [0.0, 1.0]), ([0.5, 1.0, 0.7], [0.1, -0.4, 0.3])])
def test_measure_mass_one(a, b):
    m = build_background(a, b)
    rules = spectral_rules(m, 48)
    mass = measure_integral(m, lambda x, s: 1, rules)
    assert abs(mass - 1) < 1e-40


def test_measure_breakpoints_do_not_change_result():
    m = build_background([0.5, 1.0], [0.0, 0.0])
    g = lambda x, s: x * x  # noqa: E731
    plain = measure_integral(m, g, spectral_rules(m, 48))
    split = measure_integral(m, g, spectral_rules(m, 48, [mpfr("-1.1"), mpfr("0.9")]))
    assert abs(plain - split) < 1e-40
