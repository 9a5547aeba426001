from __future__ import annotations

import gmpy2
import pytest
from gmpy2 import mpfr
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from jscatter.background import (
    asymptotic_defect,
    branch_at,
    build_background,
    deltas,
    discriminant,
    floquet,
    orthogonality_defect,
    orthogonality_table,
    rho_product,
    weight_rho,
)
from jscatter.errors import AtBandEdge, AtDirichletPole, DegenerateGap, NonPositiveCoefficient


def free(side="right"):
    return build_background([0.5], [0.0], side)


def golden(side="right"):
    return build_background([0.5, 0.5], [0.0, 1.0], side)


def test_free_edges():
    m = free()
    assert [float(e) for e in m.bands.edges] == [-1.0, 1.0]
    assert m.dirichlet == ()


def test_golden_edges_and_dirichlet(mp):
    m = golden()
    s5 = gmpy2.sqrt(5)
    want = [(1 - s5) / 2, 0, 1, (1 + s5) / 2]
    assert max(abs(e - w) for e, w in zip(m.bands.edges, want)) < 1e-60
    assert [d.kind for d in m.dirichlet] == ["Mhat"]
    assert abs(m.dirichlet[0].mu - 1) < 1e-60


def test_edges_solve_discriminant(mp):
    m = build_background([0.5, 1.0, 0.7], [0.1, -0.4, 0.3])
    for j, e in enumerate(m.bands.edges):
        d = discriminant(m.background, e).real
        assert abs(abs(d) - 2) < 1e-60


def test_floquet_free_closed_form(mp):
    # a = 1/2, b = 0: psi(z, n) = w**n with w + 1/w = 2z, |w| < 1 for the right side
    m = free()
    w = 2 - gmpy2.sqrt(3)
    assert abs(floquet(m, 2, 1) - w) < 1e-70
    assert abs(floquet(m, 2, -3) - w**-3) < 1e-60
    left = free("left")
    assert abs(floquet(left, 2, 1) - 1 / w) < 1e-60


def test_rho_free_closed_form(mp):
    # rho = 1 / W(psi_breve, psi) = 1 / (a (w - 1/w)) = -1/sqrt(3) at z = 2
    m = free()
    assert abs(weight_rho(m, 2) + 1 / gmpy2.sqrt(3)) < 1e-70
    assert abs(weight_rho(m, 0, "u") - gmpy2.mpc(0, 1)) < 1e-70
    assert abs(weight_rho(m, 0, "l") - gmpy2.mpc(0, -1)) < 1e-70


@pytest.mark.parametrize("side", ["right", "left"])
@pytest.mark.parametrize("z", [2.5, complex(0.3, 0.4), -1.7])
def test_rho_routes_agree(mp, side, z):
    for m in (free(side), golden(side), build_background([0.5, 1.0], [0.0, 0.0], side)):
        if m.bands.contains(gmpy2.mpfr(z.real if isinstance(z, complex) else z)) and not isinstance(z, complex):
            continue
        assert abs(weight_rho(m, z) - rho_product(m, z)) < 1e-60


def test_rho_routes_agree_on_spectrum(mp):
    m = build_background([0.5, 1.0], [0.0, 0.0])
    for x in (-1.2, -0.9, 0.7, 1.3):
        for sheet in ("u", "l"):
            assert abs(weight_rho(m, x, sheet) - rho_product(m, x, sheet)) < 1e-60
        assert weight_rho(m, x, "u").imag > 0


def test_conjugate_sheets(mp):
    m = golden()
    for x in (-0.3, 1.2):
        u = branch_at(m, x, "u")
        l = branch_at(m, x, "l")
        for n in (-4, 0, 3, 7):
            assert abs(u(n) - l(n).conjugate()) < 1e-60


def test_recurrence_residual(mp):
    m = build_background([0.5, 1.0, 0.7], [0.1, -0.4, 0.3])
    z = gmpy2.mpc(0.2, 0.9)
    psi = branch_at(m, z)
    for n in range(-6, 7):
        am, an, bn = m.a_at(n - 1), m.a_at(n), m.b_at(n)
        lhs = am * psi(n - 1) + bn * psi(n) + an * psi(n + 1)
        assert abs(lhs - z * psi(n)) < 1e-60 * (1 + abs(psi(n - 1)) + abs(psi(n + 1)))


def test_decay_direction(mp):
    right, left = free("right"), free("left")
    assert abs(floquet(right, 3, 20)) < 1e-10
    assert abs(floquet(left, 3, -20)) < 1e-10


def test_orthogonality_free():
    assert orthogonality_defect(free(), 2, 2) < 1e-50
    assert orthogonality_defect(free(), 1, -3) < 1e-50


def test_orthogonality_table_period_two():
    tab = orthogonality_table(golden(), range(-3, 4), 64)
    dev = max(abs(tab[i][j] - (i == j)) for i in range(7) for j in range(7))
    assert dev < 1e-30


def test_orthogonality_left_side_mbreve():
    tab = orthogonality_table(build_background([0.5, 1.0], [0.0, 0.0], "left"), range(-2, 3), 64)
    dev = max(abs(tab[i][j] - (i == j)) for i in range(5) for j in range(5))
    assert dev < 1e-30


def test_asymptotics_second_order():
    m = build_background([0.5, 1.0], [0.3, -0.2])
    d4 = asymptotic_defect(m, 3, mpfr(1e4))
    d5 = asymptotic_defect(m, 3, mpfr(1e5))
    assert d4 < 1e-6
    # O(1/z**2) remainder: a tenfold larger z shrinks the defect about 100 times
    assert 50 < d4 / d5 < 200


def test_regularized_branch_finite_at_pole(mp):
    m = build_background([0.5, 1.0], [0.0, 0.0], "left")
    (d,) = m.dirichlet
    branch = "decaying" if d.kind == "M" else "other"
    with pytest.raises(AtDirichletPole):
        branch_at(m, d.mu, branch=branch)
    near = d.mu + mpfr("1e-30")
    psi = branch_at(m, near, branch=branch, regularize=True)
    assert 1e-3 < abs(psi(1)) < 1e3  # the pole sits on odd sites
    d0, _, db = deltas(m, near)
    assert abs((d0 if d.kind == "M" else db) - mpfr("1e-30")) < 1e-40


def test_errors():
    with pytest.raises(NonPositiveCoefficient):
        build_background([0.5, 0.0], [0.0, 0.0])
    with pytest.raises(AtBandEdge):
        floquet(free(), 1.0, 0)
    with pytest.raises(ValueError):
        floquet(free(), 0.3, 0)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(0.2, 2.0), min_size=1, max_size=3).flatmap(
        lambda a: st.tuples(st.just(a), st.lists(st.floats(-1.0, 1.0), min_size=len(a), max_size=len(a)))
    )
)
def test_band_structure_properties(ab):
    a, b = ab
    try:
        m = build_background(a, b)
    except DegenerateGap:
        # e.g. a period-one operator written with period two
        assume(False)
    e = m.bands.edges
    assert len(e) == 2 * len(a)
    assert all(x <= y for x, y in zip(e, e[1:]))
    with gmpy2.context(gmpy2.get_context(), precision=256):
        for x in e:
            assert abs(abs(discriminant(m.background, x).real) - 2) < 1e-40
        for d in m.dirichlet:
            assert any(lo <= d.mu <= hi for lo, hi in m.bands.gaps)
