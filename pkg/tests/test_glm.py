from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from gmpy2 import mpfr

from jscatter.direct import kernel_from_jost
from jscatter.errors import GridMismatch, NegativeDiagonal, RangeMismatch, SingularSystem
from jscatter.glm import glm_kernel, glm_kernel_table, glm_solve, inverse, kernel_from_rows, mp_solve, reconstruct

from conftest import get_data, get_spec

NODES = 64


def table(name, side, lo, hi):
    return glm_kernel_table(get_data(name, NODES), get_spec(name), side, lo, hi)


# --------------------------------------------------------------------------
# linear algebra


def test_mp_solve_matches_numpy(mp):
    rng = np.random.default_rng(7)
    A = rng.normal(size=(7, 7)) + 7 * np.eye(7)
    b = rng.normal(size=7)
    Am = np.array([[mpfr(float(x)) for x in row] for row in A], dtype=object)
    bm = np.array([mpfr(float(x)) for x in b], dtype=object)
    x, ratio = mp_solve(Am, bm)
    np.testing.assert_allclose([float(v) for v in x], np.linalg.solve(A, b), rtol=1e-12)
    assert max(abs(v) for v in Am.dot(x) - bm) < 1e-70
    assert ratio >= 1


def test_mp_solve_pivots(mp):
    A = np.array([[mpfr(0), mpfr(1)], [mpfr(1), mpfr(0)]], dtype=object)
    x, _ = mp_solve(A, np.array([mpfr(2), mpfr(3)], dtype=object))
    assert list(x) == [3, 2]


def test_mp_solve_singular(mp):
    A = np.array([[mpfr(1), mpfr(2)], [mpfr(2), mpfr(4)]], dtype=object)
    with pytest.raises(SingularSystem):
        mp_solve(A, np.array([mpfr(1), mpfr(1)], dtype=object))


# --------------------------------------------------------------------------
# the kernel F


def test_free_kernel_vanishes():
    F = table("free", "+", -5, 6)
    assert max(abs(x) for x in F.table.ravel()) < 1e-60
    row = glm_solve(F, 0, 6)
    assert row.K[0] == 1 and max(abs(x) for x in row.K[1:]) < 1e-60


@pytest.mark.parametrize("name", ["bump", "step", "two_site", "golden", "mixed"])
@pytest.mark.parametrize("side", ["+", "-"])
def test_kernel_symmetric_and_real(name, side):
    F = table(name, side, -12, 12)
    assert F.symmetry_defect < 1e-10
    assert F.imag_residue < 1e-10


@pytest.mark.parametrize("name", ["step", "two_site", "mixed"])
def test_transmission_part_positive(name):
    # a Gram matrix of Floquet values with positive weight |T|^2 rho_other / rho
    F = table(name, "+", -6, 6)
    P = np.array([[float(x) for x in row] for row in F.parts["transmission"]])
    eig = np.linalg.eigvalsh(P)
    assert eig.min() > -1e-12 * max(1.0, eig.max())
    assert eig.max() > 0


def test_eigen_part_rank_one():
    F = table("bump", "+", -6, 6)
    E = np.array([[float(x) for x in row] for row in F.parts["eigen"]])
    s = np.linalg.svd(E, compute_uv=False)
    assert s[1] < 1e-14 * s[0]


def test_single_entry_matches_table():
    d, s = get_data("two_site", NODES), get_spec("two_site")
    F = glm_kernel_table(d, s, "-", -8, 3)
    assert abs(glm_kernel(d, s, "-", -5, 2) - F(-5, 2)) < 1e-60


def _shrinks(diags):
    return all(y < x or x == 0 for a, b in zip(diags, diags[1:]) for x, y in zip(a, b))


@pytest.mark.parametrize("side", ["+", "-"])
def test_decay_sums_shrink_outward(side):
    s = 1 if side == "+" else -1
    d, spec = get_data("two_site", 256), get_spec("two_site")
    F = glm_kernel_table(d, spec, side, -70, 70)
    diags = [F.diagnostics(s * k, length=20) for k in (-10, 0, 10, 20)]
    assert _shrinks(diags)
    assert diags[0][0] > 0


def test_decay_sums_expose_aliasing():
    # 64 nodes cannot resolve F(n, m) for n + m near 100: the far windows grow
    F = table("two_site", "+", -10, 70)
    diags = [F.diagnostics(k, length=10) for k in (20, 30, 40)]
    assert not _shrinks(diags)


def test_range_mismatch():
    F = table("bump", "+", -3, 3)
    with pytest.raises(RangeMismatch):
        F(-4, 0)


def test_grid_mismatch():
    d, s = get_data("step", NODES), get_spec("step")
    cut = replace(d, panels={"+": d.panels["+"][:-1], "-": d.panels["-"]})
    with pytest.raises(GridMismatch):
        glm_kernel_table(cut, s, "+", 0, 4)
    with pytest.raises(GridMismatch):
        glm_kernel_table(replace(d, panels={"-": d.panels["-"]}), s, "+", 0, 4)


# --------------------------------------------------------------------------
# solving and reconstruction


def test_rows_match_jost_projection(mp):
    s, d = get_spec("bump"), get_data("bump", NODES)
    Kj = kernel_from_jost(s, "+", range(-3, 4), 12, node_count=NODES)
    F = glm_kernel_table(d, s, "+", -4, 20)
    for n in range(-3, 4):
        row = glm_solve(F, n, 12)
        assert max(abs(x - y) for x, y in zip(row.K, Kj.rows[n])) < 1e-30
        assert row.residual < 1e-60


def test_window_growth_is_stable(mp):
    s, d = get_spec("two_site"), get_data("two_site", NODES)
    F = glm_kernel_table(d, s, "-", -40, 3)
    a, b = glm_solve(F, 0, 20), glm_solve(F, 0, 30)
    assert max(abs(x - y) for x, y in zip(a.K, b.K)) < 1e-20
    # finite support: rows vanish past the override window
    assert max(abs(x) for x in b.K[4:]) < 1e-20


@pytest.mark.parametrize("name", ["bump", "two_site", "golden", "mixed"])
def test_small_round_trip(name):
    r = inverse(get_data(name, NODES), get_spec(name), (-3, 3), M=20).report
    assert r.roundtrip_error < 1e-20
    assert r.coincidence_error < 1e-20
    assert r.glm_residual < 1e-60
    assert r.solution_residual < 1e-20


def test_reconstruct_needs_neighbouring_rows():
    s, d = get_spec("bump"), get_data("bump", NODES)
    Fp = glm_kernel_table(d, s, "+", -3, 12)
    Fm = glm_kernel_table(d, s, "-", -12, 3)
    Kp = kernel_from_rows([glm_solve(Fp, n, 6) for n in range(-2, 3)], "+", 6)
    Km = kernel_from_rows([glm_solve(Fm, n, 6) for n in range(-2, 3)], "-", 6)
    with pytest.raises(RangeMismatch):
        reconstruct(Kp, Km, s, (-2, 2))
    rep = reconstruct(Kp, Km, s, (-1, 1))
    assert rep.roundtrip_error < 1e-20


def test_scaled_reflection_violates_positivity():
    d = get_data("bump", NODES).with_scaled_reflection("+", "1.1")
    with pytest.raises(NegativeDiagonal):
        inverse(d, get_spec("bump"), (-20, 20), M=80)
