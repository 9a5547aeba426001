"""Band quadrature with square-root endpoint behaviour.

Each interval ``[lo, hi]`` is mapped by ``lambda = c - r cos(theta)`` and
``theta`` is integrated with Gauss-Legendre nodes.  Any integrand of the form
``smooth(lambda) * sqrt((lambda-lo)(hi-lambda))**k`` (``k`` any integer,
including the ``-1`` carried by ``rho``) becomes analytic in ``theta``, so
the rule converges geometrically.  The same holds for square-root branch
points at the endpoints, which is why spectral intervals are always split
at every band edge of both backgrounds.
"""

import functools
from dataclasses import dataclass

import gmpy2
import numpy as np
from gmpy2 import mpfr

from . import numeric as nm
from .errors import EmptyBand, SymmetryViolation


@functools.lru_cache(maxsize=32)
def _gauss_legendre(n, bits):
    # nodes/weights on [-1, 1], Newton-polished from double-precision seeds
    x0, _ = np.polynomial.legendre.leggauss(n)
    xs, ws = [], []
    with gmpy2.context(gmpy2.get_context(), precision=bits + 32):
        tol = mpfr(2) ** (-bits - 8)
        for seed in x0:
            x = mpfr(float(seed))
            for _ in range(50):
                p0, p1 = mpfr(1), x
                for k in range(2, n + 1):
                    p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
                dp = n * (x * p1 - p0) / (x * x - 1)
                dx = p1 / dp
                x -= dx
                if abs(dx) < tol:
                    break
            p0, p1 = mpfr(1), x
            for k in range(2, n + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = n * (x * p1 - p0) / (x * x - 1)
            xs.append(x)
            ws.append(2 / ((1 - x * x) * dp * dp))
    return tuple(xs), tuple(ws)


def gauss_legendre(n):
    """Gauss-Legendre rule on ``[-1, 1]`` at the active precision."""
    bits = gmpy2.get_context().precision
    xs, ws = _gauss_legendre(n, bits)
    return [+x for x in xs], [+w for w in ws]


@dataclass(frozen=True)
class BandRule:
    """Quadrature nodes on one interval; ``weights`` integrate plain ``dlambda``."""

    band: tuple
    nodes: tuple
    weights: tuple
    kind: str = "cosine-substitution"

    def __len__(self):
        return len(self.nodes)

    def integrate(self, values):
        return sum(w * v for w, v in zip(self.weights, values))


@nm.precise
def band_rule(band, node_count):
    """Build a :class:`BandRule` on ``band = (lo, hi)`` with ``node_count`` nodes."""
    if node_count < 4:
        raise ValueError("node_count must be at least 4")
    lo, hi = nm.real(band[0]), nm.real(band[1])
    if not hi > lo:
        raise EmptyBand(f"empty interval [{float(lo)}, {float(hi)}]")
    c, r = (lo + hi) / 2, (hi - lo) / 2
    xs, ws = gauss_legendre(node_count)
    pi = gmpy2.const_pi()
    half = pi / 2
    nodes, weights = [], []
    # theta = (x + 1) * pi / 2, ordered so that lambda increases
    for x, w in zip(xs, ws):
        theta = (x + 1) * half
        nodes.append(c - r * gmpy2.cos(theta))
        weights.append(w * half * r * gmpy2.sin(theta))
    return BandRule((lo, hi), tuple(nodes), tuple(weights))


def split_interval(lo, hi, breakpoints):
    """Split ``[lo, hi]`` at the breakpoints strictly inside it."""
    cuts = sorted({p for p in breakpoints if lo < p < hi})
    pts = [lo] + cuts + [hi]
    return list(zip(pts[:-1], pts[1:]))


_CHECK_NODES = (0.21, 0.5, 0.83)


@nm.precise
def contour_integral(rules, f, check_symmetry=True, tol=1e-8):
    """Upper-minus-lower contour integral of ``f`` over the given rules.

    ``f(lam, sheet)`` evaluates the integrand on the ``'u'`` or ``'l'`` side
    of the cut.  For conjugate-symmetric integrands the result is
    ``2i Im sum_j w_j f(lam_j^u)``; the symmetry is spot-checked at three
    fixed nodes per call unless ``check_symmetry`` is false, in which case
    the lower side is summed explicitly.
    """
    if isinstance(rules, BandRule):
        rules = [rules]
    if not check_symmetry:
        tot = 0
        for rule in rules:
            tot += rule.integrate(f(x, "u") for x in rule.nodes)
            tot -= rule.integrate(f(x, "l") for x in rule.nodes)
        return tot
    rule0 = rules[0]
    for frac in _CHECK_NODES:
        x = rule0.nodes[int(frac * (len(rule0) - 1))]
        up, low = f(x, "u"), f(x, "l")
        if abs(low - nm.conj(up)) > tol * (1 + abs(up)):
            raise SymmetryViolation(f"integrand not conjugate-symmetric at {float(x):.6g}")
    tot = 0
    for rule in rules:
        tot += rule.integrate(f(x, "u") for x in rule.nodes)
    return gmpy2.mpc(0, 2 * nm.cplx(tot).imag)


def spectral_rules(model, node_count, breakpoints=()):
    """Rules covering every band of ``model``, split at ``breakpoints``."""
    out = []
    for lo, hi in model.bands.bands:
        for a, b in split_interval(lo, hi, breakpoints):
            out.append(band_rule((a, b), node_count))
    return out


@nm.precise
def measure_integral(model, g, rules):
    """``oint g d omega`` with ``d omega = rho / (2 pi i) dlambda``.

    ``g(lam, sheet)`` must be conjugate-symmetric; the result is real.
    """
    from .background import weight_rho

    def f(x, sheet):
        return g(x, sheet) * weight_rho(model, x, sheet)

    return contour_integral(rules, f).imag / (2 * gmpy2.const_pi())
