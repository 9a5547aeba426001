"""Direct scattering: Jost solutions, scattering matrix and discrete spectrum."""

import functools
import math
from dataclasses import dataclass, field, replace

import gmpy2
from gmpy2 import mpc, mpfr

from . import numeric as nm
from .background import (
    branch_at,
    deltas,
    normalize_side,
    weight_rho,
)
from .errors import RootAtDirichletPoint, TooCloseToEdge, VirtualLevelNearby
from .quadrature import band_rule, spectral_rules, split_interval
from .steplike import coefficient

OTHER = {"+": "-", "-": "+"}
FLIP = {"u": "l", "l": "u", None: None}

#: offsets used to probe band-edge limits
EDGE_OFFSETS = ("1e-4", "1e-6", "1e-8")


# --------------------------------------------------------------------------
# Jost solutions


class JostSolution:
    """Jost solution ``psi_+`` or ``psi_-`` of the steplike operator at ``z``.

    Equal to the background Floquet solution beyond the override window and
    continued across it by the three-term recurrence.  Values are callable
    by site, ``psi(n)``.
    """

    def __init__(self, spec, side, z, sheet=None, regularized=False):
        self.spec = spec
        self.side = normalize_side(side)
        self.z = nm.cplx(z)
        self.sheet = sheet
        self.regularized = regularized
        self.branch = branch_at(spec.model(self.side), self.z, sheet, regularize=regularized)
        n1, n2 = spec.right_start, spec.left_end
        z = self.z
        vals = {}
        if self.side == "+":
            vals[n1], vals[n1 + 1] = self.branch(n1), self.branch(n1 + 1)
            for n in range(n1, n2 - 1, -1):
                an_1 = coefficient(spec, n - 1)[0]
                an, bn = coefficient(spec, n)
                vals[n - 1] = ((z - bn) * vals[n] - an * vals[n + 1]) / an_1
        else:
            vals[n2], vals[n2 - 1] = self.branch(n2), self.branch(n2 - 1)
            for n in range(n2, n1 + 1):
                an, bn = coefficient(spec, n)
                an_1 = coefficient(spec, n - 1)[0]
                vals[n + 1] = ((z - bn) * vals[n] - an_1 * vals[n - 1]) / an
        self._vals = vals
        self._lo, self._hi = min(vals), max(vals)

    def __call__(self, n):
        if self.side == "+" and n >= self.spec.right_start:
            return self.branch(n)
        if self.side == "-" and n <= self.spec.left_end:
            return self.branch(n)
        if self._lo <= n <= self._hi:
            return self._vals[n]
        return self._walk(n)

    def _walk(self, n):
        # far side of the window: plain recurrence, no caching
        spec, z = self.spec, self.z
        if n < self._lo:
            cur, nxt = self._vals[self._lo], self._vals[self._lo + 1]
            for k in range(self._lo, n, -1):
                ak_1 = coefficient(spec, k - 1)[0]
                ak, bk = coefficient(spec, k)
                cur, nxt = ((z - bk) * cur - ak * nxt) / ak_1, cur
            return cur
        prev, cur = self._vals[self._hi - 1], self._vals[self._hi]
        for k in range(self._hi, n):
            ak, bk = coefficient(spec, k)
            ak_1 = coefficient(spec, k - 1)[0]
            prev, cur = cur, ((z - bk) * cur - ak_1 * prev) / ak
        return cur

    def values(self, lo, hi):
        return [self(n) for n in range(lo, hi + 1)]


@nm.precise
def jost(spec, z, side, n_range, sheet=None, regularized=False):
    """Jost solution values ``{n: psi(z, n)}`` for ``n`` in ``n_range``."""
    js = JostSolution(spec, side, z, sheet, regularized)
    return {n: js(n) for n in n_range}


def wronskian_at(spec, f, g, n):
    """``a(n) (f(n) g(n+1) - f(n+1) g(n))`` with the operator's ``a(n)``."""
    return coefficient(spec, n)[0] * (f(n) * g(n + 1) - f(n + 1) * g(n))


def residual(spec, f, z, n):
    """Relative residual of ``H f = z f`` at site ``n``."""
    am = coefficient(spec, n - 1)[0]
    an, bn = coefficient(spec, n)
    lhs = am * f(n - 1) + bn * f(n) + an * f(n + 1)
    scale = abs(am * f(n - 1)) + abs(bn * f(n)) + abs(an * f(n + 1)) + abs(z * f(n))
    return abs(lhs - z * f(n)) / scale if scale else mpfr(0)


# --------------------------------------------------------------------------
# Wronskians


@dataclass(frozen=True)
class WronskianSet:
    z: object
    sheet: object
    W: object
    W_tilde: object
    W_hat: object
    spread: object  # relative spread over the evaluation sites


def _mhat_root(model, z, sheet):
    d, dh, _ = deltas(model, z, sheet)
    root = mpc(1)
    for mu in model.mhat:
        root *= nm.boundary_sqrt(nm.cplx(z).real - mu if nm.is_real_point(z) else nm.cplx(z) - mu, sheet)
    return d, root


@nm.precise
def wronskian(spec, z, sheet=None, sites=None):
    """``W = W(psi_-, psi_+)`` with its regularized versions at ``z``."""
    jm = JostSolution(spec, "-", z, sheet, regularized=True)
    jp = JostSolution(spec, "+", z, sheet, regularized=True)
    if sites is None:
        n2, n1 = spec.left_end, spec.right_start
        sites = sorted({n2 - 3, n2 - 1, n2, 0, n1, n1 + 2})
    vals = [wronskian_at(spec, jm, jp, n) for n in sites]
    wt = vals[0]
    spread = max(abs(v - wt) for v in vals) / abs(wt) if not gmpy2.is_zero(wt) else mpfr(0)
    dp, rp = _mhat_root(spec.right, z, sheet)
    dm, rm = _mhat_root(spec.left, z, sheet)
    denom = dp * dm
    W = wt / denom if not gmpy2.is_zero(denom) else mpc("inf")
    return WronskianSet(nm.cplx(z), sheet, W, wt, wt * rp * rm, spread)


def wtilde_real(spec, x):
    """``W-tilde`` at a real point off the continuous spectrum (real-valued)."""
    jm = JostSolution(spec, "-", x, None, regularized=True)
    jp = JostSolution(spec, "+", x, None, regularized=True)
    return wronskian_at(spec, jm, jp, spec.right_start).real


# --------------------------------------------------------------------------
# spectrum partition


def _merge(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _intersect(A, B):
    out = []
    for a0, a1 in A:
        for b0, b1 in B:
            lo, hi = max(a0, b0), min(a1, b1)
            if hi > lo:
                out.append((lo, hi))
    return _merge(out)


def _closure_minus(A, B):
    """Closure of ``A`` minus ``B`` for finite unions of closed intervals."""
    out = []
    for a0, a1 in A:
        pieces = [(a0, a1)]
        for b0, b1 in B:
            nxt = []
            for p0, p1 in pieces:
                if b1 <= p0 or b0 >= p1:
                    nxt.append((p0, p1))
                    continue
                if b0 > p0:
                    nxt.append((p0, b0))
                if b1 < p1:
                    nxt.append((b1, p1))
            pieces = nxt
        out.extend(p for p in pieces if p[1] > p[0])
    return _merge(out)


def _boundary(intervals):
    pts = []
    for lo, hi in _merge(intervals):
        pts.extend([lo, hi])
    return pts


@dataclass(frozen=True)
class SpectrumPartition:
    sigma: tuple
    sigma2: tuple
    sigma1_plus: tuple
    sigma1_minus: tuple
    virtual_levels: tuple = ()

    def boundary(self, which):
        return _boundary(getattr(self, which))

    def allowed_virtual(self):
        """``boundary(sigma)`` union (``boundary(sigma1+)`` cap ``boundary(sigma1-)``)."""
        b1p, b1m = self.boundary("sigma1_plus"), self.boundary("sigma1_minus")
        both = [x for x in b1p if any(x == y for y in b1m)]
        return self.boundary("sigma") + both

    def in_sigma(self, x):
        return any(lo <= x <= hi for lo, hi in self.sigma)

    def in_sigma2(self, x):
        return any(lo <= x <= hi for lo, hi in self.sigma2)


def spectrum_partition(spec, virtual_levels=()):
    sp = spec.right.bands.bands
    sm = spec.left.bands.bands
    s2 = _intersect(sp, sm)
    return SpectrumPartition(
        tuple(_merge(sp + sm)),
        tuple(s2),
        tuple(_closure_minus(sp, s2)),
        tuple(_closure_minus(sm, s2)),
        tuple(virtual_levels),
    )


def breakpoints(spec):
    pts = list(spec.right.bands.edges) + list(spec.left.bands.edges)
    pts += [d.mu for d in spec.right.dirichlet] + [d.mu for d in spec.left.dirichlet]
    return pts


def _scale(spec):
    e = list(spec.right.bands.edges) + list(spec.left.bands.edges)
    return max(e) - min(e)


# --------------------------------------------------------------------------
# scattering matrix


@dataclass(frozen=True)
class Sample:
    """Scattering quantities of one side at one boundary point."""

    lam: object
    sheet: str
    T: object
    R: object
    W: object  # W(psi_-, psi_+)
    W_tilde: object
    rho: object  # rho of this side
    rho_other: object  # rho of the other side (real off its spectrum)


def _check_offset(spec, lam, min_offset):
    for p in breakpoints(spec):
        if abs(lam - p) < min_offset:
            raise TooCloseToEdge(f"lambda={float(lam):.16g} within {min_offset} of {float(p):.16g}")


@nm.precise
def sample(spec, lam, side, sheet="u", min_offset=1e-10):
    side = normalize_side(side)
    lam = nm.real(lam)
    model, omodel = spec.model(side), spec.model(OTHER[side])
    if not model.bands.contains(lam):
        raise ValueError(f"lambda={float(lam)} is not in the spectrum of side {side}")
    _check_offset(spec, lam, min_offset)
    psi = JostSolution(spec, side, lam, sheet, regularized=True)
    psib = JostSolution(spec, side, lam, FLIP[sheet], regularized=True)
    phi = JostSolution(spec, OTHER[side], lam, sheet, regularized=True)
    d_self = deltas(model, lam, sheet)[0]
    d_other = deltas(omodel, lam, sheet)[0]
    n0 = spec.right_start
    wd = wronskian_at(spec, phi, psi, n0)
    if abs(wd) < mpfr("1e-60"):
        raise VirtualLevelNearby(f"Wronskian vanishes near lambda={float(lam):.16g}")
    # the regularizing factors cancel in R; in T only delta_other survives
    T = wronskian_at(spec, psib, psi, n0) * d_other / (wd * d_self)
    R = -wronskian_at(spec, phi, psib, n0) / wd
    wt = wd if side == "+" else -wd  # W(psi_-~, psi_+~)
    W = wt / (d_self * d_other)
    rho = weight_rho(model, lam, sheet)
    orho = weight_rho(omodel, lam, sheet if omodel.bands.contains(lam) else None)
    return Sample(lam, sheet, T, R, W, wt, rho, orho)


@nm.precise
def scattering_matrix(spec, lam, side, sheet="u", min_offset=1e-10):
    """Transmission and reflection coefficients ``(T, R)`` at ``lam``."""
    s = sample(spec, lam, side, sheet, min_offset)
    return s.T, s.R


# --------------------------------------------------------------------------
# discrete spectrum


@dataclass(frozen=True)
class Eigenvalue:
    """One point of the discrete spectrum with its norming data."""

    lam: object
    gamma_plus: object
    gamma_minus: object
    c_plus: object
    c_minus: object
    dW: object  # d W-tilde / dz at lam

    @property
    def derivative_defect(self):
        """Relative defect of ``(dW/dz)**2 = 1 / (gamma_+ gamma_-)``."""
        rhs = 1 / (self.gamma_plus * self.gamma_minus)
        return abs(self.dW**2 - rhs) / rhs


def spectral_bound(spec):
    """``max |b| + 2 max a`` over both backgrounds and the overrides."""
    a_vals = list(spec.left.background.a) + list(spec.right.background.a)
    b_vals = list(spec.left.background.b) + list(spec.right.background.b)
    a_vals += [a for _, a, _ in spec.overrides]
    b_vals += [b for _, _, b in spec.overrides]
    return max(abs(b) for b in b_vals) + 2 * max(a_vals)


def real_gaps(spec):
    """Gaps of ``sigma`` intersected with ``[-B, B]`` (``B`` the spectral bound)."""
    bound = spectral_bound(spec) + mpfr("1e-3")
    sig = spectrum_partition(spec).sigma
    out = []
    lo = -bound
    for s0, s1 in sig:
        if s0 > lo:
            out.append((lo, s0))
        lo = max(lo, s1)
    if bound > lo:
        out.append((lo, bound))
    return out


def _bisect(f, lo, hi, flo):
    tol = 8 * nm.eps() * (1 + abs(lo) + abs(hi))
    while hi - lo > tol:
        mid = (lo + hi) / 2
        fm = f(mid)
        if gmpy2.is_zero(fm):
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def _roots_in(f, lo, hi, grid, dip=mpfr("1e-10"), depth=1, ends=False):
    xs = [lo + (hi - lo) * (2 * k + 1) / (2 * grid) for k in range(grid)]
    if ends:
        # W~ stays finite at band edges: sample next to them so roots in the
        # outer half cells are bracketed too
        eta = mpfr("1e-20") * (1 + abs(lo) + abs(hi))
        xs = [lo + eta] + xs + [hi - eta]
        grid += 2
    vs = [f(x) for x in xs]
    roots = []
    for k in range(grid - 1):
        v0, v1 = vs[k], vs[k + 1]
        if gmpy2.is_zero(v0):
            roots.append(xs[k])
        elif (v0 < 0) != (v1 < 0) and not gmpy2.is_zero(v1):
            roots.append(_bisect(f, xs[k], xs[k + 1], v0))
        elif depth > 0 and min(abs(v0), abs(v1)) < dip:
            roots.extend(_roots_in(f, xs[k], xs[k + 1], 10, dip, depth - 1))
    return roots


def _tail(branch, start, direction):
    """``sum |psi(n)|^2`` over ``n >= start`` (direction +1) or ``n <= start``."""
    N = branch.period
    x = abs(branch.w) ** 2
    tot = mpfr(0)
    for r in range(N):
        if direction > 0:
            p = -((r - start) // N)
            tot += abs(branch.u[r]) ** 2 * x**p / (1 - x)
        else:
            p = (start - r) // N
            tot += abs(branch.u[r]) ** 2 * x**p / (1 - 1 / x)
    return tot


def norming_data(spec, lam):
    """Norming constants, proportionality constants and ``dW~/dz`` at ``lam``."""
    lam = nm.real(lam)
    jp = JostSolution(spec, "+", lam, regularized=True)
    jm = JostSolution(spec, "-", lam, regularized=True)
    n2, n1 = spec.left_end, spec.right_start
    middle = range(n2 - 1, n1 + 1)
    site = max(middle, key=lambda n: abs(jp(n)))
    cp = (jp(site) / jm(site)).real
    inner_p = sum(abs(jp(n)) ** 2 for n in range(n2 + 1, n1))
    inner_m = sum(abs(jm(n)) ** 2 for n in range(n2 + 1, n1))
    right_p = _tail(jp.branch, n1, +1)
    left_m = _tail(jm.branch, n2, -1)
    # psi_+ = c_+ psi_- on the left and psi_- = psi_+ / c_+ on the right
    gp = 1 / (inner_p + right_p + cp**2 * left_m)
    gm = 1 / (inner_m + left_m + right_p / cp**2)
    h = mpfr(2) ** (-gmpy2.get_context().precision // 3) * (1 + abs(lam))
    dW = (wtilde_real(spec, lam + h) - wtilde_real(spec, lam - h)) / (2 * h)
    return Eigenvalue(lam, gp, gm, cp, 1 / cp, dW)


@nm.precise
def discrete_spectrum(spec, grid=400):
    """Eigenvalues of the steplike operator with norming data.

    Roots of the real function ``W~`` are bracketed on a uniform grid in each
    gap of ``sigma`` and bisected to working precision.
    """
    f = functools.partial(wtilde_real, spec)
    out = []
    for lo, hi in real_gaps(spec):
        for lam in _roots_in(f, lo, hi, grid, ends=True):
            out.append(norming_data(spec, lam))
    return sorted(out, key=lambda e: e.lam)


# --------------------------------------------------------------------------
# band edges: virtual levels, edge limits of R, T at infinity


def extrapolate_sqrt(offsets, values):
    """Value at ``h = 0`` of ``A + B sqrt(h) + C h`` through three samples."""
    s = [gmpy2.sqrt(nm.real(h)) for h in offsets]
    out = 0
    for i, v in enumerate(values):
        w = 1
        for j in range(len(s)):
            if j != i:
                w *= s[j] / (s[j] - s[i])
        out += w * v
    return out


def _edge_directions(spec):
    """``(E, side, direction)`` with ``direction`` pointing into ``sigma_side``."""
    out = []
    for side in ("+", "-"):
        edges = spec.model(side).bands.edges
        for j, e in enumerate(edges):
            out.append((e, side, 1 if j % 2 == 0 else -1))
    return out


def _what_scale(spec):
    # median |W^| over the midpoints of the spectral panels
    vals = []
    pts = breakpoints(spec)
    for lo, hi in spectrum_partition(spec).sigma:
        for a, b in split_interval(lo, hi, pts):
            vals.append(abs(wronskian(spec, (a + b) / 2, "u").W_hat))
    vals.sort()
    return vals[len(vals) // 2]


@dataclass(frozen=True)
class EdgeProbe:
    E: object
    side: str
    direction: int
    W_hat: object  # extrapolated W^(E)
    virtual: bool
    allowed: bool  # inside the admissible set for virtual levels
    mhat: bool  # E in M^ of this side
    R_limit: object = None  # extrapolated R_side(E); None at virtual levels


@nm.precise
def edge_probes(spec, offsets=EDGE_OFFSETS, threshold=1e-6):
    """Probe every band edge of both backgrounds.

    ``W^`` and ``R_side`` are sampled at ``E + direction * h`` for the given
    offsets, always from inside ``sigma_side``, and extrapolated to ``h = 0``.
    """
    part = spectrum_partition(spec)
    allowed = part.allowed_virtual()
    scale = _what_scale(spec)
    tol = mpfr("1e-30") * (1 + _scale(spec))
    out = []
    for E, side, d in _edge_directions(spec):
        xs = [E + d * mpfr(h) for h in offsets]
        wh = [wronskian(spec, x, "u").W_hat for x in xs]
        A = extrapolate_sqrt(offsets, wh)
        virtual = abs(A) < threshold * scale
        mhat = any(abs(E - mu) < tol for mu in spec.model(side).mhat)
        ok = any(abs(E - p) < tol for p in allowed)
        R = None
        if not virtual:
            rs = [sample(spec, x, side, "u", min_offset=0).R for x in xs]
            R = extrapolate_sqrt(offsets, rs)
        out.append(EdgeProbe(E, side, d, A, virtual, ok, mhat, R))
    return out


def virtual_levels(spec, offsets=EDGE_OFFSETS, threshold=1e-6):
    """Edge points where ``W^`` vanishes."""
    pts = []
    for p in edge_probes(spec, offsets, threshold):
        if p.virtual and not any(abs(p.E - q) < mpfr("1e-30") for q in pts):
            pts.append(p.E)
    return sorted(pts)


@nm.precise
def transmission_at_infinity(spec, X=mpfr("1e6")):
    """``(T_+(inf), T_-(inf))`` by Richardson extrapolation from ``X`` and ``2X``."""
    X = nm.real(X)
    X = max(X, spectral_bound(spec) + 1)
    out = []
    for side in ("+", "-"):
        vals = []
        for x in (X, 2 * X):
            W = wronskian(spec, x).W
            vals.append((1 / (weight_rho(spec.model(side), x) * W)).real)
        out.append(2 * vals[1] - vals[0])
    return tuple(out)


# --------------------------------------------------------------------------
# sampled scattering data


@dataclass
class Panel:
    """Quadrature panel of ``sigma_side`` with the scattering data on its nodes.

    ``region`` is ``'2'`` if the panel lies in ``sigma2`` and ``'1'`` if it
    lies in the multiplicity-one part of ``sigma_side``.
    """

    side: str
    lo: object
    hi: object
    region: str
    nodes: tuple
    weights: tuple
    T_u: tuple
    T_l: tuple
    R_u: tuple
    R_l: tuple
    W_u: tuple
    Wt_u: tuple
    Wt_l: tuple
    rho_u: tuple
    rho_other_u: tuple

    def __len__(self):
        return len(self.nodes)


@dataclass
class ScatteringData:
    node_count: int
    panels: dict  # side -> list of Panel
    eigenvalues: list  # list of Eigenvalue
    edges: list  # list of EdgeProbe
    t_inf: tuple  # (T_+(inf), T_-(inf))
    gap_samples: list  # [(x, W~(x))] on real gaps
    partition: SpectrumPartition = None

    @property
    def virtual_levels(self):
        pts = []
        for p in self.edges:
            if p.virtual and not any(abs(p.E - q) < mpfr("1e-30") for q in pts):
                pts.append(p.E)
        return sorted(pts)

    def with_scaled_reflection(self, side, factor):
        """Copy with ``R_side`` multiplied by ``factor`` on every node."""
        factor = nm.cplx(factor)
        new = {s: list(ps) for s, ps in self.panels.items()}
        new[side] = [
            replace(
                p,
                R_u=tuple(r * factor for r in p.R_u),
                R_l=tuple(r * nm.conj(factor) for r in p.R_l),
            )
            for p in self.panels[side]
        ]
        return replace(self, panels=new)


def panel_layout(spec, side):
    """``[(lo, hi, region), ...]`` covering ``sigma_side`` split at all breakpoints."""
    part = spectrum_partition(spec)
    pts = breakpoints(spec)
    out = []
    for lo, hi in spec.model(side).bands.bands:
        for a, b in split_interval(lo, hi, pts):
            out.append((a, b, "2" if part.in_sigma2((a + b) / 2) else "1"))
    return out


@nm.precise
def sample_panel(spec, side, lo, hi, region, node_count, min_offset=0):
    rule = band_rule((lo, hi), node_count)
    cols = {k: [] for k in ("T_u", "T_l", "R_u", "R_l", "W_u", "Wt_u", "Wt_l", "rho_u", "rho_other_u")}
    for x in rule.nodes:
        u = sample(spec, x, side, "u", min_offset)
        l = sample(spec, x, side, "l", min_offset)
        cols["T_u"].append(u.T)
        cols["T_l"].append(l.T)
        cols["R_u"].append(u.R)
        cols["R_l"].append(l.R)
        cols["W_u"].append(u.W)
        cols["Wt_u"].append(u.W_tilde)
        cols["Wt_l"].append(l.W_tilde)
        cols["rho_u"].append(u.rho)
        cols["rho_other_u"].append(u.rho_other)
    cols = {k: tuple(v) for k, v in cols.items()}
    return Panel(side, lo, hi, region, rule.nodes, rule.weights, **cols)


def _panel_job(args):
    spec, side, lo, hi, region, n, bits, off = args
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        return sample_panel(spec, side, lo, hi, region, n, off)


@nm.precise
def scattering_data(spec, node_count=256, grid=400, workers=1, edge_offset=1e-8):
    """Sample the full set of scattering data of ``spec``.

    Quadrature nodes follow the cosine-substituted rule and are exempt from
    the edge exclusion radius; ``edge_offset`` (relative to the spectral
    diameter) is the smallest of the three geometric offsets used to probe
    the band edges.  Panels are independent, so ``workers > 1`` maps them
    over a process pool.
    """
    bits = gmpy2.get_context().precision
    off = 0
    diam = _scale(spec)
    offsets = tuple(mpfr(edge_offset) * diam * 10**k for k in (4, 2, 0))
    jobs = [(spec, s, lo, hi, reg, node_count, bits, off) for s in ("+", "-") for lo, hi, reg in panel_layout(spec, s)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            done = list(ex.map(_panel_job, jobs))
    else:
        done = [_panel_job(j) for j in jobs]
    panels = {"+": [], "-": []}
    for p in done:
        panels[p.side].append(p)
    gaps = []
    for lo, hi in real_gaps(spec):
        for k in (1, 2, 3):
            x = lo + (hi - lo) * k / 4
            gaps.append((x, wronskian(spec, x).W_tilde))
    return ScatteringData(
        node_count,
        panels,
        discrete_spectrum(spec, grid),
        edge_probes(spec, offsets),
        transmission_at_infinity(spec),
        gaps,
        spectrum_partition(spec),
    )


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""

    def to_json(self):
        return {"name": self.name, "value": self.value, "threshold": self.threshold, "pass": self.passed, "note": self.note}


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, name, value, threshold, note=""):
        v = float(value)
        ok = v < threshold
        self.checks.append(Check(name, v, float(threshold), bool(ok), note))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self):
        return [c.to_json() for c in self.checks]


def _max(vals):
    return max(vals, default=mpfr(0))


TOLERANCES = {
    "conjugation": 1e-8,
    "phase_relation": 1e-8,
    "energy_balance": 1e-8,
    "consistency": 1e-8,
    "transmission_wronskian": 1e-8,
    "wronskian_symmetry": 1e-8,
    "transmission_at_infinity": 1e-6,
    "norming_derivative": 1e-6,
    "proportionality_product": 1e-8,
    "gamma_nonpositive": 0.5,
    "edge_reflection": 1e-3,
    "reflection_continuity": 0.25,
    "virtual_inclusion": 0.5,
}


@nm.precise
def validate_scattering(data, tol=None):
    """Check the scattering-matrix identities on sampled data."""
    tol = dict(TOLERANCES, **(tol or {}))
    rep = ValidationReport()
    ia, ib, ic, i218, i69, jump = [], [], [], [], [], []
    for ps in data.panels.values():
        for p in ps:
            for k in range(len(p)):
                ia.append(abs(p.T_u[k] - nm.conj(p.T_l[k])))
                ia.append(abs(p.R_u[k] - nm.conj(p.R_l[k])))
                i218.append(abs(p.T_u[k] * p.rho_u[k] * p.W_u[k] - 1))
                i69.append(abs(p.Wt_l[k] - nm.conj(p.Wt_u[k])) / (1 + abs(p.Wt_u[k])))
                T, R = p.T_u[k], p.R_u[k]
                if p.region == "1":
                    ib.append(abs(T / nm.conj(T) - R))
                else:
                    ratio = p.rho_u[k] / p.rho_other_u[k]
                    ic.append(abs(1 - abs(R) ** 2 - ratio * abs(T) ** 2))
            steps = [abs(p.R_u[k + 1] - p.R_u[k]) for k in range(len(p) - 1)]
            # a branch flip is a step far larger than both neighbouring steps
            for k, d in enumerate(steps):
                near = max(steps[max(k - 1, 0)], steps[min(k + 1, len(steps) - 1)]) if len(steps) > 1 else 0
                jump.append(max(d - 2 * near, mpfr(0)))
    # the consistency check pairs the two sides on the common panels of sigma2
    idd = []
    other = {(q.lo, q.hi): q for q in data.panels["-"]}
    for p in data.panels["+"]:
        q = other.get((p.lo, p.hi))
        if p.region != "2" or q is None:
            continue
        for k in range(len(p)):
            idd.append(abs(nm.conj(p.R_u[k]) * p.T_u[k] + q.R_u[k] * nm.conj(p.T_u[k])))
            idd.append(abs(nm.conj(q.R_u[k]) * q.T_u[k] + p.R_u[k] * nm.conj(q.T_u[k])))
    for x, wt in data.gap_samples:
        i69.append(abs(nm.cplx(wt).imag) / (1 + abs(wt)))
    rep.add("conjugation", _max(ia), tol["conjugation"], "conjugation symmetry of T and R")
    rep.add("phase_relation", _max(ib), tol["phase_relation"], f"{len(ib)} nodes in multiplicity-one parts")
    rep.add("energy_balance", _max(ic), tol["energy_balance"], f"{len(ic)} nodes in sigma2")
    rep.add("consistency", _max(idd), tol["consistency"], "consistency on sigma2")
    rep.add("transmission_wronskian", _max(i218), tol["transmission_wronskian"], "T rho W = 1")
    rep.add("wronskian_symmetry", _max(i69), tol["wronskian_symmetry"], "W~ conjugation and reality")
    tp, tm = data.t_inf
    rep.add("transmission_at_infinity", abs(tp - tm) / abs(tp) if tp > 0 and tm > 0 else 1, tol["transmission_at_infinity"], f"T+={float(tp):.12g}")
    ev = data.eigenvalues
    rep.add("norming_derivative", _max(e.derivative_defect for e in ev), tol["norming_derivative"], f"{len(ev)} eigenvalues")
    rep.add("proportionality_product", _max(abs(e.c_plus * e.c_minus - 1) for e in ev), tol["proportionality_product"])
    bad = sum(1 for e in ev if not (e.gamma_plus > 0 and e.gamma_minus > 0))
    rep.add("gamma_nonpositive", bad, tol["gamma_nonpositive"], "norming constants must be positive")
    p1, signs = [], []
    for e in data.edges:
        if e.virtual or e.R_limit is None:
            continue
        if e.mhat:
            p1.append(abs(abs(e.R_limit) - 1))
            signs.append(f"{e.side}{float(e.E):.6g}:{'+' if e.R_limit.real > 0 else '-'}1")
        else:
            p1.append(abs(e.R_limit + 1))
    rep.add("edge_reflection", _max(p1), tol["edge_reflection"], "M^ edge signs " + (",".join(signs) or "none"))
    rep.add("reflection_continuity", _max(jump), tol["reflection_continuity"], "isolated jump of R between adjacent nodes")
    bad = sum(1 for e in data.edges if e.virtual and not e.allowed)
    rep.add("virtual_inclusion", bad, tol["virtual_inclusion"], "virtual levels outside the admissible set")
    return rep


# --------------------------------------------------------------------------
# transformation kernels


@dataclass(frozen=True)
class TransformationKernel:
    """``K(n, m)`` of ``psi_side(n) = sum_m K(n, m) psi_q(m)``.

    ``rows[n][k]`` holds ``K(n, n + k)`` (side ``+``) or ``K(n, n - k)``
    (side ``-``) for ``0 <= k <= M``; entries beyond ``M`` are taken as 0.
    """

    side: str
    rows: dict
    M: int

    def __call__(self, n, m):
        k = m - n if self.side == "+" else n - m
        if k < 0:
            raise ValueError("kernel is triangular: K(n, m) = 0 on the wrong side")
        if k > self.M:
            return mpfr(0)
        return self.rows[n][k]

    @property
    def sites(self):
        return sorted(self.rows)

    def diagonal(self, n):
        return self.rows[n][0]

    def synthesize(self, model, z, n, sheet=None):
        """``sum_m K(n, m) psi_q(z, m)`` (the Jost representation)."""
        br = branch_at(model, z, sheet)
        sgn = 1 if self.side == "+" else -1
        return sum(self.rows[n][k] * br(n + sgn * k) for k in range(self.M + 1))

    def coefficients(self, model, n):
        """``(a(n), b(n))`` from the reconstruction identities."""
        return kernel_coefficients(self.side, model, self, n)

    def tail_sum(self, spec, n):
        """``B(n)``: sum of ``b_q - b`` beyond ``n`` on the decaying side."""
        model = spec.model(self.side)
        if self.side == "+":
            rng = range(n + 1, max(n + 1, spec.right_start))
        else:
            rng = range(min(n, spec.left_end), n)
        return sum((model.b_at(m) - coefficient(spec, m)[1] for m in rng), mpfr(0))


def kernel_coefficients(side, model, K, n):
    """``(a(n), b(n))`` from a kernel callable ``K(n, m)`` and its background."""
    aq, bq, aq1 = model.a_at(n), model.b_at(n), model.a_at(n - 1)
    if side == "+":
        a = aq * K(n + 1, n + 1) / K(n, n)
        b = bq + aq * K(n, n + 1) / K(n, n) - aq1 * K(n - 1, n) / K(n - 1, n - 1)
    else:
        a = aq * K(n, n) / K(n + 1, n + 1)
        b = bq + aq1 * K(n, n - 1) / K(n, n) - aq * K(n + 1, n) / K(n + 1, n + 1)
    return a, b


@nm.precise
def kernel_from_jost(spec, side, n_range, M, node_count=256):
    """Project the Jost solution onto the background Floquet system.

    ``K(n, m) = oint psi_side(lam, n) conj(psi_q(lam, m)) d omega_side`` over
    the bands of the side's background.
    """
    side = normalize_side(side)
    model = spec.model(side)
    ns = list(n_range)
    sgn = 1 if side == "+" else -1
    ms = sorted({n + sgn * k for n in ns for k in range(M + 1)})
    acc = {(n, m): mpc(0) for n in ns for m in ms}
    pts = breakpoints(spec)
    for rule in spectral_rules(model, node_count, pts):
        for x, w in zip(rule.nodes, rule.weights):
            br = branch_at(model, x, "u")
            J = JostSolution(spec, side, x, "u")
            rho = weight_rho(model, x, "u")
            jv = {n: J(n) * w * rho for n in ns}
            qv = {m: nm.conj(br(m)) for m in ms}
            for n in ns:
                for m in ms:
                    acc[n, m] += jv[n] * qv[m]
    pi = gmpy2.const_pi()
    rows = {}
    for n in ns:
        rows[n] = tuple(acc[n, n + sgn * k].imag / pi for k in range(M + 1))
    return TransformationKernel(side, rows, M)
