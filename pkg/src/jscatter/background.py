"""Periodic finite-gap backgrounds.

A background is a period-``N`` Jacobi operator.  Everything needed by the
scattering machinery is derived from the one-period transfer matrix: band
edges, Dirichlet data, Floquet solutions and the spectral weight ``rho``.

Conventions
-----------
``side='right'`` (also written ``'+'``) means the Floquet solution decays as
``n -> +inf``; ``side='left'`` (``'-'``) decays as ``n -> -inf``.  Points on
the spectrum are boundary values, selected with ``sheet='u'`` (limit from
the upper half-plane) or ``sheet='l'``.
"""

from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from . import numeric as nm
from .errors import AtBandEdge, AtDirichletPole, DegenerateGap, NonPositiveCoefficient

#: relative closeness of a Dirichlet point to an edge that makes it class M-hat
MHAT_TOL = 1e-9
#: relative distance below which a point counts as sitting on an edge/pole
POINT_TOL = mpfr("1e-40")

_SIDES = {"+": "+", "right": "+", "-": "-", "left": "-"}


def normalize_side(side):
    try:
        return _SIDES[side]
    except KeyError:
        raise ValueError(f"unknown side {side!r}") from None


@dataclass(frozen=True)
class PeriodicBackground:
    a: tuple
    b: tuple
    side: str = "+"

    def __post_init__(self):
        if len(self.a) == 0 or len(self.a) != len(self.b):
            raise ValueError("a and b must be non-empty and of equal length")
        a = tuple(nm.real(x) for x in self.a)
        b = tuple(nm.real(x) for x in self.b)
        if any(x <= 0 for x in a):
            raise NonPositiveCoefficient(f"off-diagonal coefficients must be positive: {self.a}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "side", normalize_side(self.side))

    @property
    def period(self):
        return len(self.a)

    def a_at(self, n):
        return self.a[n % len(self.a)]

    def b_at(self, n):
        return self.b[n % len(self.b)]


@dataclass(frozen=True)
class BandStructure:
    edges: tuple

    def __post_init__(self):
        e = self.edges
        if len(e) % 2 or len(e) < 2:
            raise ValueError("need an even, positive number of band edges")
        if any(e[i] >= e[i + 1] for i in range(len(e) - 1)):
            raise DegenerateGap("band edges are not strictly increasing")

    @property
    def genus(self):
        return len(self.edges) // 2 - 1

    @property
    def bands(self):
        e = self.edges
        return [(e[2 * j], e[2 * j + 1]) for j in range(self.genus + 1)]

    @property
    def gaps(self):
        """Finite gaps followed by the two unbounded ones."""
        e = self.edges
        inner = [(e[2 * j + 1], e[2 * j + 2]) for j in range(self.genus)]
        inf = mpfr("inf")
        return inner + [(-inf, e[0]), (e[-1], inf)]

    @property
    def diameter(self):
        return self.edges[-1] - self.edges[0]

    def band_index(self, x):
        """Index of the closed band containing real ``x``, else ``None``."""
        for j, (lo, hi) in enumerate(self.bands):
            if lo <= x <= hi:
                return j
        return None

    def contains(self, x):
        return self.band_index(x) is not None


@dataclass(frozen=True)
class DirichletPoint:
    mu: object
    kind: str  # 'M', 'Mbreve' or 'Mhat'
    gap: int  # 1-based gap index j, mu in [E_{2j-1}, E_{2j}]


@dataclass(frozen=True)
class BackgroundModel:
    background: PeriodicBackground
    bands: BandStructure
    dirichlet: tuple
    branch: dict = field(
        default_factory=lambda: {"sqrt": "principal, cut along (-inf, 0)", "boundary": "u = lambda + i0"}
    )

    @property
    def side(self):
        return self.background.side

    @property
    def period(self):
        return self.background.period

    def a_at(self, n):
        return self.background.a_at(n)

    def b_at(self, n):
        return self.background.b_at(n)

    def poles(self, branch="decaying"):
        """Dirichlet points that are poles of the requested branch."""
        kind = "M" if branch == "decaying" else "Mbreve"
        return [d.mu for d in self.dirichlet if d.kind == kind]

    @property
    def mhat(self):
        return [d.mu for d in self.dirichlet if d.kind == "Mhat"]

    def to_json(self):
        return {
            "period": self.period,
            "a": [nm.to_str(x) for x in self.background.a],
            "b": [nm.to_str(x) for x in self.background.b],
            "side": "right" if self.side == "+" else "left",
            "edges": [nm.to_str(x) for x in self.bands.edges],
            "dirichlet": [{"mu": nm.to_str(d.mu), "class": d.kind, "gap": d.gap} for d in self.dirichlet],
        }


# --------------------------------------------------------------------------
# transfer matrices


def fundamental(bg, z, deriv=False):
    """Fundamental solutions ``c``, ``s`` on ``0..N+1`` (and z-derivatives).

    ``c(0)=1, c(1)=0`` and ``s(0)=0, s(1)=1``.  The monodromy matrix mapping
    ``(u(0), u(1))`` to ``(u(N), u(N+1))`` is ``[[c(N), s(N)], [c(N+1), s(N+1)]]``.
    """
    N = bg.period
    one, zero = mpc(1), mpc(0)
    c, s = [one, zero], [zero, one]
    dc, ds = [zero, zero], [zero, zero]
    for n in range(1, N + 1):
        an, am, bn = bg.a_at(n), bg.a_at(n - 1), bg.b_at(n)
        c.append(((z - bn) * c[n] - am * c[n - 1]) / an)
        s.append(((z - bn) * s[n] - am * s[n - 1]) / an)
        if deriv:
            dc.append((c[n] + (z - bn) * dc[n] - am * dc[n - 1]) / an)
            ds.append((s[n] + (z - bn) * ds[n] - am * ds[n - 1]) / an)
    if deriv:
        return c, s, dc, ds
    return c, s


def discriminant(bg, z):
    """Trace of the one-period monodromy matrix."""
    c, s = fundamental(bg, nm.cplx(z))
    N = bg.period
    return c[N] + s[N + 1]


def _bloch_eigenvalues(bg, theta):
    N = bg.period
    a = np.array([float(x) for x in bg.a])
    b = np.array([float(x) for x in bg.b])
    H = np.diag(b).astype(complex)
    for n in range(N - 1):
        H[n, n + 1] += a[n]
        H[n + 1, n] += a[n]
    ph = np.exp(1j * theta)
    H[N - 1, 0] += a[N - 1] * ph
    H[0, N - 1] += a[N - 1] * np.conj(ph)
    return np.linalg.eigvalsh(H)


def _newton(f_df, x0, scale, maxit=200):
    x = nm.real(x0)
    tol = nm.eps() * 16 * scale
    for _ in range(maxit):
        f, df = f_df(x)
        step = f / df
        x -= step
        if abs(step) <= tol:
            break
    return x


def band_edges(bg):
    """Band edges ``E_0 < ... < E_{2g+1}`` refined to working precision."""
    N = bg.period
    guesses = [(e, 2) for e in _bloch_eigenvalues(bg, 0.0)]
    guesses += [(e, -2) for e in _bloch_eigenvalues(bg, np.pi)]
    guesses.sort(key=lambda t: t[0])
    vals = [g[0] for g in guesses]
    diam = vals[-1] - vals[0] if len(vals) > 1 else 1.0
    for j in range(1, len(vals) - 1, 2):
        if vals[j + 1] - vals[j] <= 1e-10 * max(diam, 1.0):
            raise DegenerateGap(f"closed gap near {vals[j]:.12g}")

    def f_df(target):
        def inner(x):
            c, s, dc, ds = fundamental(bg, mpc(x), deriv=True)
            return (c[N] + s[N + 1] - target).real, (dc[N] + ds[N + 1]).real

        return inner

    scale = mpfr(max(abs(v) for v in vals) + 1.0)
    edges = [_newton(f_df(t), mpfr(float(e)), scale) for e, t in guesses]
    return BandStructure(tuple(edges))


def dirichlet_points(bg, bands):
    """Locate and classify the Dirichlet eigenvalues (zeros of ``s(N)``)."""
    N = bg.period
    if N == 1:
        return ()
    a = np.array([float(bg.a_at(n)) for n in range(1, N - 1)])
    b = np.array([float(bg.b_at(n)) for n in range(1, N)])
    if N == 2:
        guesses = list(b)
    else:
        guesses = list(np.linalg.eigvalsh(np.diag(b) + np.diag(a, 1) + np.diag(a, -1)))

    def f_df(x):
        c, s, dc, ds = fundamental(bg, mpc(x), deriv=True)
        return s[N].real, ds[N].real

    edges = bands.edges
    diam = bands.diameter
    scale = abs(edges[0]) + abs(edges[-1]) + 1
    out = []
    for j, g in enumerate(sorted(guesses), start=1):
        mu = _newton(f_df, mpfr(float(g)), scale)
        lo, hi = edges[2 * j - 1], edges[2 * j]
        near = min((lo, hi), key=lambda e: abs(mu - e))
        if abs(mu - near) < MHAT_TOL * diam:
            out.append(DirichletPoint(near, "Mhat", j))
            continue
        c, s = fundamental(bg, mpc(mu))
        m22 = abs(s[N + 1])
        # the branch whose multiplier equals m22 has the pole
        pole_on_small = m22 < 1
        decaying_small = bg.side == "+"
        kind = "M" if pole_on_small == decaying_small else "Mbreve"
        out.append(DirichletPoint(mu, kind, j))
    return tuple(out)


@nm.precise
def build_background(a_q, b_q, side="right"):
    """Build a :class:`BackgroundModel` from one period of coefficients.

    >>> m = build_background([0.5], [0.0])
    >>> [float(e) for e in m.bands.edges]
    [-1.0, 1.0]
    """
    bg = PeriodicBackground(tuple(a_q), tuple(b_q), side)
    bands = band_edges(bg)
    return BackgroundModel(bg, bands, dirichlet_points(bg, bands))


def background_from_json(obj, side):
    if "period" in obj and obj["period"] != len(obj["a"]):
        raise ValueError("period does not match coefficient list length")
    return build_background(obj["a"], obj["b"], side)


# --------------------------------------------------------------------------
# Floquet solutions


@dataclass(frozen=True)
class FloquetBranch:
    """One Floquet branch at a fixed spectral point.

    ``psi(n) = w**p * u[r]`` with ``n = p*N + r``.  ``scale`` is the
    regularizing factor already folded into ``u`` (1 if none).
    """

    w: object
    u: tuple
    period: int

    def __call__(self, n):
        p, r = divmod(n, self.period)
        return self.w**p * self.u[r]

    def values(self, indices):
        return [self(n) for n in indices]


def _near(x, points, scale):
    for p in points:
        if abs(x - p) <= POINT_TOL * scale:
            return p
    return None


def _point(model, z, sheet):
    """Normalize ``z``; return (z, on_spectrum_flag)."""
    z = nm.cplx(z)
    scale = 1 + abs(model.bands.edges[0]) + abs(model.bands.edges[-1])
    if gmpy2.is_zero(z.imag):
        x = z.real
        if _near(x, model.bands.edges, scale) is not None:
            raise AtBandEdge(f"z={float(x):.16g} is a band edge")
        if model.bands.contains(x):
            if sheet not in ("u", "l"):
                raise ValueError("points on the spectrum need sheet='u' or 'l'")
            return z, True
    return z, False


def _multipliers(model, z, on_spec, Delta):
    """Return (decaying multiplier) off the spectrum or both unit-circle roots."""
    if on_spec:
        d = Delta.real
        r = gmpy2.sqrt(max(4 - d * d, mpfr(0)))
        return mpc(d, r) / 2, mpc(d, -r) / 2
    sq = nm.csqrt(Delta * Delta - 4)
    w1, w2 = (Delta + sq) / 2, (Delta - sq) / 2
    big = w1 if abs(w1) >= abs(w2) else w2
    small = 1 / big
    return (small, big) if model.side == "+" else (big, small)


def _u1(w, c, s, N):
    """Second component of the Floquet eigenvector normalized by u(0)=1."""
    m11, m12, m21, m22 = c[N], s[N], c[N + 1], s[N + 1]
    d1, d2 = m12, w - m22
    if abs(d1) >= abs(d2):
        return (w - m11) / d1
    if gmpy2.is_zero(d2):
        raise AtDirichletPole("Floquet branch has a pole here")
    return m21 / d2


def branch_at(model, z, sheet=None, branch="decaying", regularize=False):
    """Evaluate a Floquet branch as a :class:`FloquetBranch`.

    ``branch='decaying'`` is ``psi_q``; ``'other'`` is the second solution.
    With ``regularize=True`` the branch is multiplied by the product of
    ``(z - mu)`` over its poles (``delta`` resp. ``delta-breve``), which
    stays finite on the poles themselves.
    """
    z, on_spec = _point(model, z, sheet)
    bg = model.background
    N = bg.period
    scale = 1 + abs(model.bands.edges[0]) + abs(model.bands.edges[-1])
    c, s, dc, ds = fundamental(bg, z, deriv=True)
    Delta = c[N] + s[N + 1]
    first, second = _multipliers(model, z, on_spec, Delta)
    if on_spec:
        # choose the unit-circle root that gives Im rho(lambda^u) > 0
        u1 = _u1(first, c, s, N)
        if (u1.imag < 0) != (model.side == "+"):
            first, second = second, first
        if sheet == "l":
            first, second = second, first
    w = first if branch == "decaying" else second

    poles = model.poles(branch)
    hit = _near(z.real, poles, scale) if gmpy2.is_zero(z.imag) else None
    if hit is not None and not regularize:
        raise AtDirichletPole(f"z={float(z.real):.16g} is a pole of the {branch} branch")
    if not regularize:
        u1 = _u1(w, c, s, N)
        return FloquetBranch(w, tuple(c[r] + s[r] * u1 for r in range(N)), N)

    factor = mpc(1)
    for mu in poles:
        if mu is not hit:
            factor *= z - mu
    if hit is not None:
        # (z - mu) * u1 -> (w - m11) / s_N'(mu); the c-part is killed by (z - mu)
        du1 = factor * (w - c[N]) / ds[N]
        return FloquetBranch(w, tuple(s[r] * du1 for r in range(N)), N)
    u1 = _u1(w, c, s, N)
    return FloquetBranch(w, tuple(factor * (c[r] + s[r] * u1) for r in range(N)), N)


@nm.precise
def floquet(model, z, n, sheet=None):
    """Floquet solution ``psi_q(z, n)`` normalized by ``psi_q(z, 0) = 1``."""
    return branch_at(model, z, sheet)(n)


@nm.precise
def floquet_second(model, z, n, sheet=None):
    """The other Floquet branch (growing in the model's decay direction)."""
    return branch_at(model, z, sheet, branch="other")(n)


def background_wronskian(model, f, g, n=0):
    """``a_q(n) (f(n) g(n+1) - f(n+1) g(n))`` for callables ``f``, ``g``."""
    return model.a_at(n) * (f(n) * g(n + 1) - f(n + 1) * g(n))


@nm.precise
def weight_rho(model, z, sheet=None):
    """Spectral weight ``rho`` via the Wronskian of the two Floquet branches."""
    psi = branch_at(model, z, sheet)
    other = branch_at(model, z, sheet, branch="other")
    W = background_wronskian(model, other, psi)
    return 1 / W if model.side == "+" else -1 / W


def P_function(model, z, sheet=None):
    """``-prod_j sqrt(z - E_j)`` with principal roots."""
    z = nm.cplx(z)
    out = mpc(-1)
    for e in model.bands.edges:
        out *= nm.boundary_sqrt(z - e if not gmpy2.is_zero(z.imag) else z.real - e, sheet)
    return out


@nm.precise
def rho_product(model, z, sheet=None):
    """Spectral weight from the product formula ``prod (z - mu_j) / P(z)``."""
    z = nm.cplx(z)
    num = mpc(1)
    for d in model.dirichlet:
        num *= z - d.mu
    return num / P_function(model, z, sheet)


# --------------------------------------------------------------------------
# regularization


def _delta_sets(model):
    M = [d.mu for d in model.dirichlet if d.kind == "M"]
    Mb = [d.mu for d in model.dirichlet if d.kind == "Mbreve"]
    Mh = [d.mu for d in model.dirichlet if d.kind == "Mhat"]
    return M, Mb, Mh


def deltas(model, z, sheet=None):
    """``(delta, delta_hat, delta_breve)`` at ``z``; empty products are 1."""
    z = nm.cplx(z)
    M, Mb, Mh = _delta_sets(model)
    d = mpc(1)
    for mu in M:
        d *= z - mu
    db = mpc(1)
    for mu in Mb:
        db *= z - mu
    root = mpc(1)
    for mu in Mh:
        x = z - mu if not gmpy2.is_zero(z.imag) else z.real - mu
        root *= nm.boundary_sqrt(x, sheet)
    return d, d * root, db * root


@nm.precise
def regularize(model, z, n, sheet=None):
    """Regularizing factors and the regularized Floquet values at ``(z, n)``.

    Returns ``(delta, delta_hat, delta_breve, psi_tilde, psi_hat)``.
    ``psi_tilde`` stays finite at the poles of ``psi_q``.
    """
    d, dh, db = deltas(model, z, sheet)
    tilde = branch_at(model, z, sheet, regularize=True)(n)
    root = dh / d if not gmpy2.is_zero(d) else _mhat_root(model, z, sheet)
    return d, dh, db, tilde, tilde * root


def _mhat_root(model, z, sheet):
    z = nm.cplx(z)
    root = mpc(1)
    for mu in model.mhat:
        x = z - mu if not gmpy2.is_zero(z.imag) else z.real - mu
        root *= nm.boundary_sqrt(x, sheet)
    return root


# --------------------------------------------------------------------------
# large-z asymptotics


def vprod(f, n0, n):
    """Signed product ``prod_{j=n0}^{n-1} f(j)`` (inverse product if n < n0)."""
    out = mpfr(1)
    if n > n0:
        for j in range(n0, n):
            out *= f(j)
    elif n < n0:
        for j in range(n, n0):
            out /= f(j)
    return out


def vsum(f, n0, n):
    """Signed sum ``sum_{j=n0}^{n-1} f(j)`` (negated reverse sum if n < n0)."""
    out = mpfr(0)
    if n > n0:
        for j in range(n0, n):
            out += f(j)
    elif n < n0:
        for j in range(n, n0):
            out -= f(j)
    return out


def asymptotic_expansion(model, z, n):
    """Two-term large-``z`` expansion of ``psi_q(z, n)``."""
    z = nm.cplx(z)
    if model.side == "+":
        lead = z ** (-n) * vprod(model.a_at, 0, n)
        corr = vsum(lambda j: model.b_at(j + 1), 0, n)
        return lead * (1 + corr / z)
    lead = z**n / vprod(model.a_at, 0, n)
    corr = vsum(model.b_at, 0, n)
    return lead * (1 - corr / z)


@nm.precise
def asymptotic_defect(model, n, z):
    """Relative deviation of ``psi_q(z, n)`` from its two-term expansion."""
    exact = floquet(model, z, n)
    return abs(exact - asymptotic_expansion(model, z, n)) / abs(exact)


# --------------------------------------------------------------------------
# orthogonality on the spectrum


def rho_from_branches(model, psi, other):
    W = background_wronskian(model, other, psi)
    return 1 / W if model.side == "+" else -1 / W


@nm.precise
def orthogonality_table(model, indices, node_count=256):
    """``oint conj(psi_q(m)) psi_q(n) d omega`` for all ``m, n`` in ``indices``."""
    from .quadrature import spectral_rules

    indices = list(indices)
    k = len(indices)
    acc = [[mpc(0)] * k for _ in range(k)]
    for rule in spectral_rules(model, node_count):
        for x, w in zip(rule.nodes, rule.weights):
            psi = branch_at(model, x, "u")
            rho = rho_from_branches(model, psi, branch_at(model, x, "u", branch="other"))
            vals = [psi(n) for n in indices]
            wr = w * rho
            for i in range(k):
                ci = vals[i].conjugate() * wr
                row = acc[i]
                for j in range(k):
                    row[j] += ci * vals[j]
    pi = gmpy2.const_pi()
    # conjugate-symmetric integrand: oint = 2i Im(upper), then divide by 2 pi i
    return [[acc[i][j].imag / pi for j in range(k)] for i in range(k)]


@nm.precise
def orthogonality_defect(model, m, n, node_count=256):
    """``|oint conj(psi_q(m)) psi_q(n) d omega - delta(m, n)|``."""
    if node_count < 16:
        raise ValueError("need at least 16 nodes per band")
    table = orthogonality_table(model, [m, n], node_count)
    return abs(table[0][1] - (1 if m == n else 0))
