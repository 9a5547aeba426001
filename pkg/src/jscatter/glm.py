"""Gelfand-Levitan-Marchenko kernel, its solution and the reconstruction."""

from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from . import numeric as nm
from .background import branch_at, normalize_side, weight_rho
from .direct import TransformationKernel, kernel_coefficients
from .errors import GridMismatch, NegativeDiagonal, RangeMismatch, SingularSystem
from .steplike import coefficient

OTHER = {"+": "-", "-": "+"}


# --------------------------------------------------------------------------
# dense linear algebra at working precision


def mp_solve(A, b):
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    ``A`` and ``b`` are object arrays of ``mpfr``.  Returns ``(x, pivot_ratio)``
    where ``pivot_ratio`` is max/min of the absolute pivots, a cheap
    conditioning indicator.
    """
    A = np.array(A, dtype=object)
    b = np.array(b, dtype=object)
    n = len(b)
    pivots = []
    for i in range(n):
        col = [abs(A[r, i]) for r in range(i, n)]
        k = i + int(np.argmax(np.array([float(c) for c in col])))
        if gmpy2.is_zero(A[k, i]):
            raise SingularSystem(f"zero pivot in column {i}")
        if k != i:
            A[[i, k]] = A[[k, i]]
            b[[i, k]] = b[[k, i]]
        piv = A[i, i]
        pivots.append(abs(piv))
        if i + 1 < n:
            f = A[i + 1 :, i] / piv
            A[i + 1 :, i:] -= np.multiply.outer(f, A[i, i:])
            b[i + 1 :] -= f * b[i]
    x = np.empty(n, dtype=object)
    for i in range(n - 1, -1, -1):
        acc = b[i]
        if i + 1 < n:
            acc -= np.dot(A[i, i + 1 :], x[i + 1 :])
        x[i] = acc / A[i, i]
    return x, max(pivots) / min(pivots)


# --------------------------------------------------------------------------
# GLM kernel


@dataclass
class GLMKernel:
    """``F_side(m, n)`` tabulated for ``lo <= m, n <= hi``."""

    side: str
    lo: int
    hi: int
    table: np.ndarray  # object array of mpfr
    imag_residue: object  # largest |Im F| / (1 + |F|) before discarding
    parts: dict = field(default_factory=dict)  # individual summands

    def __call__(self, m, n):
        if not (self.lo <= m <= self.hi and self.lo <= n <= self.hi):
            raise RangeMismatch(f"F({m}, {n}) outside tabulated window [{self.lo}, {self.hi}]")
        return self.table[m - self.lo, n - self.lo]

    @property
    def symmetry_defect(self):
        T = self.table
        d = T - T.T
        scale = 1 + np.abs(T).max()
        return max(abs(x) for x in d.ravel()) / scale

    def diagnostics(self, start, length=40, floor=mpfr("1e-60")):
        """The three decay sums on the window of ``length`` sites from ``start``.

        The window runs outward: ``start <= n <= start + length`` for side
        ``+`` and ``start - length <= n <= start`` for side ``-``, clipped to
        the table.  Shifting ``start`` outward moves the window rather than
        shrinking it, so a decrease is evidence of decay, not of fewer terms.
        Terms below ``floor`` count as zero.
        """
        s = 1 if self.side == "+" else -1
        end = min(start + length, self.hi - 1) if s > 0 else max(start - length, self.lo + 1)
        ns = list(range(start, end + s, s))

        def cut(x):
            return x if x > floor else mpfr(0)

        F, aq = self, self.model.a_at
        d1 = cut(max(abs(F(m, n)) for m in ns for n in ns))
        d2 = sum((abs(n) * cut(abs(F(n, n) - F(n + s, n + s))) for n in ns), mpfr(0))
        d3 = sum((abs(n) * cut(abs(aq(n) * F(n, n + 1) - aq(n - 1) * F(n - 1, n))) for n in ns[1:]), mpfr(0))
        return d1, d2, d3


def _check_grid(data, spec, side):
    model = spec.model(side)
    panels = data.panels.get(side, [])
    if not panels:
        raise GridMismatch(f"no scattering data for side {side}")
    covered = sum((p.hi - p.lo for p in panels), mpfr(0))
    want = sum((hi - lo for lo, hi in model.bands.bands), mpfr(0))
    if abs(covered - want) > mpfr("1e-30") * (1 + want):
        raise GridMismatch(f"panels of side {side} do not tile its spectrum")
    for p in panels:
        n = len(p.nodes)
        cols = (p.weights, p.R_u, p.R_l, p.W_u)
        if any(len(c) != n for c in cols):
            raise GridMismatch("sample columns and nodes differ in length")
        if not all(p.lo < x < p.hi for x in p.nodes):
            raise GridMismatch(f"nodes outside panel [{float(p.lo)}, {float(p.hi)}]")
        if not model.bands.contains((p.lo + p.hi) / 2):
            raise GridMismatch("panel lies outside the spectrum of its side")


class _Hankel:
    """Accumulates ``sum_j c_j u_r u_s w_j**k`` for the block-Hankel structure."""

    def __init__(self, N, kmin, kmax):
        self.N, self.kmin, self.kmax = N, kmin, kmax
        self.G = np.empty((N, N, kmax - kmin + 1), dtype=object)
        self.G.fill(mpc(0))

    def add(self, c, br):
        w = br.w
        pw = np.empty(self.kmax - self.kmin + 1, dtype=object)
        x = w**self.kmin
        for k in range(len(pw)):
            pw[k] = x
            x *= w
        u = br.u
        for r in range(self.N):
            for s in range(r, self.N):
                self.G[r, s] += (c * u[r] * u[s]) * pw

    def table(self, lo, hi):
        N = self.N
        idx = np.arange(lo, hi + 1)
        p, r = np.divmod(idx, N)
        out = np.empty((len(idx), len(idx)), dtype=object)
        for i in range(len(idx)):
            for j in range(i, len(idx)):
                a, b = (r[i], r[j]) if r[i] <= r[j] else (r[j], r[i])
                out[i, j] = out[j, i] = self.G[a, b, p[i] + p[j] - self.kmin]
        return out


@nm.precise
def glm_kernel_table(data, spec, side, lo, hi, check_tol=1e-10):
    """Assemble ``F_side(m, n)`` for ``lo <= m, n <= hi``.

    Three summands: the reflection integral over ``sigma_side``, the
    transmission integral over the multiplicity-one part of the other side,
    and the eigenvalue sum.
    """
    side = normalize_side(side)
    oside = OTHER[side]
    model, omodel = spec.model(side), spec.model(oside)
    _check_grid(data, spec, side)
    N = model.period
    kmin, kmax = 2 * (lo // N), 2 * (hi // N)
    up, low, trans = _Hankel(N, kmin, kmax), _Hankel(N, kmin, kmax), _Hankel(N, kmin, kmax)
    for p in data.panels[side]:
        for x, w, Ru, Rl in zip(p.nodes, p.weights, p.R_u, p.R_l):
            bu = branch_at(model, x, "u")
            rho = weight_rho(model, x, "u")
            up.add(w * Ru * rho, bu)
            bl = branch_at(model, x, "l")
            low.add(w * Rl * nm.conj(rho), bl)
    for p in data.panels.get(oside, []):
        if p.region != "1":
            continue
        for x, w, W in zip(p.nodes, p.weights, p.W_u):
            br = branch_at(model, x)
            rho = weight_rho(omodel, x, "u")
            # |T|^2 through the Wronskian: T rho W = 1
            trans.add(w * rho / abs(rho * W) ** 2, br)
    two_pi_i = 2 * gmpy2.const_pi() * mpc(0, 1)
    t1 = (up.table(lo, hi) - low.table(lo, hi)) / two_pi_i
    t2 = trans.table(lo, hi) / two_pi_i
    idx = list(range(lo, hi + 1))
    t3 = np.empty((len(idx), len(idx)), dtype=object)
    t3.fill(mpfr(0))
    for e in data.eigenvalues:
        g = e.gamma_plus if side == "+" else e.gamma_minus
        br = branch_at(model, e.lam, regularize=True)
        v = np.array([br(n).real for n in idx], dtype=object)
        t3 = t3 + g * np.multiply.outer(v, v)
    total = t1 + t2
    re = np.vectorize(lambda z: z.real, otypes=[object])(total) + t3
    resid = max(abs(z.imag) / (1 + abs(z)) for z in total.ravel())
    if resid > check_tol:
        from .errors import SymmetryViolation

        raise SymmetryViolation(f"GLM kernel has imaginary part {float(resid):.3g}")
    real = np.vectorize(lambda z: z.real, otypes=[object])
    F = GLMKernel(side, lo, hi, re, resid, {"reflection": real(t1), "transmission": real(t2), "eigen": t3})
    F.model = model
    return F


def glm_kernel(data, spec, side, m, n):
    """Single entry ``F_side(m, n)``."""
    lo, hi = min(m, n), max(m, n)
    return glm_kernel_table(data, spec, side, lo, hi)(m, n)


# --------------------------------------------------------------------------
# solving the GLM equation


@dataclass(frozen=True)
class GLMRow:
    n: int
    side: str
    K: tuple  # K(n, n), K(n, n +- 1), ..., K(n, n +- M)
    residual: object  # relative residual of the original equation
    pivot_ratio: object
    tail: object  # largest |kappa| over the last quarter of the window


def _row_indices(side, n, M):
    s = 1 if side == "+" else -1
    return [n + s * k for k in range(M + 1)]


@nm.precise
def glm_solve(F, n, M):
    """Solve the GLM equation for the row ``K(n, .)`` on a window of length ``M``.

    Unknowns ``kappa(l) = K(n, l) / K(n, n)`` for ``l`` beyond ``n`` satisfy
    ``kappa(m) + sum_l kappa(l) F(l, m) = -F(n, m)``; then
    ``K(n, n) = (1 + F(n, n) + sum_l kappa(l) F(l, n))**(-1/2)``.
    """
    idx = _row_indices(F.side, n, M)
    rest = idx[1:]
    k = len(rest)
    A = np.empty((k, k), dtype=object)
    for i, m in enumerate(rest):
        for j, l in enumerate(rest):
            A[i, j] = F(l, m) + (1 if i == j else 0)
    rhs = np.array([-F(n, m) for m in rest], dtype=object)
    kappa, ratio = mp_solve(A, rhs) if k else (np.array([], dtype=object), mpfr(1))
    rad = 1 + F(n, n) + sum((kappa[j] * F(l, n) for j, l in enumerate(rest)), mpfr(0))
    if rad <= 0:
        raise NegativeDiagonal(f"K({n},{n})**-2 = {float(rad):.6g} is not positive")
    Knn = 1 / gmpy2.sqrt(rad)
    row = [Knn] + [Knn * x for x in kappa]
    # residual of K(n, m) + sum_l K(n, l) F(l, m) = delta(n, m) / K(n, n)
    res, scale = mpfr(0), mpfr(0)
    for m in idx:
        acc = sum((row[j] * F(l, m) for j, l in enumerate(idx)), mpfr(0))
        lhs = row[m - n if F.side == "+" else n - m] + acc
        rhs_m = 1 / Knn if m == n else 0
        res = max(res, abs(lhs - rhs_m))
        scale = max(scale, abs(row[m - n if F.side == "+" else n - m]) + abs(acc))
    q = max(1, k // 4)
    tail = max((abs(x) for x in kappa[-q:]), default=mpfr(0))
    return GLMRow(n, F.side, tuple(row), res / (1 + scale), ratio, tail)


def kernel_from_rows(rows, side, M):
    return TransformationKernel(side, {r.n: r.K for r in rows}, M)


# --------------------------------------------------------------------------
# reconstruction


@dataclass
class ReconstructionReport:
    sites: list
    a_plus: list
    b_plus: list
    a_minus: list
    b_minus: list
    a_true: list = None
    b_true: list = None
    K_plus: TransformationKernel = None
    K_minus: TransformationKernel = None
    glm_residual: object = None
    solution_residual: object = None
    window: int = None

    @property
    def coincidence_error(self):
        da = max(abs(x - y) for x, y in zip(self.a_plus, self.a_minus))
        db = max(abs(x - y) for x, y in zip(self.b_plus, self.b_minus))
        return da + db

    @property
    def roundtrip_error(self):
        if self.a_true is None:
            return None
        err = mpfr(0)
        for ap, bp, am, bm, a, b in zip(self.a_plus, self.b_plus, self.a_minus, self.b_minus, self.a_true, self.b_true):
            err = max(err, abs(ap - a) + abs(bp - b), abs(am - a) + abs(bm - b))
        return err


def reconstruct(K_plus, K_minus, spec, report_range=(-20, 20)):
    """Coefficients ``a_+-(n), b_+-(n)`` from both transformation kernels."""
    lo, hi = report_range
    need = set(range(lo - 1, hi + 2))
    for K in (K_plus, K_minus):
        if not need <= set(K.rows):
            raise RangeMismatch(f"kernel rows {min(K.rows)}..{max(K.rows)} do not cover {lo - 1}..{hi + 1}")
    sites = list(range(lo, hi + 1))
    ap, bp, am, bm, at, bt = [], [], [], [], [], []
    for n in sites:
        a, b = kernel_coefficients("+", spec.right, K_plus, n)
        ap.append(a)
        bp.append(b)
        a, b = kernel_coefficients("-", spec.left, K_minus, n)
        am.append(a)
        bm.append(b)
        a, b = coefficient(spec, n)
        at.append(a)
        bt.append(b)
    return ReconstructionReport(sites, ap, bp, am, bm, at, bt, K_plus, K_minus)


@nm.precise
def solution_residual(rep, spec, z="0.3+0.7j"):
    """Largest relative residual of the three-term equation for the synthesized
    ``psi_+-`` with the reconstructed coefficients."""
    z = nm.cplx(z)
    worst = mpfr(0)
    for K, model, a_rec, b_rec in (
        (rep.K_plus, spec.right, rep.a_plus, rep.b_plus),
        (rep.K_minus, spec.left, rep.a_minus, rep.b_minus),
    ):
        a = dict(zip(rep.sites, a_rec))
        b = dict(zip(rep.sites, b_rec))
        lo, hi = rep.sites[0], rep.sites[-1]
        n = lo - 1
        ratio = K(n + 1, n + 1) / K(n, n)
        a[n] = model.a_at(n) * (ratio if K.side == "+" else 1 / ratio)
        psi = {n: K.synthesize(model, z, n) for n in range(lo - 1, hi + 2)}
        for n in range(lo, hi + 1):
            lhs = a[n - 1] * psi[n - 1] + b[n] * psi[n] + a[n] * psi[n + 1]
            scale = abs(a[n - 1] * psi[n - 1]) + abs(b[n] * psi[n]) + abs(a[n] * psi[n + 1]) + abs(z * psi[n])
            worst = max(worst, abs(lhs - z * psi[n]) / scale)
    return worst


# --------------------------------------------------------------------------
# inverse driver


@dataclass
class InverseResult:
    report: ReconstructionReport
    kernels: dict  # side -> GLMKernel
    rows: dict  # side -> list of GLMRow
    window: int


def _solve_side(data, spec, side, lo, hi, M):
    if side == "+":
        F = glm_kernel_table(data, spec, side, lo - 1, hi + 1 + M)
    else:
        F = glm_kernel_table(data, spec, side, lo - 1 - M, hi + 1)
    rows = [glm_solve(F, n, M) for n in range(lo - 1, hi + 2)]
    return F, rows


@nm.precise
def inverse(data, spec, report_range=(-20, 20), M=80, max_M=640, tail_tol=1e-14):
    """Solve both GLM equations and reconstruct the coefficients.

    The window grows by half while the normalized kernel rows have not decayed
    below ``tail_tol`` at their far end.
    """
    lo, hi = report_range
    while True:
        out = {s: _solve_side(data, spec, s, lo, hi, M) for s in ("+", "-")}
        tail = max(r.tail / (1 + max(abs(x) for x in r.K)) for s in out for r in out[s][1])
        if tail < tail_tol or M >= max_M:
            break
        # rows left of the window need about 2|n| entries; grow gently since
        # the solves cost O(M^3)
        M = min(max_M, M * 3 // 2)
    Kp = kernel_from_rows(out["+"][1], "+", M)
    Km = kernel_from_rows(out["-"][1], "-", M)
    rep = reconstruct(Kp, Km, spec, report_range)
    rep.glm_residual = max(r.residual for s in out for r in out[s][1])
    rep.solution_residual = solution_residual(rep, spec)
    rep.window = M
    return InverseResult(rep, {s: out[s][0] for s in out}, {s: out[s][1] for s in out}, M)
