"""Steplike Jacobi operators: two periodic backgrounds plus a finite override window.

Sites ``n >= 0`` follow the right background and ``n < 0`` the left one,
unless an override is given for ``n``.  ``a(n)`` couples sites ``n`` and
``n + 1``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from . import numeric as nm
from .background import BackgroundModel, background_from_json, build_background
from .errors import NonPositiveCoefficient, SpecError, WindowTooSmall


@dataclass(frozen=True)
class SteplikeSpec:
    left: BackgroundModel
    right: BackgroundModel
    overrides: tuple = ()  # sorted ((n, a, b), ...)

    def __post_init__(self):
        if self.left.side != "-" or self.right.side != "+":
            raise SpecError("left background must have side 'left', right background side 'right'")
        items = []
        seen = set()
        for n, a, b in sorted(self.overrides, key=lambda t: t[0]):
            n = int(n)
            if n in seen:
                raise SpecError(f"duplicate override at n={n}")
            seen.add(n)
            a, b = nm.real(a), nm.real(b)
            if a <= 0:
                raise NonPositiveCoefficient(f"a({n}) = {float(a)} must be positive")
            items.append((n, a, b))
        object.__setattr__(self, "overrides", tuple(items))
        object.__setattr__(self, "_table", {n: (a, b) for n, a, b in items})

    @property
    def window(self):
        """``(n_minus, n_plus)`` spanned by the overrides, or ``None``."""
        if not self.overrides:
            return None
        return self.overrides[0][0], self.overrides[-1][0]

    @property
    def right_start(self):
        """Smallest ``n1`` with right-background coefficients on all of ``[n1, inf)``."""
        w = self.window
        return 0 if w is None else max(0, w[1] + 1)

    @property
    def left_end(self):
        """Largest ``n2`` with left-background coefficients on all of ``(-inf, n2 - 1]``."""
        w = self.window
        return 0 if w is None else min(0, w[0])

    def model(self, side):
        return self.right if side in ("+", "right") else self.left

    def background_coefficient(self, n):
        m = self.right if n >= 0 else self.left
        return m.a_at(n), m.b_at(n)

    def a(self, n):
        return coefficient(self, n)[0]

    def b(self, n):
        return coefficient(self, n)[1]

    def to_json(self):
        return {
            "left": _bg_json(self.left),
            "right": _bg_json(self.right),
            "overrides": [{"n": n, "a": nm.to_str(a), "b": nm.to_str(b)} for n, a, b in self.overrides],
        }


def _bg_json(model):
    bg = model.background
    return {"period": bg.period, "a": [nm.to_str(x) for x in bg.a], "b": [nm.to_str(x) for x in bg.b]}


def coefficient(spec, n):
    """``(a(n), b(n))`` of the steplike operator."""
    hit = spec._table.get(n)
    if hit is not None:
        return hit
    return spec.background_coefficient(n)


@nm.precise
def make_spec(left, right, overrides=()):
    """Build a spec from plain coefficient lists.

    ``left``/``right`` are ``(a_list, b_list)`` pairs or ready
    :class:`BackgroundModel` objects; ``overrides`` maps ``n -> (a, b)`` or is
    a list of ``(n, a, b)``.
    """
    if not isinstance(left, BackgroundModel):
        left = build_background(left[0], left[1], "left")
    if not isinstance(right, BackgroundModel):
        right = build_background(right[0], right[1], "right")
    if isinstance(overrides, dict):
        overrides = [(n, ab[0], ab[1]) for n, ab in overrides.items()]
    return SteplikeSpec(left, right, tuple(overrides))


@nm.precise
def spec_from_json(obj):
    """Parse the operator JSON schema (see README)."""
    try:
        left = background_from_json(obj["left"], "left")
        right = background_from_json(obj["right"], "right")
        ov = [(int(o["n"]), o["a"], o["b"]) for o in obj.get("overrides", [])]
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed operator spec: {exc}") from exc
    return SteplikeSpec(left, right, tuple(ov))


def hypothesis_weight(spec):
    """``sum |n| (|a(n) - a_q(n)| + |b(n) - b_q(n)|)`` over the override window."""
    tot = nm.real(0)
    for n, a, b in spec.overrides:
        aq, bq = spec.background_coefficient(n)
        tot += abs(n) * (abs(a - aq) + abs(b - bq))
    return tot


# --------------------------------------------------------------------------
# dense truncation oracle (double precision on purpose: independent route)


@dataclass(frozen=True)
class DenseTruncation:
    n_min: int
    n_max: int
    diagonal: np.ndarray
    offdiagonal: np.ndarray

    @property
    def matrix(self):
        d, e = self.diagonal, self.offdiagonal
        return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


@dataclass(frozen=True)
class DenseSpectrum:
    eigenvalues: np.ndarray
    gap_candidates: list


def dense_truncation(spec, n_min, n_max):
    ns = range(n_min, n_max + 1)
    d = np.array([float(coefficient(spec, n)[1]) for n in ns])
    e = np.array([float(coefficient(spec, n)[0]) for n in range(n_min, n_max)])
    return DenseTruncation(n_min, n_max, d, e)


def _in_open_gap(spec, x, margin):
    for m in (spec.left, spec.right):
        for lo, hi in m.bands.bands:
            if float(lo) - margin <= x <= float(hi) + margin:
                return False
    return True


def _gap_eigs(spec, n_min, n_max, margin):
    t = dense_truncation(spec, n_min, n_max)
    ev = eigvalsh_tridiagonal(t.diagonal, t.offdiagonal)
    return ev, [x for x in ev if _in_open_gap(spec, x, margin)]


def dense_eigenvalues(spec, n_min=-200, n_max=200, stability=1e-8, margin=1e-6):
    """Eigenvalues of the truncated matrix plus doubling-stable gap candidates.

    A gap eigenvalue is kept only if it reappears within ``stability`` both
    when the truncation radius doubles and when the truncation is shifted by
    one site; the second test removes boundary states of periodic
    backgrounds, which survive plain doubling.
    """
    w = spec.window or (0, 0)
    if not (n_min + 20 <= w[0] and w[1] <= n_max - 20):
        raise WindowTooSmall(f"override window {w} too close to truncation [{n_min}, {n_max}]")
    ev, cand = _gap_eigs(spec, n_min, n_max, margin)
    _, doubled = _gap_eigs(spec, 2 * n_min, 2 * n_max, margin)
    _, shifted = _gap_eigs(spec, n_min - 1, n_max + 1, margin)

    def stable(x, others):
        return any(abs(x - y) < stability for y in others)

    keep = [float(x) for x in cand if stable(x, doubled) and stable(x, shifted)]
    return DenseSpectrum(ev, keep)
