"""Extended-precision scalar helpers.

All spectral quantities are carried as ``gmpy2`` numbers.  The inverse
problem is exponentially ill-conditioned away from the side where the data
live, so double precision is not enough for a faithful round trip.
"""

import functools

import gmpy2
from gmpy2 import mpc, mpfr

#: working precision in bits used by every public entry point
PRECISION = 256

SHEETS = (None, "u", "l")


def precision_context(bits=None):
    """Return a context manager running at ``bits`` (default ``PRECISION``)."""
    cur = gmpy2.get_context().precision
    return gmpy2.context(gmpy2.get_context(), precision=max(cur, bits or PRECISION))


def precise(func):
    """Run ``func`` at the working precision unless a higher one is active."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        if gmpy2.get_context().precision >= PRECISION:
            return func(*args, **kwargs)
        with precision_context():
            return func(*args, **kwargs)

    return wrapper


def real(x):
    if isinstance(x, mpfr):
        return +x
    if isinstance(x, mpc):
        return +x.real
    if isinstance(x, complex):
        return mpfr(x.real)
    return mpfr(x)


def cplx(z):
    if isinstance(z, mpc):
        return +z
    if isinstance(z, (mpfr, int, float, complex)):
        return mpc(z)
    if isinstance(z, str):
        return mpc(complex(z)) if "j" in z else mpc(mpfr(z))
    return mpc(complex(z))


def eps():
    """Relative machine epsilon at the active precision."""
    return mpfr(2) ** (1 - gmpy2.get_context().precision)


def csqrt(z):
    """Principal square root, branch cut along the negative real axis."""
    return gmpy2.sqrt(cplx(z))


def boundary_sqrt(x, sheet):
    """Square root of ``x + i0`` (sheet ``'u'``) or ``x - i0`` (sheet ``'l'``).

    For complex ``x`` or ``sheet=None`` this is the principal root.
    """
    if sheet is None or (isinstance(x, mpc) and not gmpy2.is_zero(x.imag)):
        return csqrt(x)
    x = real(x)
    if x >= 0:
        return mpc(gmpy2.sqrt(x))
    r = gmpy2.sqrt(-x)
    return mpc(0, r) if sheet == "u" else mpc(0, -r)


def is_real_point(z):
    z = cplx(z)
    return gmpy2.is_zero(z.imag)


def conj(z):
    return z.conjugate() if isinstance(z, mpc) else z


def to_float(x):
    if isinstance(x, mpc):
        return complex(x)
    return float(x)


def to_str(x, digits=80):
    """Decimal string keeping ``digits`` significant digits."""
    # no rounding to the active context: mpfr values print at their own precision
    return "{0:.{1}g}".format(x if isinstance(x, mpfr) else real(x), digits)
