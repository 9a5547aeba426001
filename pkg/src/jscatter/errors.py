"""Exception hierarchy shared by all modules."""


class JScatterError(Exception):
    """Base class for all errors raised by this package."""


class NonPositiveCoefficient(JScatterError, ValueError):
    pass


class DegenerateGap(JScatterError, ValueError):
    """A spectral gap of the periodic background is closed."""


class AtDirichletPole(JScatterError, ValueError):
    pass


class AtBandEdge(JScatterError, ValueError):
    pass


class EmptyBand(JScatterError, ValueError):
    pass


class SymmetryViolation(JScatterError, ValueError):
    """Integrand is not conjugate-symmetric across the cut."""


class WindowTooSmall(JScatterError, ValueError):
    pass


class TooCloseToEdge(JScatterError, ValueError):
    pass


class VirtualLevelNearby(JScatterError, ValueError):
    pass


class RootAtDirichletPoint(JScatterError, ArithmeticError):
    pass


class QuadratureBudgetExceeded(JScatterError, ValueError):
    pass


class GridMismatch(JScatterError, ValueError):
    pass


class SingularSystem(JScatterError, ArithmeticError):
    pass


class NegativeDiagonal(JScatterError, ArithmeticError):
    """The diagonal of the transformation kernel has no positive root.

    This signals scattering data that cannot come from a Jacobi operator.
    """


class RangeMismatch(JScatterError, ValueError):
    pass


class ConfigError(JScatterError, ValueError):
    pass


class SpecError(JScatterError, ValueError):
    pass
