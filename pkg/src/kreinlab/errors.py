"""Exception hierarchy.

Every error raised by the library derives from :class:`KreinError`.
Precondition failures on model data are :class:`ModelError` subclasses, which
the command line maps to exit status 3.
"""


class KreinError(Exception):
    """Base class for all library errors."""


class ModelError(KreinError, ValueError):
    """A model or its inputs violate a stated precondition."""


class SingularShift(ModelError):
    """The spectral parameter lies on (or numerically at) the spectrum."""


class NonInvertibleW(ModelError):
    """The coupling matrix is singular; use :func:`compress_singular_w`."""


class InvertibleW(ModelError):
    """Compression requested for a coupling matrix without null space."""


class QPlusWSingular(KreinError, ArithmeticError):
    """``Q(z) + W`` is numerically singular at a nonreal ``z``."""


class ZeroSeparation(ModelError):
    """A kernel was evaluated at zero distance."""


class CoincidentShift(ModelError):
    """Two spectral parameters that must differ coincide."""


class CoincidentCenters(ModelError):
    """Two interaction centers coincide."""


class NonHermitianW(ModelError):
    """The coupling matrix is not Hermitian."""


class AtCenter(ModelError):
    """An evaluation point coincides with an interaction center."""


class ResonantEnergy(ModelError):
    """``Q(z) + W`` is singular at a real energy (a bound state)."""


class RealEnergy(ModelError):
    """A nonreal spectral parameter was required."""


class ZeroEigenvalue(ModelError):
    """The Sturm-Liouville operator has zero as an eigenvalue."""


class SingularLPlusQ(KreinError, ArithmeticError):
    """``L + Q(z)`` is numerically singular at a nonreal ``z``."""


class QuadratureFailure(KreinError, ArithmeticError):
    """Adaptive quadrature exceeded its refinement depth."""


class NonConvergentExtrapolation(KreinError, ArithmeticError):
    """Successive extrapolation stages disagree beyond tolerance."""


class ConfigError(KreinError, ValueError):
    """A run configuration is malformed."""
