"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`MDKError`.
The CLI maps :class:`DomainError` subclasses to exit code 2 and
:class:`NumericalError` to exit code 3.
"""


class MDKError(Exception):
    """Base class for library errors."""


class DomainError(MDKError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionError(DomainError):
    """Arrays that must share a state space have incompatible shapes."""


class CapacityError(DomainError):
    """The requested object exceeds a configured size cap."""


class ReversibilityError(DomainError):
    """A chain required to satisfy detailed balance does not."""


class GeneratorError(DomainError):
    """An f-divergence generator is invalid."""


class UnsupportedError(DomainError):
    """The operation is not supported for this input size."""


class ChainParseError(DomainError):
    """A chain file could not be parsed or validated."""


class InfeasibleError(DomainError):
    """No feasible point has finite objective."""


class NumericalError(MDKError, ArithmeticError):
    """An iterative method failed to reach its tolerance."""
