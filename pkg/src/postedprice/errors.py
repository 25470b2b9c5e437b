"""Exception hierarchy shared by every module."""


class PostedPriceError(Exception):
    """Base class for all library errors."""


class ParameterError(PostedPriceError, ValueError):
    """A pricing, bound, or generator parameter is outside its valid domain."""


class DomainError(PostedPriceError, ValueError):
    """A numeric argument (utilization, Lambert W argument) is out of range."""


class MalformedRequest(PostedPriceError, ValueError):
    """A job request does not fit the ledger it is quoted against."""


class QuantizationError(PostedPriceError, ValueError):
    """A demand is not aligned to the oracle's capacity grid."""


class OracleCapacityError(PostedPriceError):
    """An instance exceeds the exact solver's search budget."""


class InvariantViolation(PostedPriceError, RuntimeError):
    """Internal consistency check failed; indicates a bug, not bad input."""
