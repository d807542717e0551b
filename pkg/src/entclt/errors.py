"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class NumericError(ArithmeticError):
    """A quadrature or series failed to reach its error budget."""


class CapacityError(ValueError):
    """An input exceeds an enumeration cap or is too small to estimate from."""
