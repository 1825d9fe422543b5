class DomainError(ValueError):
    """Argument outside the domain of a function."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""
