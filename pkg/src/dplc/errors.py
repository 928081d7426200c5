"""Exception types shared across the package."""


class NumericalDivergence(RuntimeError):
    """Raised when an iterative solver leaves the representable range."""
