"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when user input violates a documented precondition."""


class SamplerError(RuntimeError):
    """Raised when an internal numerical invariant breaks (indicates a bug)."""
