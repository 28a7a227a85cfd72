"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OracleRangeError(DomainError):
    """A numerical oracle was asked to work outside its validity window."""


class PreconditionError(ValueError):
    """An operation's stated precondition does not hold."""


class StructuralError(ValueError):
    """Shapes or dimensions of the inputs are inconsistent."""


class NumericFailure(RuntimeError):
    """Training produced a non-finite loss.

    ``step`` is the 1-based optimizer step that failed and ``trace`` the
    trace of the steps completed before it, when available.
    """

    def __init__(self, message: str, step: int | None = None, trace=None):
        super().__init__(message)
        self.step = step
        self.trace = trace
