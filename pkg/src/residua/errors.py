"""Exception hierarchy.

Every error the library raises deliberately derives from ResiduaError, so the
CLI can map failure classes to exit codes: usage problems exit 1, resource
caps and non-convergence exit 2, violated mathematical invariants exit 3.
"""


class ResiduaError(Exception):
    """Base class for all structured errors raised by this package."""


class UsageError(ResiduaError):
    """Bad command line or malformed input file."""


class ParseError(UsageError):
    """Unparseable word, element, or tower text."""


class DescriptorError(UsageError):
    """Structurally valid input that violates a documented precondition."""


class ContextMismatchError(ResiduaError):
    """Operands live over different bases or coefficient shapes."""


class ZeroElementError(ResiduaError):
    """Operation undefined on the zero element (e.g. support radius)."""


class SizeLimitError(ResiduaError):
    """A configured cap would be exceeded; message names the predicted size."""

    def __init__(self, message: str, predicted: int | None = None):
        super().__init__(message)
        self.predicted = predicted


class NonConvergenceError(ResiduaError):
    """An iterative routine hit its iteration cap without converging."""


class InvariantViolationError(ResiduaError):
    """A mathematically guaranteed relation failed at runtime."""


class CounterexampleError(InvariantViolationError):
    """A sampled instance refutes a proved statement; this is a hard stop."""


class InjectivityError(InvariantViolationError):
    """Two distinct ball elements share an image under a map that should
    separate them; carries the colliding pair in the message."""
