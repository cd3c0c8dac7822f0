"""Exception types raised across the toolkit.

Every error condition with a distinct recovery path gets its own class so
callers (and the CLI) can map failures to exit codes without string matching.
"""


class ModelmarkError(Exception):
    """Base class for all modelmark errors."""


class InvalidInputError(ModelmarkError, ValueError):
    """An argument violates an operation's precondition."""


class FormatError(ModelmarkError, ValueError):
    """A byte stream does not match its declared format."""


class TruncationError(FormatError):
    """A stream ended before the declared payload was complete."""


class UnsupportedFormatError(FormatError):
    """The format is recognized but a variant we do not handle."""


class InconsistencyError(FormatError):
    """Two related inputs disagree (e.g. image/label counts)."""


class EmptySourceError(ModelmarkError):
    """A frame source yielded nothing parseable."""


class InsufficientFramesError(ModelmarkError):
    """Fewer frames available than the requested selection size."""


class ContentTooSimilarError(ModelmarkError):
    """Trigger selection could not reach the required dissimilarity."""

    def __init__(self, best_distance: int, required: int):
        self.best_distance = best_distance
        self.required = required
        super().__init__(
            f"best achievable min pairwise distance {best_distance} "
            f"< required {required}"
        )


class DivergenceError(ModelmarkError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"loss became non-finite at epoch {epoch}")


class UnsupportedArchitectureError(ModelmarkError):
    """A model transformation does not apply to this layer stack."""


class CorruptionError(ModelmarkError):
    """Stored data failed an integrity check."""


class ClockSkewError(ModelmarkError):
    """System clock is behind the last ledger record."""


class CollisionError(ModelmarkError):
    """Two enrollments produced the same verification value."""


class TransportError(ModelmarkError):
    """A network round trip failed or timed out."""


class ProtocolError(ModelmarkError):
    """A peer sent bytes that do not follow the wire protocol."""


class RequestRejectedError(ModelmarkError):
    """The service answered with an error object instead of a class."""

    def __init__(self, error_code: str, request_id: str | None = None):
        self.error_code = error_code
        self.request_id = request_id
        super().__init__(f"request rejected: {error_code}")
