"""Exception types shared across the package."""


class ForestError(Exception):
    """Base class for all library errors."""


class InvalidHandleError(ForestError):
    """A handle is stale (its cluster or block was rebuilt) or never existed."""


class NotConnectedError(ForestError):
    """The two endpoints live in different trees."""


class CycleError(ForestError):
    """Linking the two corners would close a cycle."""


class NotIsolatedError(ForestError):
    """Vertex removal requires degree zero."""


class DegreeLimitError(ForestError):
    """Bounded-degree mode saw a vertex exceeding the configured maximum."""


class FingerBudgetError(ForestError):
    """The mobile-finger registry is full."""


class ClusterSizeError(ForestError):
    """A fragment handed to the micro-tree builder breaks a size precondition."""


class InternalEdgeError(ForestError):
    """The operation addressed a bookkeeping edge that is not part of the forest."""


class WeightRangeError(ForestError):
    """A corner weight left the machine-word range."""


class ExhaustedError(ForestError):
    """A weight-directed search asked for more weight than the tour holds."""


class TraceSyntaxError(ForestError):
    """A trace or forest file failed to parse; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
