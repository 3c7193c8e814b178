"""Exception types shared across the package."""


class PanoExploreError(Exception):
    """Base class for all package errors."""


class DomainError(PanoExploreError, ValueError):
    """An argument is outside its documented domain."""


class DimensionMismatchError(PanoExploreError, ValueError):
    """Two images/videos that must share dimensions do not."""


class RenderError(PanoExploreError):
    """Rendering preconditions violated (e.g. camera inside geometry)."""


class NoFreePathError(PanoExploreError):
    """Path sampling exhausted its retry budget without a collision-free path."""


class FilteredPathError(PanoExploreError):
    """A loop path was rejected by the obstacle filter."""


class GeneratorError(PanoExploreError):
    """A world generator failed while producing frames."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class PilotError(PanoExploreError):
    """A pilot emitted something that cannot be parsed as an exploration config."""

    def __init__(self, message, raw_response=None):
        super().__init__(message)
        self.raw_response = raw_response


class ContradictionError(PanoExploreError):
    """An observation has zero likelihood under every hypothesis."""


class AgentProtocolError(PanoExploreError):
    """An agent client violated the response contract."""

    def __init__(self, message, raw_response=None):
        super().__init__(message)
        self.raw_response = raw_response


class UndefinedReportError(PanoExploreError):
    """An aggregate was requested over an empty (fully filtered) record set."""


class StoreError(PanoExploreError):
    """Session/scene persistence failure."""
