"""Exception types shared across the engine."""


class QaceError(Exception):
    """Base class for all engine errors."""


class EmptyCaption(QaceError):
    """Caption is empty or whitespace-only."""


class NoAnswerCandidates(QaceError):
    """No noun-phrase answer candidates were extracted."""


class NoReferences(QaceError):
    """Multi-reference scoring called with an empty reference list."""


class BackendUnavailable(QaceError):
    """The model backend cannot be reached."""


class ProtocolViolation(QaceError):
    """The backend sent a response that does not satisfy the wire schema."""


class ScriptedMiss(QaceError):
    """A mock backend received a request its script does not cover."""


class UnknownImage(QaceError):
    """The visual backend cannot resolve the given image id."""


class CacheError(QaceError):
    """The response cache store misbehaved (collision or unusable directory)."""


class ComponentUnavailable(QaceError):
    """A similarity component was requested but its backing is missing."""


class NegativeSamplingImpossible(QaceError):
    """Unanswerable sampling requested on a corpus with a single image."""


class SchemaViolation(QaceError):
    """An input file does not parse under its declared schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RecordError(QaceError):
    """A parsed record carries an unusable value (e.g. non-numeric score)."""


class DegenerateVariance(QaceError):
    """Rank correlation is undefined because one side is entirely tied."""


class InsufficientSamples(QaceError):
    """Too few samples for the requested statistic."""


class AlignmentError(QaceError):
    """Score and benchmark files do not share the same instance ids."""

    def __init__(self, message: str, missing: list[str] | None = None):
        self.missing = missing or []
        if self.missing:
            shown = ", ".join(self.missing[:10])
            more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class ConfigError(QaceError):
    """Bad run configuration (unknown key, unreadable path, invalid value)."""
