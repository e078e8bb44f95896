# app/errors.py
"""Exception hierarchy shared by the engine, the services and the CLI."""


class MorphTestError(Exception):
    """Base class for every failure raised by the datamorphic test engine."""


class ConfigError(MorphTestError, ValueError):
    """A run configuration, framework definition or strategy setting is invalid."""


class FrameworkError(MorphTestError, ValueError):
    """A test framework violates its own invariants (duplicate seeds, dangling references)."""


class SchemaViolation(MorphTestError, ValueError):
    """Datamorphism arguments or parameters do not match the declared schema."""


class Inapplicable(MorphTestError):
    """The applicability condition of a datamorphism returned false.

    The case must be skipped, not failed.
    """


class DatumFormatError(MorphTestError, ValueError):
    """Bytes or JSON could not be decoded into a datum."""


class LimitExceeded(MorphTestError):
    """A generation strategy needs more cases than the configured limits allow."""


class UnknownFitness(MorphTestError, KeyError):
    """The genetic strategy was asked for a fitness function that is not registered."""


class SameClass(MorphTestError):
    """Boundary exploration was started on two inputs the subject classifies alike."""


class NoConvergence(MorphTestError):
    """Boundary exploration ran out of iterations before the distance threshold was met."""


class RelationError(MorphTestError):
    """A metamorphism's relation raised instead of answering, e.g. on outputs of the wrong kind."""


class SubjectError(MorphTestError):
    """The subject under test failed on one input."""


class SubjectUnavailable(MorphTestError, RuntimeError):
    """An external subject could not be started at all."""


class ProtocolViolation(MorphTestError):
    """An external subject wrote a line that does not follow the wire protocol."""

    def __init__(self, message: str, line_number: int | None = None, line: str | None = None):
        self.line_number = line_number
        self.line = line
        if line_number is not None:
            message = f"{message} (subject output line {line_number}: {line!r})"
        super().__init__(message)


class ShapeError(MorphTestError, ValueError):
    """A pool does not have the seed x single-step-mutant shape a metric table needs."""


class ZeroVariance(MorphTestError, ValueError):
    """Correlation is undefined because one of the vectors is constant."""


class LengthMismatch(MorphTestError, ValueError):
    """Two vectors that must be paired have different or insufficient lengths."""


class StorageError(MorphTestError):
    """A pool, record or verdict file could not be read or does not parse."""


class ReportError(MorphTestError):
    """A report could not be produced or written."""
