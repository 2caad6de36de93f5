"""Exception and warning types raised across timberdiff."""


class TimberDiffError(Exception):
    """Base class for all timberdiff errors."""


class IoError(TimberDiffError, OSError):
    """A file could not be opened, read or written."""


class ParseError(TimberDiffError, ValueError):
    """A file was readable but its content is malformed.

    ``location`` carries a line number (text formats) or byte offset
    (binary formats) when known.
    """

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


class InvalidParameter(TimberDiffError, ValueError):
    pass


class SemanticError(TimberDiffError, ValueError):
    """CAD file parsed, but its semantic structure is inconsistent."""


class NotApplicable(TimberDiffError):
    pass


class MissingNormals(TimberDiffError, ValueError):
    pass


class EmptyInput(TimberDiffError, ValueError):
    pass


class EmptyTarget(EmptyInput):
    pass


class LengthMismatch(TimberDiffError, ValueError):
    pass


class DegenerateConfiguration(TimberDiffError, ValueError):
    """Correspondences do not determine a unique rigid transform."""


class InsufficientPoints(TimberDiffError, ValueError):
    pass


class NoConsensus(TimberDiffError):
    pass


class NoCorrespondences(TimberDiffError):
    pass


class RegistrationFailed(TimberDiffError):
    """Coarse or fine registration did not produce an acceptable T1.

    ``diagnostics`` holds whatever the failing stage could report
    (fitness, rmse, candidate transform).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class JointNotDetected(TimberDiffError):
    pass


class StageError(TimberDiffError):
    """Wraps an error raised inside a pipeline stage, tagged with the stage."""

    def __init__(self, stage, error):
        super().__init__(f"[{stage}] {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error


class DegenerateNeighborhood(UserWarning):
    """Some points got no normal because their neighborhood is rank deficient."""
