"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all pipeline-specific failures."""


class DomainError(PipelineError, ValueError):
    """An argument lies outside the operation's mathematical domain."""


class LengthError(PipelineError, ValueError):
    """A signal is too short for the requested operation."""


class SignalQualityError(PipelineError):
    """The signal does not contain usable pulse structure."""


class InsufficientPulsesError(SignalQualityError):
    """Fewer than two pulses were found where at least two are required."""


class ParseError(PipelineError, ValueError):
    """A recording or manifest file is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(PipelineError, ValueError):
    """File contents violate the format contract (e.g. non-monotonic time)."""


class AlignmentError(PipelineError):
    """Sync markers disagree with the nominal epoch spacing."""


class ScoringError(PipelineError):
    """Answer log cannot be scored (missing answers or truth counts)."""


class CalibrationError(PipelineError):
    """No usable calibration epochs for a feature baseline."""


class NormalizationError(PipelineError):
    """Per-subject normalization is impossible (too few epochs)."""


class UndefinedStatisticError(PipelineError):
    """A statistic is undefined for the given data (e.g. zero within-group variance)."""
