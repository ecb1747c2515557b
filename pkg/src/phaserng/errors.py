"""Exception hierarchy shared by all phaserng modules.

Every error raised on purpose derives from :class:`PhaseRngError`, so callers
(and the CLI exit-code mapping) can distinguish our failures from genuine
bugs.  The subclasses mirror the failure categories of the public API:
bad parameters, degenerate data, malformed files, missing pipeline inputs,
and entropy bookkeeping.
"""


class PhaseRngError(Exception):
    """Base class for all errors raised by phaserng."""


class ParameterError(PhaseRngError, ValueError):
    """An argument is out of range, non-finite, or otherwise invalid."""


class DegenerateDataError(ParameterError):
    """Input data has no usable structure (constant channel, zero variance)."""


class FormatError(PhaseRngError, ValueError):
    """A file does not conform to its declared format.

    The message names the offending byte offset or line number whenever the
    parser knows it.
    """


class DependencyError(PhaseRngError, RuntimeError):
    """A pipeline stage was requested before its inputs exist."""


class InsufficientEntropyError(PhaseRngError, ValueError):
    """Extractor sizing produced a non-positive output length."""


class InsufficientInputError(PhaseRngError, ValueError):
    """The extractor input is shorter than a single block."""


class SequenceLengthError(PhaseRngError, ValueError):
    """A statistical test received fewer bits than its published minimum."""
