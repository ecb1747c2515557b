"""phaserng: software twin of a phase-noise quantum random number generator.

An interferometric phase-noise RNG measures the random phase a laser
accumulates over a fiber delay, using a 90-degree optical hybrid and
balanced detection to recover both quadratures, then distills uniform bits
with a Toeplitz-hashing extractor.  This package models that chain end to
end — phase diffusion, interferometer and detector imperfections, phase
reconstruction and quantization, entropy accounting, extraction, and a
statistical test battery — behind a deterministic, seedable API and a CLI.
"""

from .errors import (DegenerateDataError, DependencyError, FormatError,
                     InsufficientEntropyError, InsufficientInputError,
                     ParameterError, PhaseRngError, SequenceLengthError)

__all__ = [
    "DegenerateDataError", "DependencyError", "FormatError",
    "InsufficientEntropyError", "InsufficientInputError", "ParameterError",
    "PhaseRngError", "SequenceLengthError",
]

__version__ = "0.1.0"
