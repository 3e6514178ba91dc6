"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: input/validation problems exit 1,
failed verification checks exit 2, anything unexpected exits 3.
"""


class SefusionError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SefusionError):
    """Invalid configuration value, e.g. an unsupported sample rate or a
    window duration that is not an integer number of samples."""


class ShapeMismatchError(SefusionError):
    """Operands whose shapes, rates, or STFT configs do not line up."""


class DataValidationError(SefusionError):
    """Input data violates an invariant (non-finite values, empty signal)."""


class SampleRateError(SefusionError):
    """Waveform arrived at a rate the operation does not accept."""


class FrameAlignmentError(SefusionError):
    """Conditioner frames and spectrogram frames disagree in count."""


class DegenerateSignalError(SefusionError):
    """Silent or otherwise degenerate reference where energy is required."""


class TensorFormatError(SefusionError):
    """Malformed tensor container file."""
