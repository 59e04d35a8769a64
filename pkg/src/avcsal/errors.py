"""Exception types shared across the toolkit.

Every error raised by avcsal derives from AvcsalError, so callers can
catch the whole family with one except clause.
"""


class AvcsalError(Exception):
    pass


# -- grid / distribution preconditions ---------------------------------------

class ShapeMismatchError(AvcsalError):
    pass


class ZeroMassError(AvcsalError):
    pass


class ZeroVarianceError(AvcsalError):
    pass


class EmptyFixationsError(AvcsalError):
    pass


class AllFixatedError(AvcsalError):
    pass


class NoNegativePoolError(AvcsalError):
    pass


class LengthMismatchError(AvcsalError):
    pass


# -- audio frontend -----------------------------------------------------------

class BadWindowError(AvcsalError):
    pass


class TooShortError(AvcsalError):
    pass


class BadRangeError(AvcsalError):
    pass


class EmptyAudioError(AvcsalError):
    pass


# -- fusion / gating ----------------------------------------------------------

class ChannelMismatchError(AvcsalError):
    pass


class PipelineError(AvcsalError):
    """Decoder failure inside the gated pipeline; carries the frame index."""

    def __init__(self, frame_index: int, message: str = ""):
        self.frame_index = frame_index
        super().__init__(message or f"decoder failed at frame {frame_index}")


# -- toy models ---------------------------------------------------------------

class TooSmallError(AvcsalError):
    pass


class SingleClassError(AvcsalError):
    pass


class DivergedError(AvcsalError):
    pass


# -- dataset I/O --------------------------------------------------------------

class ManifestParseError(AvcsalError):
    pass


class MissingFieldError(ManifestParseError):
    pass


class DuplicateFrameError(AvcsalError):
    pass


class GapInTrackError(AvcsalError):
    pass


class InvalidLabelError(AvcsalError):
    pass


class BadScenarioError(AvcsalError):
    pass


class DecodeError(AvcsalError):
    pass


class PairingError(AvcsalError):
    pass
