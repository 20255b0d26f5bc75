"""Exception types shared across the package."""


class PromptSegError(Exception):
    """Base class for all errors raised by this package."""


class PmfmError(PromptSegError):
    """Base class for feature-map file format errors."""


class BadMagic(PmfmError):
    pass


class UnsupportedVersion(PmfmError):
    pass


class InvalidHeader(PmfmError):
    pass


class TruncatedPayload(PmfmError):
    pass


class TrailingData(PmfmError):
    pass


class NonFiniteValue(PmfmError):
    pass


class DimMismatch(PromptSegError):
    pass


class EmptyMask(PromptSegError):
    pass


class EmptyFirstMask(PromptSegError):
    pass


class InvalidStride(PromptSegError):
    pass


class KTooLarge(PromptSegError):
    pass


class OutOfBounds(PromptSegError):
    pass


class BadCounts(PromptSegError):
    pass


class Downscale(PromptSegError):
    pass


class PlacementFailure(PromptSegError):
    pass


class NotEnoughInputs(PromptSegError):
    pass


class ConfigError(PromptSegError):
    pass
