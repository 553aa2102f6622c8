"""Exception hierarchy shared by every subpackage."""


class AdaptWaveError(Exception):
    """Base class for all errors raised by adaptwave."""


class WavFormatError(AdaptWaveError):
    pass


class UnsupportedCodecError(AdaptWaveError):
    pass


class UnknownLabelError(AdaptWaveError, KeyError):
    pass


class DomainError(AdaptWaveError, ValueError):
    """A parameter lies outside the domain where a function is defined."""


class ShapeError(AdaptWaveError, ValueError):
    pass


class InvalidCacheError(AdaptWaveError):
    """Backward was called with a cache that does not match the current state."""


class ConfigurationError(AdaptWaveError, ValueError):
    pass


class DegenerateInputError(AdaptWaveError, ValueError):
    pass


class DegenerateBatchError(AdaptWaveError, ValueError):
    pass


class LabelError(AdaptWaveError, ValueError):
    pass


class NumericError(AdaptWaveError, FloatingPointError):
    pass


class DivergenceError(NumericError):
    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class IncompatibleCheckpointError(AdaptWaveError):
    pass


class CorruptCheckpointError(AdaptWaveError):
    pass
