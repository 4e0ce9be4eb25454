"""Exception hierarchy for the lorarffi package."""


class LoraRffiError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LoraRffiError):
    """A parameter combination or config file is invalid."""


class ShapeError(LoraRffiError):
    """An array does not have the expected shape or length."""


class PhaseUndefinedError(LoraRffiError):
    """A zero-magnitude sample makes the instantaneous phase undefined."""


class NoPacketError(LoraRffiError):
    """Synchronization found no correlation peak above the confidence floor."""


class DegenerateInputError(LoraRffiError):
    """An input with no usable content (e.g. all-zero signal)."""


class DatasetError(LoraRffiError):
    """A dataset is malformed, too small, or inconsistent with the request."""


class DivergenceError(LoraRffiError):
    """Training produced a non-finite loss."""


class DatabaseIntegrityError(LoraRffiError):
    """The CFO database does not cover every class the model predicts."""
