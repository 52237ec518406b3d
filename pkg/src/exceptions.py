"""Custom exceptions for the WaDeNet speech classification package."""


class WaDeNetError(Exception):
    """Base exception class for WaDeNet errors."""
    def __init__(self, message: str, details: dict = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class DimensionError(WaDeNetError):
    """Raised when tensor shapes do not agree."""
    pass


class LengthError(WaDeNetError):
    """Raised when a signal length violates an even or dyadic requirement."""
    pass


class ParameterError(WaDeNetError):
    """Raised when a numeric parameter is out of its legal range."""
    pass


class DegenerateBatchError(WaDeNetError):
    """Raised when batch statistics cannot be computed."""
    pass


class ContractError(WaDeNetError):
    """Raised when a caller breaks an API contract (non-scalar loss, missing grad)."""
    pass


class TargetIndexError(WaDeNetError, IndexError):
    """Raised when a class target falls outside [0, K)."""
    pass


class ConfigurationError(WaDeNetError):
    """Raised when there are issues with configuration."""
    pass


class DataValidationError(WaDeNetError):
    """Raised when data validation fails."""
    pass


class DecodeError(DataValidationError):
    """Raised when an audio file cannot be decoded."""
    pass


class StratificationError(DataValidationError):
    """Raised when a class has too few clips to stratify."""
    pass


class CheckpointError(WaDeNetError):
    """Raised when a checkpoint is corrupt or inconsistent with its config."""
    pass
