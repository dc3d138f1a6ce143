from typing import Optional, Union


class PifError(Exception):
    """Base class for every error raised by the package."""


class DatasetError(PifError, ValueError):
    """Invalid dataset contents or an unreadable data file."""

    def __init__(
        self,
        message: str,
        row: Optional[int] = None,
        column: Optional[Union[int, str]] = None,
    ):
        super().__init__(message)
        self.row = row
        self.column = column


class DimensionError(PifError, ValueError):
    """Feature vector does not match the dimension a model was trained on."""


class ResampleError(PifError, ValueError):
    """Invalid split, fold or bootstrap request."""


class FitError(PifError, RuntimeError):
    """A learner fit failed; `index` tags the member, fold or candidate."""

    def __init__(
        self,
        message: str,
        index: Optional[int] = None,
        epoch: Optional[int] = None,
    ):
        super().__init__(message)
        self.index = index
        self.epoch = epoch


class MethodError(PifError, ValueError):
    """A prediction-interval method was called outside its preconditions."""


class ConfigError(PifError, ValueError):
    """Invalid experiment, sweep or learner configuration."""
