"""Errors raised by pyconformaltrain."""


class ConformalTrainError(Exception):
    """Base class for every error raised by this package."""


class MissingObservation(ConformalTrainError, KeyError):
    """An observation was removed from a dataset that does not contain it."""

    def __str__(self):
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class EmptyDataset(ConformalTrainError, ValueError):
    """A criterion or split received an empty dataset."""


class EmptyReference(ConformalTrainError, ValueError):
    """A conformity score was requested against an empty reference dataset."""


class CalibrationTooSmall(ConformalTrainError, ValueError):
    """Leave-one-out calibration needs at least two observations."""


class InvalidGrid(ConformalTrainError, ValueError):
    """The parameter grid bounds or size are unusable."""


class NotUnitNorm(ConformalTrainError, ValueError):
    """An object vector is not a finite unit vector of the expected length."""


class ZeroImage(ConformalTrainError, ValueError):
    """An all-zero image cannot be normalized."""


class InsufficientData(ConformalTrainError, ValueError):
    """The image pool cannot supply the requested number of images."""


class ConfigError(ConformalTrainError, ValueError):
    """Experiment configuration is invalid."""


class IdxFormatError(ConformalTrainError, ValueError):
    """
    A malformed IDX file.

    Attributes:
        path (str): The offending file.
        offset (int): Byte offset at which the problem was found.
    """

    def __init__(self, message: str, path, offset: int):
        super().__init__(f"{path} (offset {offset}): {message}")
        self.path = str(path)
        self.offset = offset


class BadMagic(IdxFormatError):
    """The file does not start with the expected magic number."""


class DimensionMismatch(IdxFormatError):
    """Image rows or columns differ from 28."""


class CountMismatch(IdxFormatError):
    """Image and label files disagree on the item count."""


class TruncatedFile(IdxFormatError):
    """The file ends before the declared payload."""
