"""Exception types raised across the package.

Every error derives from :class:`SfcastError` and from the closest builtin,
so callers can catch either ``SfcastError`` or e.g. ``ValueError``.
"""


class SfcastError(Exception):
    """Base class for all package errors."""


# numeric core / layers

class ShapeError(SfcastError, ValueError):
    pass


class WindowTooLongError(ShapeError):
    pass


class EmptyTensorError(SfcastError, ValueError):
    pass


class NonFiniteError(SfcastError, FloatingPointError):
    pass


class MissingCacheError(SfcastError, RuntimeError):
    pass


class InvalidDimensionError(SfcastError, ValueError):
    pass


# model files

class ModelFileError(SfcastError, ValueError):
    pass


class VersionMismatchError(ModelFileError):
    pass


class MalformedFileError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


# data pipeline

class DataError(SfcastError, ValueError):
    pass


class EmptyFileError(DataError):
    pass


class MissingColumnError(DataError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("missing required column(s): " + ", ".join(self.columns))


class UnparsableRowsError(DataError):
    """Too many rows failed to parse; ``bad_rows`` holds (line, reason) pairs."""

    def __init__(self, bad_rows, total):
        self.bad_rows = list(bad_rows)
        self.total = total
        preview = "; ".join(f"line {ln}: {why}" for ln, why in self.bad_rows[:10])
        super().__init__(
            f"{len(self.bad_rows)} of {total} rows unparsable (limit 10%): {preview}"
        )


class EmptySeriesError(DataError):
    pass


class UnknownCityError(DataError):
    pass


class ZeroVarianceError(DataError):
    pass


class SeriesTooShortError(DataError):
    pass


class FractionRangeError(DataError):
    pass


# training / fitting

class ConfigError(SfcastError, ValueError):
    pass


class LayoutMismatchError(SfcastError, ValueError):
    pass


class NonFiniteLossError(SfcastError, FloatingPointError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} in epoch {epoch}")


class UnderdeterminedError(SfcastError, ValueError):
    pass
