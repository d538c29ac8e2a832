"""Exception hierarchy. Everything raised on bad input derives from GaitError."""


class GaitError(ValueError):
    pass


# dataset
class MissingColumn(GaitError):
    pass


class NonMonotonicTimestamps(GaitError):
    pass


class RateMismatch(GaitError):
    pass


class EmptyFile(GaitError):
    pass


class InsufficientRecordings(GaitError):
    pass


class DurationTooShort(GaitError):
    pass


# windowing
class RecordingTooShort(GaitError):
    pass


class InvalidStrideForRate(GaitError):
    pass


# features
class EmptySeries(GaitError):
    pass


class SeriesTooLong(GaitError):
    pass


class EmptyTrainingSet(GaitError):
    pass


# model / anomaly
class InvalidDims(GaitError):
    pass


class DimensionMismatch(GaitError):
    pass


class EmptyDataset(GaitError):
    pass


class TooFewPoints(GaitError):
    pass


# metrics
class LengthMismatch(GaitError):
    pass


class EmptyInput(GaitError):
    pass


# deploy
class BundleError(GaitError):
    pass


class BadMagic(BundleError):
    pass


class UnsupportedVersion(BundleError):
    pass


class ChecksumMismatch(BundleError):
    pass


class TruncatedFile(BundleError):
    pass


class NotQuantized(GaitError):
    pass


class OutOfOrderSample(GaitError):
    pass
