"""Exception hierarchy shared by the pipeline modules."""


class DcaeError(Exception):
    """Base class for all errors raised by this package."""


class DataError(DcaeError):
    """Input data could not be used (malformed files, missing channels, ...)."""


class NumericError(DcaeError):
    """A numeric failure such as a non-finite loss or gradient."""


class ConfigError(DcaeError):
    """Invalid configuration or usage."""


# signal_io
class MalformedHeader(DataError):
    pass


class UnsupportedFeature(DataError):
    pass


class DegenerateCalibration(DataError):
    pass


class RangeOverflow(DataError):
    pass


class ChecksumOrLengthMismatch(DataError):
    pass


# preprocess
class TooShort(DataError):
    pass


class CornerAboveNyquist(ConfigError):
    pass


class MissingChannels(DataError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing montage channels: " + ", ".join(self.missing))


# windowing
class EmptyChannel(DataError):
    pass


class DegenerateScale(DataError):
    def __init__(self, channels):
        self.channels = list(channels)
        super().__init__("degenerate scale (p95 - p5 < 1e-9) on channels: %s" % self.channels)


# spectral / nn
class MaskOutOfRange(DataError):
    pass


class ShapeMismatch(ValueError, DcaeError):
    pass


class DegenerateBatch(DataError):
    pass


class OddLength(ValueError, DcaeError):
    pass


class NonFiniteGradient(NumericError):
    pass


class NonFiniteLoss(NumericError):
    def __init__(self, epoch, batch):
        self.epoch, self.batch = epoch, batch
        super().__init__("non-finite loss at epoch %d, batch %d" % (epoch, batch))


class ToleranceExceeded(NumericError):
    def __init__(self, offenders):
        self.offenders = dict(offenders)
        super().__init__("gradient check failed for: %s" % ", ".join(
            "%s (rel err %.3g)" % kv for kv in self.offenders.items()))


class EmptyDataset(DataError):
    pass


class ConfigInvalid(ConfigError):
    pass
