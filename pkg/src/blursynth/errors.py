"""Exception hierarchy shared across the package."""


class BlurSynthError(Exception):
    """Base class for all package errors."""


class ImageDecodeError(BlurSynthError):
    pass


class ImageWriteError(BlurSynthError):
    pass


class MaskFormatError(BlurSynthError):
    pass


class ProposalLoadError(BlurSynthError):
    pass


class ConfigError(BlurSynthError):
    """Invalid generator configuration. ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DegenerateKernelError(BlurSynthError):
    pass


class DegenerateMaskError(BlurSynthError):
    pass


class UninpaintableError(BlurSynthError):
    pass


class SkipSampleError(BlurSynthError):
    pass


class UndefinedMetricError(BlurSynthError):
    pass
