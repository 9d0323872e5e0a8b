"""Exception hierarchy shared by every module."""


class BinaryPPOError(Exception):
    """Base class for package errors."""


class ShapeError(BinaryPPOError, ValueError):
    """Operands have incompatible dimensions."""


class ContractViolation(BinaryPPOError, ValueError):
    """A documented precondition was broken by the caller."""


class ConfigError(BinaryPPOError, ValueError):
    """Invalid configuration value or combination."""


class DataError(BinaryPPOError, ValueError):
    """A dataset file could not be parsed or failed validation."""


class UndefinedMetricError(BinaryPPOError, ValueError):
    """The metric is not defined for the given labels (e.g. one class only)."""


class NonFiniteLossError(BinaryPPOError, FloatingPointError):
    """Training produced a NaN/Inf loss; ``dump`` holds the offending batch."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}
