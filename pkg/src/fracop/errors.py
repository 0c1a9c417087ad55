"""Exception types shared across the package."""


class FracopError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(FracopError, ValueError):
    pass


class NonFiniteValue(FracopError, FloatingPointError):
    pass


class DegenerateEigenspace(FracopError):
    pass


class SingularOrder(FracopError, ValueError):
    pass


class CycleDetected(FracopError):
    pass


class NonRealLoss(FracopError, ValueError):
    pass


class ConfigError(FracopError, ValueError):
    pass


class UnknownVariant(FracopError, ValueError):
    pass


class BlowUp(FracopError, FloatingPointError):
    pass


class SolverDivergence(FracopError):
    pass


class FormatError(FracopError, ValueError):
    pass


class TruncatedFile(FormatError):
    pass


class ZeroTarget(FracopError, ValueError):
    pass


class NonFiniteLoss(FracopError, FloatingPointError):
    def __init__(self, message, last_good_epoch=None):
        super().__init__(message)
        self.last_good_epoch = last_good_epoch
