"""Exception hierarchy for the SQG toolkit."""


class SQGError(Exception):
    """Base class for all errors raised by this package."""


# spectral-core
class ZeroModeSupplied(SQGError, ValueError):
    pass


class OutOfBand(SQGError, ValueError):
    pass


class SymmetryConflict(SQGError, ValueError):
    pass


class SymmetryBreaking(SQGError, ValueError):
    pass


class NegativeTime(SQGError, ValueError):
    pass


class OverflowGuard(SQGError, OverflowError):
    pass


# mild-solver
class GridMismatch(SQGError, ValueError):
    pass


class NoConvergence(SQGError, RuntimeError):
    pass


class NonFiniteState(SQGError, FloatingPointError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite coefficient at step {step}")


# analysis-harness
class RegimeViolation(SQGError, ValueError):
    pass


class NodeMissing(SQGError, ValueError):
    pass


class NonPositiveNorm(SQGError, ValueError):
    pass


class TruncationDominated(SQGError, ValueError):
    pass


# cli-io
class ConfigError(SQGError, ValueError):
    pass


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


class RangeError(ConfigError):
    pass
