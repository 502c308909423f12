"""Exception types shared across the package."""


class ChunkEncError(Exception):
    """Base class for all package errors."""


class ShapeError(ChunkEncError, ValueError):
    """Operands have incompatible shapes or dtypes."""


class ConfigError(ChunkEncError, ValueError):
    """Invalid configuration value or malformed container file."""


class ContractViolation(ChunkEncError, ValueError):
    """An operation precondition was violated by the caller."""


class StateError(ChunkEncError, RuntimeError):
    """Stateful object used after close/finalize or out of order."""


class SizeError(ChunkEncError, ValueError):
    """Problem instance exceeds the supported size bound."""
