"""Exception types shared across the toolkit."""


class CapacityError(ValueError):
    """A requested construction exceeds the configured dimension cap."""


class DegenerateInputError(ValueError):
    """An input is degenerate for the requested operation (e.g. zero norm)."""


class ZeroProbabilityBranchError(ValueError):
    """A forced measurement outcome has (numerically) zero probability."""


class TruncationError(ValueError):
    """A truncated-space computation leaks too much population."""


class UndefinedParameterError(ValueError):
    """A derived quantity is undefined for the given state (e.g. zero mean spin)."""


class NumericalValidationError(ValueError):
    """A numerical self-consistency check failed."""


class ConfigError(ValueError):
    """A run configuration is malformed or violates a constraint."""
