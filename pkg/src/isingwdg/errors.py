"""Exception types shared across modules (CLI maps them to exit codes)."""


class ConfigError(Exception):
    """Invalid run configuration (CLI exit code 1)."""


class ResourceCapError(Exception):
    """A computation exceeded its enumeration/budget cap (CLI exit code 2)."""


class EnumerationCapError(ResourceCapError):
    """Box too large for exhaustive state enumeration."""


class BoundaryReadError(ValueError):
    """A spin outside the box was read under free boundary conditions."""


class OutOfRegimeError(ValueError):
    """Fitted correlations do not decay; parameters outside the decaying regimes."""
