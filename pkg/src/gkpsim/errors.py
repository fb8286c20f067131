"""Exception types shared across gkpsim."""


class GkpsimError(Exception):
    """Base class for all gkpsim errors."""


class GridError(GkpsimError):
    """The position grid cannot represent the requested state faithfully."""


class NumericalError(GkpsimError):
    """A numerical diagnostic failed (underflow, truncation, nonconvergence)."""


class ConfigError(GkpsimError):
    """Invalid campaign configuration."""
