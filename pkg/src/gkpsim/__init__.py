"""Numerical toolkit for finitely squeezed GKP codes and small bosonic codes."""

__version__ = "0.1.0"

from .errors import ConfigError, GkpsimError, GridError, NumericalError  # noqa: E402,F401
