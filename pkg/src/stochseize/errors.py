"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: parse/config problems are input errors (1),
:class:`InsufficientDataError` is its own class (2), anything else is internal (3).
"""


class StochseizeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(StochseizeError, ValueError):
    """A recording, label sidecar or scenario file could not be parsed."""


class ConfigError(StochseizeError, ValueError):
    """A configuration value violates its documented constraints."""


class InsufficientDataError(StochseizeError, ValueError):
    """Not enough (or not the right kind of) training data to fit a model."""
