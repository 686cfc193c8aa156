"""Error taxonomy shared by all pipeline modules.

Module-specific exceptions subclass one of these roots so the CLI can map any
failure onto its exit code without knowing every module.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid run configuration or command usage."""


class PipelineDataError(ValueError):
    """Input data, file format or precondition problem."""


class NumericFailure(ArithmeticError):
    """A computation produced non-finite or otherwise unusable numbers."""
