"""Exception hierarchy shared across the panel-gating pipeline.

Every failure a caller may want to branch on gets its own class; the CLI
maps these onto distinct exit codes.
"""

from __future__ import annotations


class PanelGateError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(PanelGateError):
    """Gate configuration is malformed or violates its invariants."""


class LockMismatchError(PanelGateError):
    """Data or analysis request does not match the locked configuration."""


class RecordParseError(PanelGateError):
    """A line in a record stream could not be parsed."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DuplicateRecordError(PanelGateError):
    """A record key that must be unique appeared twice."""


class ScoreValidationError(PanelGateError):
    """A dimension score is outside [1, k] or not an integer."""


class DimensionSchemaError(PanelGateError):
    """Dimension names do not match the locked rubric."""


class DomainError(PanelGateError):
    """A numeric argument is outside the operation's domain."""


class RsUndefinedError(PanelGateError):
    """Repetition stability requested for a judge without repeated trials."""


class DegenerateVarianceError(PanelGateError):
    """Total variance is zero, so a variance ratio is undefined."""


class DegenerateAgreementError(PanelGateError):
    """Chance agreement is 1 (single shared category); kappa is undefined."""


class PanelArityError(PanelGateError):
    """Operation requires a larger judge panel than was supplied."""


class ClusterCountError(PanelGateError):
    """Cluster bootstrap needs at least two distinct clusters."""


class BootstrapFailureError(PanelGateError):
    """Too many resamples failed to produce a defined statistic."""


class UndefinedCorrelationError(PanelGateError):
    """Correlation undefined because one variable is constant."""


class InFamilyProbeError(PanelGateError):
    """Probe judge shares a family with a panel judge."""


class PairingError(PanelGateError):
    """Two paired score sets do not cover the same trajectories."""


class InfeasibleTargetError(PanelGateError):
    """Fixture calibration could not reach the requested targets."""
