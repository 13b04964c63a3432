"""Exception hierarchy shared by every taurus module."""

from __future__ import annotations


class TaurusError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ValidationError(TaurusError):
    """Input violates a documented precondition or invariant."""

    code = "validation"


class DataError(TaurusError):
    """Dataset content is unusable (non-finite features, bad rows, ...)."""

    code = "data"


class MediaError(TaurusError):
    """Uploaded or on-disk media could not be decoded."""

    code = "media"


class ConfigError(TaurusError):
    """Mismatched component wiring, e.g. model vs backbone id."""

    code = "config"


class ArtifactError(TaurusError):
    """A persisted model artifact is missing, corrupt, or inconsistent."""

    code = "artifact"


class DosageError(TaurusError):
    """Base class for dose-recommendation failures."""

    code = "dosage"


class NoRuleError(DosageError):
    """No registry rule covers the requested disease."""

    code = "no_rule"


class ContraindicationError(DosageError):
    """Every matching rule is blocked by the animal's age band."""

    code = "contraindicated"


class ManualWeighingRequired(DosageError):
    """Weight group Unknown: the animal must be weighed by hand."""

    code = "needs_manual_weighing"
