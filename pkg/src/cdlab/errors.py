"""Exception types shared across the package."""


class CdlabError(Exception):
    """Base class for all package-specific failures."""


class DomainError(CdlabError, ValueError):
    """A point lies outside the chart domain of its space."""


class ResolutionError(CdlabError, ValueError):
    """A sampling resolution below the supported minimum."""


class CapacityError(CdlabError):
    """Problem size exceeds the configured cap for the exact solver."""


class ConvergenceError(CdlabError):
    """Iterative solver failed to reach its target residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class CertificationError(CdlabError):
    """Dual certificate failed its feasibility or gap test."""


class SingularityError(CdlabError):
    """A measure touches a zero-volume cell, so no density exists there."""


class ShiftUndefinedError(CdlabError):
    """Inf-convolution of a field with no finite value."""


class IllPosedShiftError(CdlabError):
    """Inf-convolution of a field containing -inf is unbounded below."""


class PreconditionError(CdlabError):
    """A validated precondition (e.g. concavity of an input field) failed."""


class ConfigError(CdlabError, ValueError):
    """Invalid experiment configuration; message names the offending field."""
