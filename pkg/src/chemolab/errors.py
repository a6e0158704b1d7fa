"""Exception types shared across the package."""


class ChemolabError(Exception):
    """Base class for all package-specific errors."""


class DivergedFieldError(ChemolabError):
    """A field contains non-finite entries and is not flagged as diverged."""


class PositivityError(ChemolabError):
    """A field that must be nonnegative has negative entries."""


class UnboundedSourceError(ChemolabError):
    """sup{f(s) + eta*s : s > 0} is infinite for every admissible eta."""


class SolverFailureError(ChemolabError):
    """Iterative linear solve did not meet its residual contract."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EstimationFailureError(ChemolabError):
    """Numeric tail estimation hit non-finite values."""


class ConfigError(ChemolabError):
    """Invalid experiment configuration; carries the offending field."""

    def __init__(self, message, section=None, key=None):
        loc = ""
        if section is not None:
            loc = f"[{section}]" + (f" {key}" if key else "")
            message = f"{loc}: {message}"
        super().__init__(message)
        self.section = section
        self.key = key
