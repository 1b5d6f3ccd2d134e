"""Exception hierarchy shared by every module."""


class FbmRuinError(Exception):
    """Base class for all package errors."""


class DomainError(FbmRuinError, ValueError):
    """A parameter lies outside its admissible range."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"invalid value for {field!r}")


class DegenerateInput(FbmRuinError):
    """Operation needs two crossing boundary lines but got a one-line problem."""


class MissingConstant(FbmRuinError):
    """An asymptote needs a constant estimate that was not supplied."""


class Unsupported(FbmRuinError):
    """Requested comparison does not exist for this regime."""


class DriftViolation(FbmRuinError, ValueError):
    """Piecewise-linear drift makes the sup functional non-integrable."""


class EmbeddingFailure(FbmRuinError):
    """Circulant embedding has negative eigenvalues even after enlargement."""


class NotConverged(FbmRuinError):
    """A truncation/doubling diagnostic failed within its budget."""


class HorizonUnstable(FbmRuinError):
    """Simulation horizon doubling hit its cap without stabilising."""


class WeightOverflow(FbmRuinError):
    """Likelihood-ratio weights leave the floating point range."""


class Unreachable(FbmRuinError):
    """Requested resolution is beyond the simulation budget."""


#: errors reported with CLI exit code 2
DOMAIN_ERRORS = (DomainError, DegenerateInput, MissingConstant, Unsupported, DriftViolation)
#: errors reported with CLI exit code 3
BUDGET_ERRORS = (NotConverged, HorizonUnstable, WeightOverflow, Unreachable, EmbeddingFailure)
