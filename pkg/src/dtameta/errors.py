"""Error taxonomy shared by all modules.

Every raised condition carries a stable ``code`` string so that CLI exit
codes and HTTP error payloads can be mapped mechanically.
"""


class AnalysisError(Exception):
    """Base class; ``code`` identifies the condition machine-readably."""

    code = "E_UNKNOWN"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__doc__ or self.code)


class SchemaError(AnalysisError):
    """A required input column is missing."""

    code = "E_SCHEMA"


class ValueFormatError(AnalysisError):
    """A count cell is negative or not an integer."""

    code = "E_VALUE"


class EmptyInputError(AnalysisError):
    """No data rows (or an empty series) where at least one is required."""

    code = "E_EMPTY"


class EmptyArmError(AnalysisError):
    """A study has no diseased subjects or no healthy subjects."""

    code = "E_ARM"


class ZeroCellError(AnalysisError):
    """A zero cell survived continuity correction."""

    code = "E_ZERO"


class SingularMatrixError(AnalysisError):
    """A covariance matrix that must be positive definite is not."""

    code = "E_SINGULAR"


class FitFailedError(AnalysisError):
    """No optimizer start converged."""

    code = "E_NOFIT"


class DegenerateError(AnalysisError):
    """A denominator or scale collapsed to zero."""

    code = "E_DEGENERATE"


class ConstraintError(AnalysisError):
    """The marginal selection constraint has no solution."""

    code = "E_CONSTRAINT"


class ModeSearchError(AnalysisError):
    """Per-study integrand mode search failed."""

    code = "E_MODE"


class TooFewStudiesError(AnalysisError):
    """Not enough studies for the requested statistic."""

    code = "E_SMALL"
