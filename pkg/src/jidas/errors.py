"""Exception hierarchy shared by all modules."""


class JidasError(Exception):
    """Base class for domain errors (mapped to CLI exit code 1)."""

    #: Short machine-readable name used in CLI error lines.
    code = "JidasError"

    def __init__(self, message="", index=None):
        super().__init__(message)
        self.index = index


class SpecError(JidasError, ValueError):
    code = "SpecError"


class NonStochasticRow(SpecError):
    code = "NonStochasticRow"


class NegativeEntry(SpecError):
    code = "NegativeEntry"


class DimensionMismatch(SpecError):
    code = "DimensionMismatch"


class IndexOutOfAlphabet(JidasError, IndexError):
    code = "IndexOutOfAlphabet"


class UndefinedConditional(JidasError, LookupError):
    """Raised when reading a posterior cell whose conditioning event has probability zero."""

    code = "UndefinedConditional"


class InfeasibleDistortion(JidasError):
    code = "InfeasibleDistortion"


class CodePackingFailure(JidasError):
    code = "CodePackingFailure"


class LengthMismatch(JidasError, ValueError):
    code = "LengthMismatch"
