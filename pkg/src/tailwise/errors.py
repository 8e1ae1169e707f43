"""Exception types shared across the package.

The CLI maps these onto exit codes: InvalidConfig -> 2, DataError -> 3,
NumericalError (and anything unexpected) -> 4.
"""


class TailwiseError(Exception):
    pass


class DataError(TailwiseError):
    """Malformed or unusable input data."""


class NumericalError(TailwiseError):
    """Numerical failure during analysis or training."""


class InvalidConfig(TailwiseError):
    """A configuration object violates its invariants."""


# -- spectral --------------------------------------------------------------

class NonFiniteInput(NumericalError):
    pass


class NotAMatrix(DataError):
    """Spectral analysis requested for a 1-D (non-matrix) parameter."""


# -- tail fitting ----------------------------------------------------------

class BadK(TailwiseError):
    pass


class ZeroCutoff(NumericalError):
    pass


class TooFewEigenvalues(DataError):
    pass


class MissingGradient(TailwiseError):
    pass


# -- allocation ------------------------------------------------------------

class EmptyInput(TailwiseError):
    pass


class InfiniteAlpha(NumericalError):
    pass


class NonPositiveLog(NumericalError):
    pass


class MissingUpdateNorm(TailwiseError):
    pass


# -- scheduling ------------------------------------------------------------

class StepOutOfRange(TailwiseError):
    pass


class UnknownLayer(TailwiseError):
    pass


class NonMonotonicStep(TailwiseError):
    pass


# -- training --------------------------------------------------------------

class TokenOutOfRange(DataError):
    pass


class ShapeMismatch(TailwiseError):
    pass


class DivergedLoss(NumericalError):
    """Training loss became non-finite; carries the partial telemetry."""

    def __init__(self, step: int, partial=None):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step
        self.partial = partial


# -- manifests -------------------------------------------------------------

class ParseError(DataError):
    pass


class ByteRangeError(DataError):
    pass
