"""Exception hierarchy.

Every error raised by the library derives from :class:`DynlapError`. The three
intermediate classes map onto CLI exit codes (validation 1, numerical 2, I/O 3).
"""


class DynlapError(Exception):
    exit_code = 2


class ValidationError(DynlapError, ValueError):
    exit_code = 1


class NumericalError(DynlapError, ArithmeticError):
    exit_code = 2


class IoFailure(DynlapError, OSError):
    exit_code = 3


# mesh
class TooFewPoints(ValidationError):
    pass


class CollinearInput(ValidationError):
    pass


class DegenerateTriangle(NumericalError):
    pass


# flow
class NonFiniteState(NumericalError):
    pass


class RefinementExplosion(NumericalError):
    pass


# dynamic laplacian
class SliceTooSparse(ValidationError):
    pass


class CollinearSlice(ValidationError):
    pass


class InitialSliceIncomplete(ValidationError):
    pass


# eigen
class FactorizationFailure(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


# seba
class NotOrthonormal(ValidationError):
    pass


class RankCollapseWarning(UserWarning):
    """A SEBA column thresholded to zero and was dropped."""


# cheeger
class AllZeroField(ValidationError):
    pass


class TooFewNodalDomains(ValidationError):
    pass


class ZeroArea(ValidationError):
    pass


class PositiveEigenvalue(ValidationError):
    pass


# io
class MalformedRow(IoFailure):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class NoCommonTimeGrid(ValidationError):
    pass


class EmptySet(ValidationError):
    pass


class PipelineError(DynlapError):
    """A module error tagged with the pipeline stage it came from."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
