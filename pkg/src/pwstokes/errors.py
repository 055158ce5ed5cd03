"""Exception hierarchy shared by all modules."""


class StokesError(Exception):
    """Base class for every error raised by this package."""


class MeshError(StokesError):
    pass


class NonConforming(MeshError):
    pass


class DegenerateTriangle(MeshError):
    pass


class IndexOutOfRange(MeshError):
    pass


class MeshFormatError(MeshError):
    pass


class OutOfRange(StokesError, ValueError):
    pass


class AllSingular(StokesError):
    pass


class LengthMismatch(StokesError, ValueError):
    pass


class TriangleNotInPatch(StokesError, KeyError):
    pass


class UnsupportedDegree(StokesError, ValueError):
    pass


class QuadratureUnsupported(UnsupportedDegree):
    pass


class SingularSystem(StokesError):
    pass


class EmptyPressureSpace(StokesError):
    pass


class EigSolverFailure(StokesError):
    pass


class DegenerateAngle(StokesError, ValueError):
    pass


class IncompatibleFields(StokesError):
    pass


class InfeasibleSystem(StokesError):
    pass


class ConditionViolated(StokesError):
    pass


class NotCritical(StokesError):
    pass


class ParseError(StokesError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownKey(ParseError):
    pass
