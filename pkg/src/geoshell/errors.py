"""Exception hierarchy shared by all geoshell modules."""


class GeoShellError(Exception):
    """Base class for every error raised by geoshell."""


class ObjParseError(GeoShellError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFaceError(ObjParseError):
    pass


class ObjIndexError(ObjParseError):
    pass


class CorrespondenceError(GeoShellError):
    """Two shells do not share the same mesh connectivity."""


class UnsupportedMeshError(GeoShellError):
    """Mesh violates a structural requirement (boundary, valence range, ...)."""


class DomainError(GeoShellError):
    """Evaluation requested outside the admissible parameter domain."""


class InadmissibleStateError(GeoShellError):
    """Deformed or reference state has degenerate/inverted metric."""


class SolverError(GeoShellError):
    """Linearized system could not be solved."""


class NonConvergenceError(GeoShellError):
    """Iterative solve did not reach its tolerance.

    ``report`` carries the :class:`~geoshell.solver.SolveReport` and ``partial``
    the best iterate available, if any.
    """

    def __init__(self, message, report=None, partial=None, stage=None):
        super().__init__(message)
        self.report = report
        self.partial = partial
        self.stage = stage
