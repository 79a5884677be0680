"""Exception hierarchy shared by all modules."""


class DewetError(Exception):
    """Base class for every error raised by this package."""


class GridTooCoarse(DewetError, ValueError):
    pass


class EmptyOverlap(DewetError, ValueError):
    pass


class DegenerateSlope(DewetError, ValueError):
    pass


class DegenerateElement(DewetError, ValueError):
    pass


class SolverDiverged(DewetError, RuntimeError):
    pass


class SingularSystem(DewetError, RuntimeError):
    pass


class InvalidModuli(DewetError, ValueError):
    pass


class WindowTooLarge(DewetError, ValueError):
    pass


class DescentFailure(DewetError, RuntimeError):
    pass


class SchemeAborted(DewetError, RuntimeError):
    """A trajectory left the validity window; ``partial`` holds the steps so far."""

    def __init__(self, message, partial=None, snapshot=None):
        super().__init__(message)
        self.partial = partial
        self.snapshot = snapshot


class SchemaError(DewetError, ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class AdmissibilityError(DewetError, ValueError):
    pass


class IncompatibleHorizons(DewetError, ValueError):
    pass
