"""Exception hierarchy shared by every module of the package."""


class GradProjError(Exception):
    """Base class for all errors raised by gradproj."""

    code = "error"


# geometry
class ZeroVector(GradProjError, ValueError):
    code = "ZeroVector"


class OffSurface(GradProjError, ValueError):
    code = "OffSurface"


class DegenerateNormal(GradProjError, ValueError):
    code = "DegenerateNormal"


class NoSignChange(GradProjError, ValueError):
    code = "NoSignChange"


class ZeroDirection(GradProjError, ValueError):
    code = "ZeroDirection"


class StepExceedsReach(GradProjError, ValueError):
    code = "StepExceedsReach"


# objectives
class NotSymmetric(GradProjError, ValueError):
    code = "NotSymmetric"


# solvers
class SolverError(GradProjError):
    """Raised from inside an iteration; carries the partial trace if any."""

    code = "SolverError"

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigInvalid(SolverError, ValueError):
    code = "ConfigInvalid"


class DegenerateStep(SolverError):
    code = "DegenerateStep"


class SingularJacobian(SolverError):
    code = "SingularJacobian"


class NewtonDiverged(SolverError):
    code = "NewtonDiverged"


# analysis
class TooShort(GradProjError, ValueError):
    code = "TooShort"


class NonPositiveValue(GradProjError, ValueError):
    code = "NonPositiveValue"


class NoSamplesInLevel(GradProjError, ValueError):
    code = "NoSamplesInLevel"


class InsufficientRange(GradProjError, ValueError):
    code = "InsufficientRange"


class DominanceTooWeak(GradProjError, ValueError):
    code = "DominanceTooWeak"


class ThetaOutOfRange(GradProjError, ValueError):
    code = "ThetaOutOfRange"


# cli / config
class ParseError(GradProjError, ValueError):
    code = "ParseError"

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ValidationError(GradProjError, ValueError):
    code = "ValidationError"

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
