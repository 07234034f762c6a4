class BathyError(Exception):
    """
    Base class for every domain error raised by the toolkit.

    Each subclass fixes the process exit code the command layer uses when the
    error reaches it.

    Attributes:
        detail (str): Human readable description of what went wrong.
        exit_code (int): Exit status reported by the CLI.
    """
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# configuration, exit 2
class ConfigError(BathyError):
    exit_code = 2


class GridError(ConfigError):
    pass


class GridMismatch(ConfigError):
    pass


class TimeOutOfRange(ConfigError):
    pass


class WindowOutsideDomain(ConfigError):
    pass


# numerical failures, exit 3
class SolverError(BathyError):
    exit_code = 3


class SolverDivergence(SolverError):
    pass


class DepthViolation(SolverError):
    pass


class CurveOutsideDomain(SolverError):
    pass


class RegionOutsideDomain(SolverError):
    pass


class LineSearchFailure(SolverError):
    def __init__(self, detail: str, result=None):
        super().__init__(detail)
        self.result = result


class IdenticalPair(BathyError):
    exit_code = 4


# violated preconditions of an estimate, exit 5
class PreconditionError(BathyError):
    exit_code = 5


class SmallnessViolated(PreconditionError):
    pass


class HypothesisViolation(PreconditionError):
    pass


class PointTooNearBoundary(PreconditionError):
    pass


class ZeroEnergy(PreconditionError):
    pass


class DegenerateComponent(PreconditionError):
    pass


class NoComponents(PreconditionError):
    pass


class InfeasibleInitialGuess(BathyError):
    exit_code = 6


class VerificationFailed(BathyError):
    exit_code = 1
