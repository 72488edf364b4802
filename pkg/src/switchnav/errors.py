"""Exception types raised across the package."""


class SwitchnavError(Exception):
    pass


# linear algebra
class NotSchurStable(SwitchnavError, ValueError):
    pass


class NoConvergence(SwitchnavError, RuntimeError):
    pass


class NotSymmetric(SwitchnavError, ValueError):
    pass


class NotControllable(SwitchnavError, ValueError):
    pass


class NotObservable(SwitchnavError, ValueError):
    pass


class PlacementFailed(SwitchnavError, RuntimeError):
    pass


# graphs
class BadEntries(SwitchnavError, ValueError):
    pass


class NotConnected(SwitchnavError, ValueError):
    pass


class AlphaOutOfRange(SwitchnavError, ValueError):
    pass


class ConstructionError(SwitchnavError, ValueError):
    pass


# plant
class UncertaintyBoundViolated(SwitchnavError, ValueError):
    pass


class UnsupportedStructure(SwitchnavError, ValueError):
    pass


# estimator / controller
class InactiveSensor(SwitchnavError, RuntimeError):
    pass


class SizeMismatch(SwitchnavError, ValueError):
    pass


class NotAddressed(SwitchnavError, ValueError):
    pass


class NoEstimateReceived(SwitchnavError, RuntimeError):
    pass


class TaskNotAccomplished(SwitchnavError, RuntimeError):
    pass


# certification
class MissingHistory(SwitchnavError, ValueError):
    pass


class UnknownSwitchTime(SwitchnavError, ValueError):
    pass


class DegenerateContraction(SwitchnavError, ValueError):
    pass


class InfeasibleCertificate(SwitchnavError, ValueError):
    pass


class NoFiniteBound(SwitchnavError, RuntimeError):
    pass


# harness
class ParseError(SwitchnavError, ValueError):
    pass


class AssumptionViolated(SwitchnavError, ValueError):
    """A scenario breaks one of the standing assumptions; ``name`` says which."""

    def __init__(self, name, detail=""):
        self.name = name
        msg = f"assumption violated: {name}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class MaxTicksExceeded(SwitchnavError, RuntimeError):
    pass


class SingularInnovationCovariance(SwitchnavError, ArithmeticError):
    pass
