from typing import List, NamedTuple, Optional


class Violation(NamedTuple):
    field: str
    reason: str

    def __str__(self) -> str:
        return f"{self.field}: {self.reason}"


class RevepException(Exception):
    pass


class ConfigError(RevepException):
    pass


class ConfigFileError(ConfigError):
    pass


class ValidationError(ConfigError):

    def __init__(self, violations: List[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class SimulationError(RevepException):
    pass


class NonConvergence(SimulationError):

    def __init__(self,
                 iterations: int,
                 residual: float,
                 unit: str = "relative",
                 tolerance: Optional[float] = None):
        self.iterations = iterations
        self.residual = residual
        self.unit = unit
        self.tolerance = tolerance
        message = f"no convergence after {iterations} iterations (residual={residual:.3e} {unit}"
        if tolerance is not None:
            message += f", tolerance {tolerance:.3e} {unit}"
        super().__init__(message + ")")


class SingularSystem(SimulationError):
    pass


class StabilityViolation(SimulationError):
    pass


class ConservationViolation(SimulationError):
    pass


class SnapshotTimeOutOfRange(SimulationError):
    pass


class OutOfDomain(SimulationError):
    pass


class DegenerateField(SimulationError):
    pass


class FieldShapeError(SimulationError):
    pass


class OutputError(RevepException):
    pass
