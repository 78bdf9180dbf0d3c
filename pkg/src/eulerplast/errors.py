"""Exception hierarchy shared by all modules.

Each class carries a ``kind`` attribute the CLI maps to an exit code.
"""


class SimulationError(Exception):
    kind = "solver"


class SingularMatrix(SimulationError):
    pass


class NonPositiveDeterminant(SimulationError):
    pass


class NegativeTemperature(SimulationError):
    pass


class NonDeviatoricInput(SimulationError):
    pass


class NonDeviatoricRate(NonDeviatoricInput):
    pass


class NoConvergence(SimulationError):
    pass


class LinearSolveFailure(SimulationError):
    pass


class CflViolation(SimulationError):
    pass


class NegativeEnthalpy(SimulationError):
    kind = "invariant"


class InvariantViolation(SimulationError):
    kind = "invariant"


class ConfigError(Exception):
    kind = "config"


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class UnknownName(ConfigError, KeyError):
    def __str__(self):
        return Exception.__str__(self)
