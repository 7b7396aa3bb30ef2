class PevGameError(Exception):
    pass


class InfeasibleSet(PevGameError, ValueError):
    """A constraint set {sum z = gamma, lower <= z <= upper} is empty."""


class MaxIterExceeded(PevGameError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateObjective(PevGameError, ArithmeticError):
    pass
