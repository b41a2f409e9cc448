"""Exception hierarchy shared by all modules."""


class QuadMinimaxError(Exception):
    """Base class for every error raised by the package."""


class DataValidationError(QuadMinimaxError, ValueError):
    """Bad sample data (non-finite values, shape mismatch, ...)."""


class CsvParseError(DataValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(QuadMinimaxError, ValueError):
    """Invalid run configuration or weight scheme."""


class DimensionMismatch(QuadMinimaxError, ValueError):
    pass


class DegenerateInstance(QuadMinimaxError):
    """A measure-zero configuration the construction cannot resolve.

    Such instances are detected and reported, never silently patched.
    """


class SingularForm(DegenerateInstance):
    pass


class NearSingular(DegenerateInstance):
    def __init__(self, lam, message=None):
        self.lam = lam
        super().__init__(message or f"M(lambda) numerically singular at lambda={lam!r}")


class IdenticalForms(DegenerateInstance):
    pass


class TooManySingularNodes(DegenerateInstance):
    pass


class NoAdmissibleCandidate(DegenerateInstance):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics
        self.partial = None  # SolutionReport with every candidate, set by the solver
        super().__init__(message)


class IsolationBudgetExceeded(QuadMinimaxError):
    def __init__(self, intervals, budget):
        self.intervals = intervals
        self.budget = budget
        super().__init__(f"{intervals} intervals exceed the budget of {budget}")


class OracleUnavailable(QuadMinimaxError):
    """No brute-force oracle applies to this instance (cost guard, sign classes)."""
