"""Error hierarchy. The CLI maps every subclass of MarkovLabError to exit code 1."""
from typing import Optional


class MarkovLabError(Exception):
    """Base class for all errors raised by markovlab."""


class ConfigError(MarkovLabError):
    """Invalid flag, config key or config line."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class LawSpecError(ConfigError):
    VALID_FORMS = "exp:<rate>, invpow:<alpha>, const:<c>, bern:<p>:<base-law>"

    def __init__(self, text: str, reason: str = "malformed law"):
        self.text = text
        super().__init__(f"{reason} {text!r}; valid forms: {self.VALID_FORMS}")


class DimensionError(MarkovLabError):
    pass


class IsolatedRowError(MarkovLabError):
    def __init__(self, row: int, what: str = "row sum"):
        self.row = row
        super().__init__(f"isolated row {row + 1} (index {row}): {what} is zero")


class ReducibleError(MarkovLabError):
    pass


class ConvergenceError(MarkovLabError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class SingularSystemError(MarkovLabError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(
            f"stationary system is singular beyond its one redundancy "
            f"(condition estimate {condition:.3e}); support is reducible or badly conditioned"
        )


class MomentPreconditionError(MarkovLabError):
    pass


class ResourceError(MarkovLabError):
    pass


class NonFiniteWeightError(MarkovLabError):
    """Weights that overflow float64 where their absolute values are needed."""
