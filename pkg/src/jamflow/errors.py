"""Exception types shared across the package."""


class JamflowError(Exception):
    """Base class for all package errors."""


class ParameterError(JamflowError):
    """A law or fluid parameter is outside its admissible range."""


class BarrierViolation(JamflowError):
    """Density reached or crossed the maximal-density barrier."""


class QuadratureFailure(JamflowError):
    """Adaptive quadrature could not reach the requested tolerance."""


class SpecError(JamflowError):
    """A field profile description produced inadmissible values."""


class UnknownScenario(JamflowError):
    """Requested scenario name is not registered."""


class NonFinite(JamflowError):
    """NaN or Inf appeared in an evolved field."""


class DegenerateState(JamflowError):
    """Time step collapsed below a usable size."""


class StepFailure(JamflowError):
    """Sub-stepping retries were exhausted without an admissible state."""


class ParseError(JamflowError):
    """Config text could not be parsed."""


class ValidationError(JamflowError):
    """Config parsed but one or more values are invalid.

    Carries ``issues``: a list of (key, line, reason) tuples.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        lines = "; ".join(f"{key} (line {line}): {reason}" for key, line, reason in self.issues)
        super().__init__(f"invalid configuration: {lines}")


class IoError(JamflowError):
    """Output location could not be created or written."""
