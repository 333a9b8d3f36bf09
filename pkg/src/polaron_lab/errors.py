"""Exception taxonomy shared by every module.

Two families matter to callers.  ValidationError and its subclasses mean
the inputs (or a configuration file) are unacceptable; the CLI maps them
to exit code 1.  ConvergenceError means a numerical procedure failed to
reach its tolerance; the CLI maps it to exit code 2.
"""


class PolaronLabError(Exception):
    """Base class for everything raised deliberately by this package."""


class ValidationError(PolaronLabError, ValueError):
    """Invalid input.  Carries the module and parameter that failed."""

    def __init__(self, module: str, field: str, message: str):
        self.module = module
        self.field = field
        super().__init__(f"{module}: {field}: {message}")


class DomainTooSmallError(ValidationError):
    """A profile does not decay enough at the grid boundary."""


class RangeError(ValidationError):
    """A requested quantity falls outside the representable range."""


class ConvergenceError(PolaronLabError, RuntimeError):
    """An iteration hit its cap or stagnated before reaching tolerance.

    The best iterate seen so far is attached when one exists, so callers
    can inspect how far the computation got.
    """

    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)
