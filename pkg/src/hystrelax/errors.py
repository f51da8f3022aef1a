"""Exception hierarchy shared by all modules."""


class HystRelaxError(Exception):
    """Base class for errors raised by hystrelax."""


class ConfigError(HystRelaxError, ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


class DomainError(HystRelaxError, ValueError):
    """A query falls outside the effective domain of a function or set."""


class ConstraintError(HystRelaxError, ValueError):
    """A control violates its bound or admissible set."""


class EvaluationError(HystRelaxError, ArithmeticError):
    """A model function returned a non-finite value."""


class BlowUpError(HystRelaxError, ArithmeticError):
    """The time stepper produced a non-finite state (CLI exit code 3)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
