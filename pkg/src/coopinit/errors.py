"""Exception hierarchy shared by every module."""


class CoopInitError(Exception):
    pass


class ShapeError(CoopInitError, ValueError):
    pass


class ContractError(CoopInitError, ValueError):
    """A precondition of an operation was violated by the caller."""


class NumericError(CoopInitError, ArithmeticError):
    """Non-finite values appeared in an input, gradient or loss.

    ``index`` locates the first offending entry when it is known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TrainingError(CoopInitError, RuntimeError):
    """Training diverged. ``snapshot`` holds diagnostics about the failing step."""

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class FormatError(CoopInitError, ValueError):
    pass


class ConfigError(CoopInitError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
