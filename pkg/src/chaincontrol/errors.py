"""Exception hierarchy shared by the library and the command line."""


class ChainControlError(Exception):
    """Base class for every error raised by this package."""


class ConstructionError(ChainControlError, ValueError):
    """Malformed system, range, or geometry data."""


class InputError(ChainControlError, ValueError):
    """An argument violates a precondition (e.g. a control outside its range)."""


class ConfigError(ChainControlError, ValueError):
    """Invalid run configuration."""


class BudgetError(ChainControlError):
    """A covering or graph would exceed the configured size budget."""


class EquatorError(ChainControlError, ValueError):
    """A sphere point lies on the equator, i.e. at infinity of the chart."""


class DivergenceError(ChainControlError, ArithmeticError):
    """A trajectory produced non-finite values.

    ``escape_time`` is the last time at which the state was still finite.
    """

    def __init__(self, message, escape_time):
        super().__init__(message)
        self.escape_time = escape_time
