"""Exception types raised by the hedging library."""


class HedgeError(Exception):
    """Base class for all library errors."""


class InvalidInputError(HedgeError, ValueError):
    """Raised for malformed grids, measures, specs or parameters."""


class IncompatibleSupportsError(InvalidInputError):
    pass


class DegenerateMarginalError(InvalidInputError):
    pass


class SingularSystemError(HedgeError, ArithmeticError):
    """The stacked KKT matrix is (numerically) singular."""
