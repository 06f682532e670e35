"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition."""


class DegenerateDenominatorError(ArithmeticError):
    """A relative objective's zero-flow reference is zero."""


class SolverFailure(RuntimeError):
    """The optimizer hit a non-finite objective.

    ``last_x`` holds the last iterate at which the objective was finite.
    """

    def __init__(self, message, last_x=None, last_value=None):
        super().__init__(message)
        self.last_x = last_x
        self.last_value = last_value


class FormatError(ValueError):
    """A file does not follow the expected binary or text layout."""


class ParseError(FormatError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
