"""Exception hierarchy shared by every module.

The CLI maps each class onto its own exit code, so library callers can rely
on the class rather than on message text.
"""


class OamFidelityError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(OamFidelityError, ValueError):
    """Arguments are individually valid but violate an operation's contract."""


class DomainError(OamFidelityError, ValueError):
    """A numeric argument lies outside its admissible range."""


class AccuracyError(OamFidelityError, ArithmeticError):
    """A numerical approximation did not reach the requested accuracy.

    Attributes:
        estimates: The competing estimates (or bound) that triggered the error.
    """

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class DegenerateError(OamFidelityError, ArithmeticError):
    """Observed data or outcome has zero probability under every hypothesis."""


class FitError(OamFidelityError, RuntimeError):
    """Least-squares fit failed to converge.

    Attributes:
        best: Best parameter vector seen before giving up.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class RankError(FitError):
    """Jacobian of the fit is rank deficient (data cannot pin the parameters)."""


class ParseError(OamFidelityError, ValueError):
    """Malformed input file.

    Attributes:
        line: 1-based line number of the offending row, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line
