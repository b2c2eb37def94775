"""Exception hierarchy shared by every module."""


class TeamLPError(Exception):
    """Base class for all errors raised by the package."""


class UnknownVariable(TeamLPError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EmptyRange(TeamLPError, ValueError):
    pass


class VariableMismatch(TeamLPError, ValueError):
    pass


class StructureError(TeamLPError, ValueError):
    pass


class FormatError(TeamLPError, ValueError):
    """Malformed .tls, .team or .lin input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(TeamLPError, ValueError):
    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnsupportedOperation(ParseError):
    pass


class ArityError(TeamLPError, ValueError):
    pass


class NotFirstOrder(TeamLPError, ValueError):
    pass


class NotRelational(TeamLPError, ValueError):
    pass


class UnsupportedAtom(TeamLPError, ValueError):
    pass


class CannotPrenex(TeamLPError, ValueError):
    pass


class NotLoose(TeamLPError, ValueError):
    pass


class NotInNormalForm(TeamLPError, ValueError):
    pass


class NotASentence(TeamLPError, ValueError):
    pass


class BadParameter(TeamLPError, ValueError):
    pass


class NotAlmostConjunctive(TeamLPError, ValueError):
    def __init__(self, message, subformula=None):
        self.subformula = subformula
        super().__init__(message)


class TooLarge(TeamLPError):
    pass


class BudgetExceeded(TeamLPError):
    pass


class MalformedAtom(TeamLPError, ValueError):
    pass


class ChaseBudget(TeamLPError):
    pass


class NoWitness(TeamLPError, ValueError):
    pass
