"""Exception types shared across the analyzer."""


class NontermError(Exception):
    """Base class for all analyzer errors."""


class ParseError(NontermError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ArityError(ParseError):
    pass


class UnsatisfiableRuleError(NontermError):
    """A rule whose constraint has no solution in the domain."""

    def __init__(self, rule, line=None):
        self.rule = rule
        self.line = line
        where = f" at line {line}" if line is not None else ""
        super().__init__(f"unsatisfiable rule constraint{where}: {rule}")


class NonLinearError(ParseError):
    pass


class ResourceError(NontermError):
    """A configured size cap was exceeded."""
