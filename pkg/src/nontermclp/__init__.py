"""Non-termination analysis for binary constraint logic programs over finite
trees and linear rational arithmetic."""

__version__ = "0.1.0"

from .errors import (ArityError, NonLinearError, NontermError, ParseError, ResourceError,
                     UnsatisfiableRuleError)
from .parser import parse_program, parse_query

__all__ = [
    "ArityError", "NonLinearError", "NontermError", "ParseError", "ResourceError",
    "UnsatisfiableRuleError", "parse_program", "parse_query", "__version__",
]
