"""
Exception hierarchy of the message format toolchain.
"""

from dataclasses import dataclass, field
from typing import Any, FrozenSet, List, Optional


class FluxError(Exception):
    """Base class of all toolchain errors."""


@dataclass(frozen=True)
class Location:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class SpecSyntaxError:
    """A single syntax issue found while parsing a specification."""

    message: str
    location: Location
    expected: FrozenSet[str] = field(default_factory=frozenset)

    def __str__(self) -> str:
        if self.expected:
            return f"{self.message} (expected {', '.join(sorted(self.expected))})"
        return self.message


@dataclass(frozen=True)
class ElaborationError:
    """A single issue found while turning declarations into message graphs."""

    message: str
    location: Optional[Location] = None
    package: Optional[str] = None

    def __str__(self) -> str:
        return self.message


class SpecParseError(FluxError):
    def __init__(self, errors: List[SpecSyntaxError]):
        super().__init__("; ".join(f"{e.location}: {e}" for e in errors))
        self.errors = errors


class SpecElaborationError(FluxError):
    def __init__(self, errors: List[ElaborationError]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors


class ExpressionTypeError(FluxError):
    """Raised by the type checker; ``expression`` is the offending subexpression."""

    def __init__(self, message: str, expression: Any):
        super().__init__(f"{message}: {expression}")
        self.expression = expression


class EvalError(FluxError):
    """Evaluation failed: division by zero, underflow or a read outside the buffer."""


class ContractViolation(FluxError):
    """A runtime function was called with an unmet precondition."""


class UnknownNameError(FluxError, LookupError):
    pass


class DerivationError(FluxError):
    """Internal inconsistency while deriving a parser from a graph."""
