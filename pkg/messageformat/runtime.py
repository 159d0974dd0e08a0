"""
Interpreter for derived parsers.

Buffers must carry the label of the message they are claimed to hold before
anything is validated or accessed. Preconditions of the public functions are
always checked and raise ContractViolation; postconditions are asserted in
debug mode only.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Union

import icontract

from .derive import DerivedParser, refinement_variants
from .exceptions import ContractViolation, EvalError, UnknownNameError
from .model import (
    Add,
    And,
    Const,
    Div,
    Eq,
    Expr,
    FalseLit,
    FieldId,
    Ge,
    Gt,
    Le,
    Lt,
    MessageLast,
    MessageLength,
    Mul,
    Ne,
    Not,
    Or,
    Path,
    Read,
    Refinement,
    Sub,
    TrueLit,
    ValidCall,
)

logger = logging.getLogger(__name__)

FieldRef = Union[FieldId, str]


class MessageBuffer:
    """
    Read-only view of a byte sequence plus the label of the message it holds.

    Slices share memory with the buffer they were taken from.
    """

    __slots__ = ("_data", "label")

    def __init__(self, data: Union[bytes, bytearray, memoryview], label: Optional[str] = None):
        self._data = memoryview(data).toreadonly()
        self.label = label

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        return f"MessageBuffer({len(self)} bytes, label={self.label!r})"

    @property
    def length(self) -> int:
        """Length in bits."""
        return 8 * len(self._data)

    def tobytes(self) -> bytes:
        return self._data.tobytes()

    def slice(self, start: int, stop: int, label: Optional[str] = None) -> "MessageBuffer":
        return MessageBuffer(self._data[start:stop], label)

    def _load(self, start: int, stop: int) -> memoryview:
        # All reads of the underlying bytes go through here.
        return self._data[start:stop]


@dataclass(frozen=True)
class FieldSlice:
    first: int
    length: int
    value: Optional[int] = None

    @property
    def last(self) -> int:
        return self.first + self.length - 1


def label(buffer: MessageBuffer, message: str) -> MessageBuffer:
    """Claim that ``buffer`` holds a ``message``."""
    buffer.label = message
    return buffer


def is_contained(buffer: MessageBuffer, message: str) -> bool:
    return buffer.label is not None and buffer.label.lower() == message.lower()


def read_bits(buffer: MessageBuffer, first: int, length: int) -> int:
    """Big-endian value of bits ``first`` .. ``first + length - 1`` (bit 0 is the MSB of byte 0)."""
    if first < 0 or length < 0 or first + length > buffer.length:
        raise EvalError(f"read of {length} bits at {first} outside {buffer.length}-bit buffer")
    if length == 0:
        return 0
    start = first // 8
    stop = (first + length + 7) // 8
    chunk = int.from_bytes(buffer._load(start, stop), "big")
    return (chunk >> (stop * 8 - first - length)) & ((1 << length) - 1)


def _checked_sub(lhs: int, rhs: int) -> int:
    if lhs < rhs:
        raise EvalError(f"underflow in {lhs} - {rhs}")
    return lhs - rhs


def _checked_div(lhs: int, rhs: int) -> int:
    if rhs == 0:
        raise EvalError("division by zero")
    return lhs // rhs


ARITHMETIC: Dict[type, Callable[[int, int], int]] = {
    Add: lambda a, b: a + b,
    Sub: _checked_sub,
    Mul: lambda a, b: a * b,
    Div: _checked_div,
}

RELATIONS: Dict[type, Callable[[int, int], bool]] = {
    Eq: lambda a, b: a == b,
    Ne: lambda a, b: a != b,
    Le: lambda a, b: a <= b,
    Ge: lambda a, b: a >= b,
    Lt: lambda a, b: a < b,
    Gt: lambda a, b: a > b,
}


class _Evaluation:
    """One evaluation over a fixed buffer; variant results are memoized."""

    __slots__ = ("buffer", "parser", "variants")

    def __init__(self, buffer: MessageBuffer, parser: Optional[DerivedParser] = None):
        self.buffer = buffer
        self.parser = parser
        self.variants: Dict[Path, bool] = {}

    def value(self, expr: Expr) -> Union[int, bool]:
        kind = type(expr)
        if kind is Const:
            return expr.value
        if kind in ARITHMETIC:
            return ARITHMETIC[kind](self.value(expr.lhs), self.value(expr.rhs))
        if kind in RELATIONS:
            return RELATIONS[kind](self.value(expr.lhs), self.value(expr.rhs))
        if kind is And:
            return bool(self.value(expr.lhs)) and bool(self.value(expr.rhs))
        if kind is Or:
            return bool(self.value(expr.lhs)) or bool(self.value(expr.rhs))
        if kind is Not:
            return not self.value(expr.operand)
        if kind is Read:
            return read_bits(self.buffer, self.value(expr.first), self.value(expr.length))
        if kind is ValidCall:
            return self.variant_valid(expr.path)
        if kind is MessageLength:
            return self.buffer.length
        if kind is MessageLast:
            return _checked_sub(self.buffer.length, 1)
        if kind is TrueLit:
            return True
        if kind is FalseLit:
            return False
        raise EvalError(f"cannot evaluate {expr}")

    def condition(self, expr: Expr) -> bool:
        try:
            return bool(self.value(expr))
        except EvalError:
            return False

    def variant_valid(self, path: Path) -> bool:
        if path not in self.variants:
            if self.parser is None:
                raise EvalError(f"no parser to resolve variant {list(path)}")
            self.variants[path] = self.condition(self.parser.variant_valid[path].body)
        return self.variants[path]

    def field_valid(self, field: FieldId) -> bool:
        return any(
            self.variant_valid(path) and self.condition(condition)
            for path, condition in self.parser.field_valid[field].terms
        )

    def valid_paths(self) -> list:
        return [path for path in self.parser.final_paths if self.variant_valid(path)]


def evaluate(expr: Expr, buffer: MessageBuffer, parser: Optional[DerivedParser] = None) -> Union[int, bool]:
    """
    Evaluate a closed expression over ``buffer``.

    Raises EvalError on division by zero, underflow or a read outside the
    buffer. ``parser`` is needed to evaluate variant calls.
    """
    return _Evaluation(buffer, parser).value(expr)


def _labeled(parser: DerivedParser, buffer: MessageBuffer) -> bool:
    return is_contained(buffer, parser.message_name)


def _resolve_field(parser: DerivedParser, field: FieldRef) -> FieldId:
    if isinstance(field, str):
        return parser.field(field)
    if field not in parser.field_valid:
        raise UnknownNameError(f"{parser.message_name} has no field {field}")
    return field


def _known_field(parser: DerivedParser, field: FieldRef) -> bool:
    try:
        _resolve_field(parser, field)
    except UnknownNameError:
        return False
    return True


@icontract.require(
    lambda parser, buffer: _labeled(parser, buffer),
    "buffer is labeled with the parser's message",
    enabled=True,
    error=ContractViolation,
)
@icontract.require(
    lambda parser, path: tuple(path) in parser.variant_valid,
    "path is a variant of the message",
    enabled=True,
    error=ContractViolation,
)
def variant_valid(parser: DerivedParser, path: Path, buffer: MessageBuffer) -> bool:
    return _Evaluation(buffer, parser).variant_valid(tuple(path))


@icontract.require(
    lambda parser, buffer: _labeled(parser, buffer),
    "buffer is labeled with the parser's message",
    enabled=True,
    error=ContractViolation,
)
@icontract.require(
    lambda parser, field: _known_field(parser, field),
    "field belongs to the parser's message",
    enabled=True,
    error=UnknownNameError,
)
def field_valid(parser: DerivedParser, field: FieldRef, buffer: MessageBuffer) -> bool:
    return _Evaluation(buffer, parser).field_valid(_resolve_field(parser, field))


@icontract.require(
    lambda parser, field, buffer: _labeled(parser, buffer)
    and _known_field(parser, field)
    and _Evaluation(buffer, parser).field_valid(_resolve_field(parser, field)),
    "field is valid in a labeled buffer",
    enabled=True,
    error=ContractViolation,
)
@icontract.ensure(lambda buffer, result: 0 <= result.first and result.first + result.length <= buffer.length)
def field_access(parser: DerivedParser, field: FieldRef, buffer: MessageBuffer) -> FieldSlice:
    """Location (and value for scalar fields) of the first valid variant of ``field``."""
    field = _resolve_field(parser, field)
    evaluation = _Evaluation(buffer, parser)
    choice = parser.field_access[field].choice
    while choice is not None:
        if evaluation.variant_valid(choice.path):
            access = parser.variant_access[choice.path]
            first = evaluation.value(access.first)
            length = evaluation.value(access.length)
            value = None
            if parser.graph.fields[field].size is not None:
                value = read_bits(buffer, first, length)
            return FieldSlice(first, length, value)
        choice = choice.orelse
    raise ContractViolation(f"{field} has no valid variant")


@icontract.require(
    lambda parser, buffer: _labeled(parser, buffer),
    "buffer is labeled with the parser's message",
    enabled=True,
    error=ContractViolation,
)
def is_valid(parser: DerivedParser, buffer: MessageBuffer) -> bool:
    """True iff exactly one complete path through the message is valid."""
    return len(_Evaluation(buffer, parser).valid_paths()) == 1


@icontract.require(
    lambda parser, buffer: _labeled(parser, buffer),
    "buffer is labeled with the parser's message",
    enabled=True,
    error=ContractViolation,
)
def accepting_path(parser: DerivedParser, buffer: MessageBuffer) -> Optional[Path]:
    paths = _Evaluation(buffer, parser).valid_paths()
    return paths[0] if len(paths) == 1 else None


@icontract.require(
    lambda refinement, outer_parser: refinement.outer_message.lower() == outer_parser.message_name.lower(),
    "refinement applies to the parser's message",
    enabled=True,
    error=ContractViolation,
)
@icontract.require(
    lambda outer_parser, buffer: _labeled(outer_parser, buffer) and is_valid(outer_parser, buffer),
    "buffer is a valid, labeled outer message",
    enabled=True,
    error=ContractViolation,
)
@icontract.ensure(lambda refinement, result: result is None or is_contained(result, refinement.inner_message))
def contains(refinement: Refinement, outer_parser: DerivedParser, buffer: MessageBuffer) -> Optional[MessageBuffer]:
    """
    Payload of ``buffer`` as a buffer labeled with the inner message, or None
    if the refinement condition does not hold.
    """
    evaluation = _Evaluation(buffer, outer_parser)
    path = evaluation.valid_paths()[0]
    variant = next(v for v in refinement_variants(outer_parser, refinement) if v.path == path)
    if variant.payload is None or not evaluation.condition(variant.condition):
        return None
    access = outer_parser.variant_access[variant.payload]
    first = evaluation.value(access.first)
    length = evaluation.value(access.length)
    if first % 8 or length % 8:
        logger.warning("payload of %s at bit %d is not byte aligned", outer_parser.message_name, first)
        return None
    return buffer.slice(first // 8, (first + length) // 8, refinement.inner_message)
