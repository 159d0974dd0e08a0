"""
Graph-based message model.

A message is a directed acyclic graph whose nodes are fields and whose edges
carry a condition, a length expression and a first-bit expression. Every
expression is a tree of the deep-embedded expression language defined here.
All values are immutable once constructed.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, fields, replace
from types import MappingProxyType
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx

from .exceptions import ExpressionTypeError


Path = Tuple[int, ...]

IDENTIFIER = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class FieldId:
    name: str
    sentinel: bool = False

    def __str__(self) -> str:
        return self.name


INITIAL = FieldId("Initial", sentinel=True)
FINAL = FieldId("Final", sentinel=True)


class Sort(enum.Enum):
    BOOLEAN = "boolean"
    ARITHMETIC = "arithmetic"


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

PRIMARY = 9


class Expr:
    """Base class of all expression constructors."""

    __slots__ = ()

    def __str__(self) -> str:
        return format_expression(self)


@dataclass(frozen=True)
class Const(Expr):
    value: int


@dataclass(frozen=True)
class FieldValue(Expr):
    field: FieldId


@dataclass(frozen=True)
class FieldFirst(Expr):
    field: FieldId


@dataclass(frozen=True)
class FieldLength(Expr):
    field: FieldId


@dataclass(frozen=True)
class MessageLength(Expr):
    pass


@dataclass(frozen=True)
class MessageLast(Expr):
    pass


@dataclass(frozen=True)
class TrueLit(Expr):
    pass


@dataclass(frozen=True)
class FalseLit(Expr):
    pass


TRUE = TrueLit()
FALSE = FalseLit()


@dataclass(frozen=True)
class BinaryExpr(Expr):
    lhs: Expr
    rhs: Expr

    symbol = "?"
    precedence = PRIMARY
    associative = True
    tight = False


class Add(BinaryExpr):
    symbol = "+"
    precedence = 5


class Sub(BinaryExpr):
    symbol = "-"
    precedence = 5


class Mul(BinaryExpr):
    symbol = "*"
    precedence = 6


class Div(BinaryExpr):
    symbol = "/"
    precedence = 6


class Relation(BinaryExpr):
    precedence = 3
    associative = False


class Eq(Relation):
    symbol = "="


class Ne(Relation):
    symbol = "/="


class Le(Relation):
    symbol = "<="


class Ge(Relation):
    symbol = ">="


class Lt(Relation):
    symbol = "<"


class Gt(Relation):
    symbol = ">"


class And(BinaryExpr):
    symbol = "and"
    precedence = 2


class Or(BinaryExpr):
    symbol = "or"
    precedence = 1


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr

    precedence = 7


# Constructors that only appear after derivation: a read of the buffer at a
# substituted location, and a call to a variant validation function.

@dataclass(frozen=True)
class Read(Expr):
    first: Expr
    length: Expr


@dataclass(frozen=True)
class ValidCall(Expr):
    path: Path


ARITHMETIC_OPERATORS = (Add, Sub, Mul, Div)
RELATIONS = (Eq, Ne, Le, Ge, Lt, Gt)
CONNECTIVES = (And, Or)
FIELD_REFERENCES = (FieldValue, FieldFirst, FieldLength)


def children(expr: Expr) -> Tuple[Expr, ...]:
    return tuple(
        getattr(expr, f.name) for f in fields(expr) if isinstance(getattr(expr, f.name), Expr)
    )


def walk(expr: Expr) -> Iterator[Expr]:
    """Yield ``expr`` and all of its subexpressions in pre-order."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def transform(expr: Expr, function: Callable[[Expr], Expr]) -> Expr:
    """Rebuild ``expr`` bottom-up, applying ``function`` to every node."""
    changes = {}
    for f in fields(expr):
        value = getattr(expr, f.name)
        if isinstance(value, Expr):
            changes[f.name] = transform(value, function)
    node = replace(expr, **changes) if changes else expr
    return function(node)


def referenced_fields(expr: Expr) -> Set[FieldId]:
    return {node.field for node in walk(expr) if isinstance(node, FIELD_REFERENCES)}


def is_closed(expr: Expr) -> bool:
    """True if no field reference constructor occurs in ``expr``."""
    return not any(isinstance(node, FIELD_REFERENCES) for node in walk(expr))


def last_of(field: FieldId) -> Expr:
    """``X'Last``, i.e. ``X'First + X'Length - 1``."""
    return Sub(Add(FieldFirst(field), FieldLength(field)), Const(1))


def _last_field(expr: Expr) -> Optional[FieldId]:
    if (
        isinstance(expr, Sub)
        and expr.rhs == Const(1)
        and isinstance(expr.lhs, Add)
        and isinstance(expr.lhs.lhs, FieldFirst)
        and isinstance(expr.lhs.rhs, FieldLength)
        and expr.lhs.lhs.field == expr.lhs.rhs.field
    ):
        return expr.lhs.lhs.field
    return None


def _precedence(expr: Expr) -> int:
    if _last_field(expr) is not None:
        return PRIMARY
    return getattr(expr, "precedence", PRIMARY)


def format_expression(expr: Expr) -> str:
    """Render ``expr`` in specification syntax with minimal parentheses."""
    last = _last_field(expr)
    if last is not None:
        return f"{last}'Last"
    if isinstance(expr, Const):
        return str(expr.value)
    if isinstance(expr, FieldValue):
        return str(expr.field)
    if isinstance(expr, FieldFirst):
        return f"{expr.field}'First"
    if isinstance(expr, FieldLength):
        return f"{expr.field}'Length"
    if isinstance(expr, MessageLength):
        return "Message'Length"
    if isinstance(expr, MessageLast):
        return "Message'Last"
    if isinstance(expr, TrueLit):
        return "True"
    if isinstance(expr, FalseLit):
        return "False"
    if isinstance(expr, Not):
        return f"not {_wrap(expr.operand, _precedence(expr.operand) < expr.precedence)}"
    if isinstance(expr, Read):
        return f"Read ({format_expression(expr.first)}, {format_expression(expr.length)})"
    if isinstance(expr, ValidCall):
        return f"Valid [{', '.join(str(i) for i in expr.path)}]"
    if isinstance(expr, BinaryExpr):
        lhs_parens = _precedence(expr.lhs) < expr.precedence or (
            not expr.associative and _precedence(expr.lhs) == expr.precedence
        )
        rhs_parens = _precedence(expr.rhs) <= expr.precedence
        space = "" if expr.tight else " "
        return f"{_wrap(expr.lhs, lhs_parens)}{space}{expr.symbol}{space}{_wrap(expr.rhs, rhs_parens)}"
    raise ExpressionTypeError("cannot format expression", expr)


def _wrap(expr: Expr, parens: bool) -> str:
    text = format_expression(expr)
    return f"({text})" if parens else text


def type_check_expression(expr: Expr, in_scope: Set[FieldId]) -> Sort:
    """Return the sort of ``expr``; raise ExpressionTypeError if it is ill-formed."""
    if isinstance(expr, Const):
        if isinstance(expr.value, bool) or not isinstance(expr.value, int) or expr.value < 0:
            raise ExpressionTypeError("literal must be a non-negative integer", expr)
        return Sort.ARITHMETIC
    if isinstance(expr, FIELD_REFERENCES):
        if expr.field not in in_scope:
            raise ExpressionTypeError(f"reference to {expr.field} is not in scope", expr)
        return Sort.ARITHMETIC
    if isinstance(expr, (MessageLength, MessageLast)):
        return Sort.ARITHMETIC
    if isinstance(expr, (TrueLit, FalseLit, ValidCall)):
        return Sort.BOOLEAN
    if isinstance(expr, Read):
        _expect(expr.first, in_scope, Sort.ARITHMETIC, expr)
        _expect(expr.length, in_scope, Sort.ARITHMETIC, expr)
        return Sort.ARITHMETIC
    if isinstance(expr, Not):
        _expect(expr.operand, in_scope, Sort.BOOLEAN, expr)
        return Sort.BOOLEAN
    if isinstance(expr, ARITHMETIC_OPERATORS):
        _expect(expr.lhs, in_scope, Sort.ARITHMETIC, expr)
        _expect(expr.rhs, in_scope, Sort.ARITHMETIC, expr)
        return Sort.ARITHMETIC
    if isinstance(expr, RELATIONS):
        _expect(expr.lhs, in_scope, Sort.ARITHMETIC, expr)
        _expect(expr.rhs, in_scope, Sort.ARITHMETIC, expr)
        return Sort.BOOLEAN
    if isinstance(expr, CONNECTIVES):
        _expect(expr.lhs, in_scope, Sort.BOOLEAN, expr)
        _expect(expr.rhs, in_scope, Sort.BOOLEAN, expr)
        return Sort.BOOLEAN
    raise ExpressionTypeError("unknown expression constructor", expr)


def _expect(expr: Expr, in_scope: Set[FieldId], sort: Sort, parent: Expr) -> None:
    if type_check_expression(expr, in_scope) is not sort:
        raise ExpressionTypeError(f"expected {sort.value} operand", parent)


# ---------------------------------------------------------------------------
# Field types
# ---------------------------------------------------------------------------

class FieldType:
    """Base class of field types. ``size`` is None for opaque fields."""

    name: str = ""

    @property
    def size(self) -> Optional[int]:
        raise NotImplementedError

    def constraint(self, value: Expr) -> Expr:
        """Condition a field value must satisfy to be valid."""
        return TRUE

    def problems(self) -> List[str]:
        return []


@dataclass(frozen=True)
class ModularInteger(FieldType):
    modulus: int
    name: str = ""

    @property
    def size(self) -> int:
        return self.modulus.bit_length() - 1

    def problems(self) -> List[str]:
        if self.modulus < 2 or self.modulus & (self.modulus - 1):
            return [f"modulus {self.modulus} of {self.name} is not a power of two >= 2"]
        return []


@dataclass(frozen=True)
class RangeInteger(FieldType):
    lower: int
    upper: int
    size_bits: int
    name: str = ""

    @property
    def size(self) -> int:
        return self.size_bits

    def constraint(self, value: Expr) -> Expr:
        checks = []
        if self.lower > 0:
            checks.append(Ge(value, Const(self.lower)))
        if self.upper < 2**self.size_bits - 1:
            checks.append(Le(value, Const(self.upper)))
        return conjunction(checks)

    def problems(self) -> List[str]:
        found = []
        if self.size_bits < 1:
            found.append(f"size of {self.name} must be positive")
        if self.lower > self.upper:
            found.append(f"range of {self.name} is empty ({self.lower} > {self.upper})")
        if self.size_bits >= 1 and self.upper >= 2**self.size_bits:
            found.append(f"upper bound of {self.name} does not fit into {self.size_bits} bits")
        return found


@dataclass(frozen=True)
class Enumeration(FieldType):
    literals: Tuple[Tuple[str, int], ...]
    size_bits: int
    name: str = ""

    @property
    def size(self) -> int:
        return self.size_bits

    def literal_name(self, value: int) -> Optional[str]:
        for literal, literal_value in self.literals:
            if literal_value == value:
                return literal
        return None

    def constraint(self, value: Expr) -> Expr:
        return disjunction([Eq(value, Const(v)) for _, v in self.literals])

    def problems(self) -> List[str]:
        found = []
        values = [v for _, v in self.literals]
        if self.size_bits < 1:
            found.append(f"size of {self.name} must be positive")
        if len(set(values)) != len(values):
            found.append(f"enumeration {self.name} has duplicate values")
        if len({n.lower() for n, _ in self.literals}) != len(self.literals):
            found.append(f"enumeration {self.name} has duplicate literals")
        for literal, v in self.literals:
            if v >= 2**self.size_bits:
                found.append(f"value of {literal} does not fit into {self.size_bits} bits")
        return found


@dataclass(frozen=True)
class OpaquePayload(FieldType):
    name: str = "Payload"

    @property
    def size(self) -> None:
        return None


def conjunction(operands: Sequence[Expr]) -> Expr:
    operands = [o for o in operands if o != TRUE]
    if not operands:
        return TRUE
    result = operands[0]
    for operand in operands[1:]:
        result = And(result, operand)
    return result


def disjunction(operands: Sequence[Expr]) -> Expr:
    operands = list(operands)
    if not operands:
        return FALSE
    result = operands[0]
    for operand in operands[1:]:
        result = Or(result, operand)
    return result


# ---------------------------------------------------------------------------
# Graphs and refinements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    source: FieldId
    target: FieldId
    condition: Expr = TRUE
    length: Expr = Const(0)
    first: Expr = Const(0)


@dataclass(frozen=True, eq=False)
class MessageGraph:
    message_name: str
    fields: Mapping[FieldId, FieldType]
    edges: Tuple[Edge, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fields", MappingProxyType(dict(self.fields)))
        object.__setattr__(self, "edges", tuple(self.edges))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MessageGraph):
            return NotImplemented
        return (
            self.message_name == other.message_name
            and list(self.fields.items()) == list(other.fields.items())
            and self.edges == other.edges
        )

    __hash__ = None

    @property
    def nodes(self) -> Tuple[FieldId, ...]:
        return (INITIAL, *self.fields, FINAL)

    def incoming(self, node: FieldId) -> List[Tuple[int, Edge]]:
        return [(i, e) for i, e in enumerate(self.edges) if e.target == node]

    def outgoing(self, node: FieldId) -> List[Tuple[int, Edge]]:
        return [(i, e) for i, e in enumerate(self.edges) if e.source == node]

    def field(self, name: str) -> Optional[FieldId]:
        """Case-insensitive lookup of a user field by name."""
        for field in self.fields:
            if field.name.lower() == name.lower():
                return field
        return None

    def to_networkx(self) -> nx.MultiDiGraph:
        graph = nx.MultiDiGraph()
        graph.add_nodes_from(self.nodes)
        for index, edge in enumerate(self.edges):
            graph.add_edge(edge.source, edge.target, key=index, edge=edge)
        return graph


@dataclass(frozen=True)
class Refinement:
    outer_message: str
    payload_field: FieldId
    inner_message: str
    condition: Expr = TRUE
    name: str = ""


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

class ErrorKind(enum.Enum):
    INVALID_FIELD = "invalid field"
    INVALID_TYPE = "invalid type"
    SENTINEL_EDGE = "sentinel edge"
    DANGLING_REFERENCE = "dangling reference"
    CYCLE = "cycle"
    UNREACHABLE = "unreachable field"
    FORWARD_REFERENCE = "forward reference"
    TYPE_ERROR = "type error"


@dataclass(frozen=True)
class ModelError:
    kind: ErrorKind
    message: str
    edge: Optional[int] = None
    field: Optional[FieldId] = None

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.message}"


def validate_graph(graph: MessageGraph) -> List[ModelError]:
    """Return all violations of the message graph invariants (empty if well-formed)."""
    errors = _check_fields(graph)
    errors.extend(_check_structure(graph))
    if errors:
        return errors

    digraph = graph.to_networkx()
    try:
        cycle = nx.find_cycle(digraph, source=INITIAL)
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle is None and not nx.is_directed_acyclic_graph(digraph):
        cycle = nx.find_cycle(digraph)
    if cycle is not None:
        nodes = " -> ".join([str(step[0]) for step in cycle] + [str(cycle[-1][1])])
        return [ModelError(ErrorKind.CYCLE, f"cycle {nodes}", edge=cycle[0][2])]

    reachable = nx.descendants(digraph, INITIAL)
    coreachable = nx.ancestors(digraph, FINAL)
    if FINAL not in reachable:
        errors.append(ModelError(ErrorKind.UNREACHABLE, "final node is not reachable", field=FINAL))
    for field in graph.fields:
        if field not in reachable:
            errors.append(
                ModelError(ErrorKind.UNREACHABLE, f"{field} is not reachable from the initial node", field=field)
            )
        elif field not in coreachable:
            errors.append(
                ModelError(ErrorKind.UNREACHABLE, f"final node is not reachable from {field}", field=field)
            )

    dominators = nx.immediate_dominators(nx.DiGraph(digraph), INITIAL)
    for index, edge in enumerate(graph.edges):
        if edge.source != INITIAL and edge.source not in reachable:
            continue
        scope = _dominating_fields(dominators, edge.source)
        for role, expr, sort in (
            ("condition", edge.condition, Sort.BOOLEAN),
            ("length", edge.length, Sort.ARITHMETIC),
            ("first", edge.first, Sort.ARITHMETIC),
        ):
            errors.extend(_check_expression(graph, index, edge, role, expr, sort, scope))
    return errors


def _check_fields(graph: MessageGraph) -> List[ModelError]:
    errors = []
    seen: Dict[str, FieldId] = {}
    for field, field_type in graph.fields.items():
        if field.sentinel or not IDENTIFIER.match(field.name):
            errors.append(ModelError(ErrorKind.INVALID_FIELD, f"invalid field name {field.name!r}", field=field))
        elif field.name.lower() in seen:
            errors.append(ModelError(ErrorKind.INVALID_FIELD, f"duplicate field {field.name}", field=field))
        seen[field.name.lower()] = field
        for problem in field_type.problems():
            errors.append(ModelError(ErrorKind.INVALID_TYPE, problem, field=field))
    return errors


def _check_structure(graph: MessageGraph) -> List[ModelError]:
    errors = []
    known = set(graph.nodes)
    for index, edge in enumerate(graph.edges):
        for end in (edge.source, edge.target):
            if end not in known:
                errors.append(
                    ModelError(ErrorKind.DANGLING_REFERENCE, f"edge {index} connects unknown field {end}", edge=index)
                )
        if edge.target == INITIAL:
            errors.append(ModelError(ErrorKind.SENTINEL_EDGE, f"edge {index} enters the initial node", edge=index))
        if edge.source == FINAL:
            errors.append(ModelError(ErrorKind.SENTINEL_EDGE, f"edge {index} leaves the final node", edge=index))
    return errors


def _dominating_fields(dominators: Mapping[FieldId, FieldId], node: FieldId) -> Set[FieldId]:
    """Fields lying on every path from the initial node to ``node`` (inclusive)."""
    scope = {node}
    while node in dominators and dominators[node] != node:
        node = dominators[node]
        scope.add(node)
    scope.discard(INITIAL)
    return scope


def _check_expression(
    graph: MessageGraph,
    index: int,
    edge: Edge,
    role: str,
    expr: Expr,
    sort: Sort,
    scope: Set[FieldId],
) -> List[ModelError]:
    errors = []
    where = f"{role} of edge {index} ({edge.source} -> {edge.target})"
    for node in walk(expr):
        if isinstance(node, (Read, ValidCall)):
            errors.append(ModelError(ErrorKind.TYPE_ERROR, f"derived constructor in {where}", edge=index))
        if not isinstance(node, FIELD_REFERENCES):
            continue
        field = node.field
        if field.sentinel or field not in graph.fields:
            errors.append(
                ModelError(ErrorKind.DANGLING_REFERENCE, f"{where} refers to unknown field {field}", index, field)
            )
        elif field not in scope:
            errors.append(
                ModelError(
                    ErrorKind.FORWARD_REFERENCE,
                    f"{where} refers to {field}, which does not precede {edge.target} on every path",
                    index,
                    field,
                )
            )
        elif isinstance(node, FieldValue) and graph.fields[field].size is None:
            errors.append(
                ModelError(ErrorKind.TYPE_ERROR, f"{where} uses the value of opaque field {field}", index, field)
            )
    if errors:
        return errors
    try:
        actual = type_check_expression(expr, set(graph.fields))
    except ExpressionTypeError as e:
        return [ModelError(ErrorKind.TYPE_ERROR, f"{where}: {e}", edge=index)]
    if actual is not sort:
        return [ModelError(ErrorKind.TYPE_ERROR, f"{where} must be {sort.value}", edge=index)]
    return []
