"""
Specification language front end.

``parse_spec`` turns the text of one ``.rflx`` file into a ``SpecFile``,
``pretty_print`` turns it back into canonical text, and ``elaborate`` /
``elaborate_all`` resolve names and build the message graphs and
refinements of one or more packages.
"""

import logging
import re
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .exceptions import (
    ElaborationError,
    ExpressionTypeError,
    Location,
    SpecElaborationError,
    SpecParseError,
    SpecSyntaxError,
    UnknownNameError,
)
from .model import (
    FALSE,
    FINAL,
    INITIAL,
    TRUE,
    Add,
    BinaryExpr,
    Const,
    Div,
    Edge,
    Enumeration,
    ErrorKind,
    Expr,
    FieldFirst,
    FieldId,
    FieldLength,
    FieldType,
    FieldValue,
    MessageGraph,
    MessageLast,
    MessageLength,
    ModularInteger,
    Mul,
    Not,
    OpaquePayload,
    RangeInteger,
    Refinement,
    Sort,
    Sub,
    format_expression,
    last_of,
    transform,
    type_check_expression,
    validate_graph,
    walk,
)
from . import model

logger = logging.getLogger(__name__)

KEYWORDS = frozenset(
    {"package", "is", "end", "type", "mod", "range", "with", "message",
     "then", "null", "if", "and", "or", "not", "new"}
)

TOKEN_PATTERN = re.compile(
    r"""
      (?P<newline>\n)
    | (?P<space>[ \t\r\f\v]+)
    | (?P<comment>--[^\n]*)
    | (?P<number>\d[\d_]*(?:\#[0-9A-Fa-f_]+\#)?)
    | (?P<word>[A-Za-z][A-Za-z0-9_]*)
    | (?P<symbol>=>|\*\*|/=|<=|>=|\.\.|[(),;:.'=<>+\-*/])
    """,
    re.VERBOSE,
)

EOF = "end of file"
INDENT = "   "


class Pow(BinaryExpr):
    """Constant exponentiation; only exists before elaboration."""

    symbol = "**"
    precedence = 8
    associative = False
    tight = True


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModularDecl:
    name: str
    modulus: Expr
    location: Optional[Location] = field(default=None, compare=False)


@dataclass(frozen=True)
class RangeDecl:
    name: str
    lower: Expr
    upper: Expr
    size: Expr
    location: Optional[Location] = field(default=None, compare=False)


@dataclass(frozen=True)
class EnumDecl:
    name: str
    literals: Tuple[Tuple[str, Expr], ...]
    size: Expr
    location: Optional[Location] = field(default=None, compare=False)


@dataclass(frozen=True)
class ThenClause:
    """``target`` is None for ``then null``."""

    target: Optional[str]
    length: Optional[Expr] = None
    first: Optional[Expr] = None
    condition: Optional[Expr] = None
    location: Optional[Location] = field(default=None, compare=False)


@dataclass(frozen=True)
class ComponentDecl:
    name: str
    type_name: str
    then_clauses: Tuple[ThenClause, ...] = ()
    location: Optional[Location] = field(default=None, compare=False)


@dataclass(frozen=True)
class MessageDecl:
    name: str
    components: Tuple[ComponentDecl, ...]
    location: Optional[Location] = field(default=None, compare=False)

    @property
    def is_null(self) -> bool:
        return not self.components


@dataclass(frozen=True)
class RefinementDecl:
    name: str
    outer: str
    payload_field: str
    inner: str
    condition: Optional[Expr] = None
    location: Optional[Location] = field(default=None, compare=False)


Declaration = Union[ModularDecl, RangeDecl, EnumDecl, MessageDecl, RefinementDecl]
TYPE_DECLARATIONS = (ModularDecl, RangeDecl, EnumDecl)


@dataclass(frozen=True)
class SpecFile:
    package_name: str
    type_declarations: Tuple[Declaration, ...] = ()
    location: Optional[Location] = field(default=None, compare=False)

    def declaration(self, name: str) -> Declaration:
        for declaration in self.type_declarations:
            if declaration.name.lower() == name.lower():
                return declaration
        raise UnknownNameError(f"{self.package_name} declares no type {name}")


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    location: Location
    value: int = 0

    def describe(self) -> str:
        return EOF if self.kind == EOF else f"'{self.text}'"


def tokenize(text: str) -> List[Token]:
    tokens = []
    errors = []
    line, line_start, position = 1, 0, 0
    while position < len(text):
        location = Location(line, position - line_start + 1)
        match = TOKEN_PATTERN.match(text, position)
        if match is None:
            errors.append(SpecSyntaxError(f"invalid character {text[position]!r}", location))
            position += 1
            continue
        kind = match.lastgroup
        lexeme = match.group()
        position = match.end()
        if kind == "newline":
            line += 1
            line_start = position
        elif kind == "number":
            try:
                tokens.append(Token("number", lexeme, location, _number_value(lexeme)))
            except ValueError:
                errors.append(SpecSyntaxError(f"invalid number {lexeme}", location))
        elif kind == "word":
            tokens.append(Token("keyword" if lexeme.lower() in KEYWORDS else "identifier", lexeme, location))
        elif kind == "symbol":
            tokens.append(Token("symbol", lexeme, location))
    tokens.append(Token(EOF, "", Location(line, position - line_start + 1)))
    if errors:
        raise SpecParseError(errors)
    return tokens


def _number_value(lexeme: str) -> int:
    digits = lexeme.replace("_", "")
    if "#" not in digits:
        return int(digits)
    base, value, _ = digits.split("#")
    if not 2 <= int(base) <= 16:
        raise ValueError(f"unsupported base {base}")
    return int(value, int(base))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Abort(Exception):
    def __init__(self, error: SpecSyntaxError):
        super().__init__(str(error))
        self.error = error


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.position = 0
        self.errors: List[SpecSyntaxError] = []

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.position + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.current
        if token.kind != EOF:
            self.position += 1
        return token

    @staticmethod
    def matches(token: Token, expected: str) -> bool:
        if expected in ("identifier", "number", EOF):
            return token.kind == expected
        if token.kind == "keyword":
            return token.text.lower() == expected
        return token.kind == "symbol" and token.text == expected

    def at(self, *expected: str) -> bool:
        return any(self.matches(self.current, e) for e in expected)

    def accept(self, *expected: str) -> Optional[Token]:
        return self.advance() if self.at(*expected) else None

    def expect(self, *expected: str) -> Token:
        if not self.at(*expected):
            raise self.error(expected)
        return self.advance()

    def error(self, expected: Iterable[str], message: Optional[str] = None) -> _Abort:
        token = self.current
        return _Abort(
            SpecSyntaxError(message or f"unexpected {token.describe()}", token.location, frozenset(expected))
        )

    def recover(self) -> None:
        self.advance()
        while not self.at(EOF, "type"):
            if self.at("end") and self.peek().kind == "identifier":
                return
            self.advance()

    # spec file

    def spec_file(self) -> SpecFile:
        try:
            start = self.expect("package")
            name = self.expect("identifier").text
            self.expect("is")
        except _Abort as e:
            raise SpecParseError([e.error])
        declarations = []
        while not self.at("end", EOF):
            try:
                declarations.append(self.declaration())
            except _Abort as e:
                self.errors.append(e.error)
                self.recover()
        try:
            self.expect("end")
            end_name = self.expect("identifier")
            if end_name.text.lower() != name.lower():
                self.position -= 1
                raise self.error({name}, f"end of package {name} names {end_name.text}")
            self.expect(";")
            self.expect(EOF)
        except _Abort as e:
            self.errors.append(e.error)
        if self.errors:
            raise SpecParseError(self.errors)
        return SpecFile(name, tuple(declarations), start.location)

    def declaration(self) -> Declaration:
        start = self.expect("type")
        name = self.expect("identifier").text
        self.expect("is")
        if self.accept("mod"):
            modulus = self.arithmetic()
            self.expect(";")
            return ModularDecl(name, modulus, start.location)
        if self.accept("range"):
            lower = self.arithmetic()
            self.expect("..")
            upper = self.arithmetic()
            size = self.size_aspect()
            self.expect(";")
            return RangeDecl(name, lower, upper, size, start.location)
        if self.at("("):
            literals = self.enumeration_literals()
            size = self.size_aspect()
            self.expect(";")
            return EnumDecl(name, literals, size, start.location)
        if self.accept("message"):
            components = []
            while not self.at("end"):
                components.append(self.component())
            self.expect("end")
            self.expect("message")
            self.expect(";")
            return MessageDecl(name, tuple(components), start.location)
        if self.accept("null"):
            self.expect("message")
            self.expect(";")
            return MessageDecl(name, (), start.location)
        if self.accept("new"):
            return self.refinement(name, start.location)
        raise self.error({"mod", "range", "(", "message", "null", "new"})

    def size_aspect(self) -> Expr:
        self.expect("with")
        if not (self.at("identifier") and self.current.text.lower() == "size"):
            raise self.error({"Size"})
        self.advance()
        self.expect("=>", "=")
        return self.arithmetic()

    def enumeration_literals(self) -> Tuple[Tuple[str, Expr], ...]:
        self.expect("(")
        literals = []
        while True:
            literal = self.expect("identifier").text
            value = self.arithmetic() if self.accept("=>") else Const(len(literals))
            literals.append((literal, value))
            if not self.accept(","):
                break
        self.expect(")")
        return tuple(literals)

    def component(self) -> ComponentDecl:
        name = self.expect("identifier")
        self.expect(":")
        type_name = self.expect("identifier").text
        clauses = []
        if self.at("then"):
            clauses.append(self.then_clause())
            while self.accept(","):
                clauses.append(self.then_clause())
        self.expect(";")
        return ComponentDecl(name.text, type_name, tuple(clauses), name.location)

    def then_clause(self) -> ThenClause:
        start = self.expect("then")
        target = None if self.accept("null") else self.expect("identifier").text
        aspects: Dict[str, Expr] = {}
        if self.accept("with"):
            while True:
                if not (self.at("identifier") and self.current.text.lower() in ("first", "length")):
                    raise self.error({"First", "Length"})
                aspect = self.current.text.lower()
                if aspect in aspects:
                    raise self.error({"First", "Length"} - set(aspects), f"duplicate aspect {self.current.text}")
                self.advance()
                self.expect("=>", "=")
                aspects[aspect] = self.arithmetic()
                if not (self.at(",") and self.peek().kind == "identifier"):
                    break
                self.advance()
        condition = self.expression() if self.accept("if") else None
        return ThenClause(target, aspects.get("length"), aspects.get("first"), condition, start.location)

    def refinement(self, name: str, location: Location) -> RefinementDecl:
        outer = self.qualified_name()
        self.expect("(")
        refined = self.expect("identifier").text
        self.expect("=>")
        inner = self.qualified_name()
        self.expect(")")
        condition = self.expression() if self.accept("if") else None
        self.expect(";")
        return RefinementDecl(name, outer, refined, inner, condition, location)

    def qualified_name(self) -> str:
        parts = [self.expect("identifier").text]
        while self.accept("."):
            parts.append(self.expect("identifier").text)
        return ".".join(parts)

    # expressions

    def expression(self) -> Expr:
        result = self.conjunction()
        while self.accept("or"):
            result = model.Or(result, self.conjunction())
        return result

    def conjunction(self) -> Expr:
        result = self.relation()
        while self.accept("and"):
            result = model.And(result, self.relation())
        return result

    def relation(self) -> Expr:
        lhs = self.arithmetic()
        for symbol, constructor in RELATION_SYMBOLS.items():
            if self.accept(symbol):
                return constructor(lhs, self.arithmetic())
        return lhs

    def arithmetic(self) -> Expr:
        result = self.term()
        while self.at("+", "-"):
            constructor = Add if self.advance().text == "+" else Sub
            result = constructor(result, self.term())
        return result

    def term(self) -> Expr:
        result = self.factor()
        while self.at("*", "/"):
            constructor = Mul if self.advance().text == "*" else Div
            result = constructor(result, self.factor())
        return result

    def factor(self) -> Expr:
        if self.accept("not"):
            return Not(self.factor())
        base = self.primary()
        if self.accept("**"):
            return Pow(base, self.primary())
        return base

    def primary(self) -> Expr:
        token = self.current
        if self.accept("number"):
            return Const(token.value)
        if self.accept("("):
            inner = self.expression()
            self.expect(")")
            return inner
        if self.accept("message"):
            self.expect("'")
            attribute = self.expect("identifier").text.lower()
            if attribute == "last":
                return MessageLast()
            if attribute == "length":
                return MessageLength()
            self.position -= 1
            raise self.error({"Last", "Length"})
        if self.accept("identifier"):
            if not self.accept("'"):
                if token.text.lower() == "true":
                    return TRUE
                if token.text.lower() == "false":
                    return FALSE
                return FieldValue(FieldId(token.text))
            attribute = self.expect("identifier").text.lower()
            subject = FieldId(token.text)
            if attribute == "first":
                return FieldFirst(subject)
            if attribute == "length":
                return FieldLength(subject)
            if attribute == "last":
                return last_of(subject)
            self.position -= 1
            raise self.error({"First", "Last", "Length"})
        raise self.error({"number", "identifier", "(", "not", "Message"})


RELATION_SYMBOLS = {
    "=": model.Eq,
    "/=": model.Ne,
    "<=": model.Le,
    ">=": model.Ge,
    "<": model.Lt,
    ">": model.Gt,
}


def parse_spec(text: str) -> SpecFile:
    """Parse one package; raise SpecParseError listing every syntax issue found."""
    return _Parser(tokenize(text)).spec_file()


def parse_expression(text: str) -> Expr:
    """Parse a standalone expression (names are left unresolved)."""
    parser = _Parser(tokenize(text))
    try:
        result = parser.expression()
        parser.expect(EOF)
    except _Abort as e:
        raise SpecParseError([e.error])
    return result


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------

def pretty_print(spec: SpecFile) -> str:
    """Render ``spec`` in canonical form; ``parse_spec`` reads it back unchanged."""
    lines = [f"package {spec.package_name} is", ""]
    for declaration in spec.type_declarations:
        lines.extend(INDENT + line if line else line for line in _declaration_lines(declaration))
    if spec.type_declarations:
        lines.append("")
    lines.append(f"end {spec.package_name};")
    return "\n".join(lines) + "\n"


def _declaration_lines(declaration: Declaration) -> List[str]:
    head = f"type {declaration.name} is"
    if isinstance(declaration, ModularDecl):
        return [f"{head} mod {format_expression(declaration.modulus)};"]
    if isinstance(declaration, RangeDecl):
        return [
            f"{head} range {format_expression(declaration.lower)} .. {format_expression(declaration.upper)}"
            f" with Size => {format_expression(declaration.size)};"
        ]
    if isinstance(declaration, EnumDecl):
        literals = ", ".join(f"{name} => {format_expression(value)}" for name, value in declaration.literals)
        return [f"{head} ({literals}) with Size => {format_expression(declaration.size)};"]
    if isinstance(declaration, RefinementDecl):
        line = f"{head} new {declaration.outer} ({declaration.payload_field} => {declaration.inner})"
        if declaration.condition is None:
            return [line + ";"]
        return [line, f"{INDENT}if {format_expression(declaration.condition)};"]
    if declaration.is_null:
        return [f"{head} null message;"]
    lines = [head, f"{INDENT}message"]
    for component in declaration.components:
        lines.append(f"{INDENT * 2}{component.name} : {component.type_name}")
        for index, clause in enumerate(component.then_clauses):
            lines.extend(f"{INDENT * 3}{line}" for line in _clause_lines(clause))
            if index < len(component.then_clauses) - 1:
                lines[-1] += ","
        lines[-1] += ";"
    lines.append(f"{INDENT}end message;")
    return lines


def _clause_lines(clause: ThenClause) -> List[str]:
    lines = [f"then {clause.target or 'null'}"]
    aspects = []
    if clause.first is not None:
        aspects.append(f"First => {format_expression(clause.first)}")
    if clause.length is not None:
        aspects.append(f"Length => {format_expression(clause.length)}")
    if aspects:
        lines.append(f"{INDENT}with {', '.join(aspects)}")
    if clause.condition is not None:
        lines.append(f"{INDENT}if {format_expression(clause.condition)}")
    return lines


# ---------------------------------------------------------------------------
# Elaboration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Elaboration:
    messages: Tuple[MessageGraph, ...] = ()
    refinements: Tuple[Refinement, ...] = ()

    def message(self, name: str) -> MessageGraph:
        """Look up a message by qualified or unqualified name, ignoring case."""
        matches = [
            m for m in self.messages
            if m.message_name.lower() == name.lower()
            or m.message_name.lower().split(".")[-1] == name.lower()
        ]
        if len(matches) != 1:
            raise UnknownNameError(f"unknown message {name}" if not matches else f"ambiguous message {name}")
        return matches[0]


@dataclass
class _Package:
    spec: SpecFile
    types: Dict[str, FieldType] = field(default_factory=dict)
    literals: Dict[str, int] = field(default_factory=dict)
    messages: List[MessageGraph] = field(default_factory=list)


def elaborate(spec: SpecFile, context: Sequence[MessageGraph] = ()) -> Elaboration:
    """
    Build the message graphs and refinements of one package.

    Refinements may name messages of other packages if they are passed in
    ``context``. Raises SpecElaborationError with every issue found.
    """
    return _elaborate([spec], context)


def elaborate_all(specs: Sequence[SpecFile]) -> Elaboration:
    """Elaborate several packages together so refinements can cross packages."""
    return _elaborate(specs, ())


def _elaborate(specs: Sequence[SpecFile], context: Sequence[MessageGraph]) -> Elaboration:
    errors: List[ElaborationError] = []
    packages = []
    seen = set()
    for spec in specs:
        local: List[ElaborationError] = []
        if spec.package_name.lower() in seen:
            local.append(ElaborationError(f"duplicate package {spec.package_name}", spec.location))
        else:
            seen.add(spec.package_name.lower())
            package = _Package(spec)
            _elaborate_types(package, local)
            _elaborate_messages(package, local)
            packages.append(package)
        errors.extend(replace(e, package=spec.package_name) for e in local)

    known = {m.message_name.lower(): m for m in context}
    known.update((m.message_name.lower(), m) for p in packages for m in p.messages)
    refinements = []
    for package in packages:
        for declaration in package.spec.type_declarations:
            if isinstance(declaration, RefinementDecl):
                try:
                    refinements.append(elaborate_refinement(declaration, known, package.spec.package_name))
                except SpecElaborationError as e:
                    errors.extend(replace(error, package=package.spec.package_name) for error in e.errors)
    if errors:
        raise SpecElaborationError(errors)
    messages = tuple(m for p in packages for m in p.messages)
    logger.debug("elaborated %d messages and %d refinements", len(messages), len(refinements))
    return Elaboration(messages, tuple(refinements))


def _elaborate_types(package: _Package, errors: List[ElaborationError]) -> None:
    package.types["payload"] = OpaquePayload()
    names = set()
    for declaration in package.spec.type_declarations:
        key = declaration.name.lower()
        if key in names or key == "payload":
            errors.append(ElaborationError(f"duplicate declaration of {declaration.name}", declaration.location))
            continue
        names.add(key)
        if not isinstance(declaration, TYPE_DECLARATIONS):
            continue
        field_type = _elaborate_type(declaration, errors)
        if field_type is None:
            continue
        for problem in field_type.problems():
            errors.append(ElaborationError(problem, declaration.location))
        package.types[key] = field_type
        if isinstance(field_type, Enumeration):
            for literal, value in field_type.literals:
                if literal.lower() in package.literals:
                    errors.append(ElaborationError(f"ambiguous enumeration literal {literal}", declaration.location))
                package.literals[literal.lower()] = value


def _elaborate_type(declaration: Declaration, errors: List[ElaborationError]) -> Optional[FieldType]:
    location = declaration.location
    if isinstance(declaration, ModularDecl):
        modulus = _static_value(declaration.modulus, location, errors)
        return None if modulus is None else ModularInteger(modulus, declaration.name)
    if isinstance(declaration, RangeDecl):
        bounds = [_static_value(e, location, errors) for e in (declaration.lower, declaration.upper, declaration.size)]
        return None if None in bounds else RangeInteger(*bounds, declaration.name)
    size = _static_value(declaration.size, location, errors)
    values = [_static_value(v, location, errors) for _, v in declaration.literals]
    if size is None or None in values:
        return None
    literals = tuple((name, value) for (name, _), value in zip(declaration.literals, values))
    return Enumeration(literals, size, declaration.name)


def _static_value(expr: Expr, location: Optional[Location], errors: List[ElaborationError]) -> Optional[int]:
    """Evaluate a constant expression of a type declaration."""
    try:
        return _static(expr)
    except ValueError as e:
        errors.append(ElaborationError(str(e), location))
        return None


def _static(expr: Expr) -> int:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, (Add, Sub, Mul, Div, Pow)):
        lhs, rhs = _static(expr.lhs), _static(expr.rhs)
        if isinstance(expr, Add):
            return lhs + rhs
        if isinstance(expr, Mul):
            return lhs * rhs
        if isinstance(expr, Sub):
            if lhs < rhs:
                raise ValueError(f"negative value in {format_expression(expr)}")
            return lhs - rhs
        if isinstance(expr, Div):
            if rhs == 0:
                raise ValueError(f"division by zero in {format_expression(expr)}")
            return lhs // rhs
        if rhs > 4096:
            raise ValueError(f"exponent too large in {format_expression(expr)}")
        return lhs**rhs
    raise ValueError(f"static expression expected, found {format_expression(expr)}")


def _resolve(
    expr: Expr,
    fields: Mapping[str, FieldId],
    literals: Mapping[str, int],
    location: Optional[Location],
    errors: List[ElaborationError],
) -> Expr:
    """Bind names to fields or enumeration literals and fold exponentiation."""

    def visit(node: Expr) -> Expr:
        if isinstance(node, Pow):
            try:
                return Const(_static(node))
            except ValueError as e:
                errors.append(ElaborationError(str(e), location))
                return node
        if isinstance(node, (FieldValue, FieldFirst, FieldLength)):
            key = node.field.name.lower()
            if key in fields:
                return type(node)(fields[key])
            if isinstance(node, FieldValue) and key in literals:
                return Const(literals[key])
            errors.append(ElaborationError(f"unknown field {node.field.name}", location))
        return node

    return transform(expr, visit)


def _elaborate_messages(package: _Package, errors: List[ElaborationError]) -> None:
    for declaration in package.spec.type_declarations:
        if isinstance(declaration, MessageDecl):
            graph = _elaborate_message(package, declaration, errors)
            if graph is not None:
                package.messages.append(graph)


def _elaborate_message(
    package: _Package, declaration: MessageDecl, errors: List[ElaborationError]
) -> Optional[MessageGraph]:
    name = f"{package.spec.package_name}.{declaration.name}"
    if declaration.is_null:
        return MessageGraph(name, {}, [Edge(INITIAL, FINAL, TRUE, Const(0), Const(0))])

    local: List[ElaborationError] = []
    fields: Dict[str, FieldId] = {}
    field_types: Dict[FieldId, FieldType] = {}
    locations: Dict[FieldId, Optional[Location]] = {}
    for component in declaration.components:
        key = component.name.lower()
        field_type = package.types.get(component.type_name.lower())
        if key in fields:
            local.append(ElaborationError(f"duplicate component {component.name}", component.location))
        elif field_type is None:
            local.append(ElaborationError(f"unknown type {component.type_name}", component.location))
        else:
            fields[key] = FieldId(component.name)
            field_types[fields[key]] = field_type
            locations[fields[key]] = component.location
    if local:
        errors.extend(local)
        return None

    def resolve(expr: Expr, location: Optional[Location]) -> Expr:
        return _resolve(expr, fields, package.literals, location, local)

    def edge(source: FieldId, target: FieldId, clause: Optional[ThenClause], location: Optional[Location]) -> Edge:
        first = Add(FieldFirst(source), FieldLength(source)) if source != INITIAL else Const(0)
        condition = TRUE
        if target == FINAL:
            length = Const(0)
            if clause is not None and (clause.first is not None or clause.length is not None):
                local.append(ElaborationError(f"then null of {source} allows a condition only", location))
        elif clause is not None and clause.length is not None:
            length = resolve(clause.length, location)
            if field_types[target].size is not None:
                local.append(ElaborationError(f"length aspect on scalar field {target}", location))
        elif field_types[target].size is None:
            length = Const(0)
            local.append(ElaborationError(f"opaque field {target} requires a length aspect", location))
        else:
            length = Const(field_types[target].size)
        if clause is not None and clause.first is not None and target != FINAL:
            first = resolve(clause.first, location)
        if clause is not None and clause.condition is not None:
            condition = resolve(clause.condition, location)
        return Edge(source, target, condition, length, first)

    components = declaration.components
    edges = [edge(INITIAL, fields[components[0].name.lower()], None, components[0].location)]
    edge_locations = [components[0].location]
    for index, component in enumerate(components):
        source = fields[component.name.lower()]
        if not component.then_clauses:
            following = fields[components[index + 1].name.lower()] if index + 1 < len(components) else FINAL
            edges.append(edge(source, following, None, component.location))
            edge_locations.append(component.location)
        for clause in component.then_clauses:
            if clause.target is None:
                target = FINAL
            elif clause.target.lower() in fields:
                target = fields[clause.target.lower()]
            else:
                local.append(ElaborationError(f"unknown field {clause.target}", clause.location))
                continue
            edges.append(edge(source, target, clause, clause.location))
            edge_locations.append(clause.location)
    if local:
        errors.extend(local)
        return None

    graph = MessageGraph(name, field_types, edges)
    for problem in validate_graph(graph):
        if problem.kind is ErrorKind.INVALID_TYPE:
            continue
        if problem.edge is not None:
            location = edge_locations[problem.edge]
        else:
            location = locations.get(problem.field, declaration.location)
        errors.append(ElaborationError(f"{name}: {problem}", location))
    return graph


def _qualified(name: str, package: str) -> str:
    return (name if "." in name else f"{package}.{name}").lower()


def elaborate_refinement(
    decl: RefinementDecl, context: Mapping[str, MessageGraph], package: str = ""
) -> Refinement:
    """
    Resolve a refinement against already elaborated messages.

    ``context`` maps lower-case qualified message names to graphs;
    unqualified names in ``decl`` refer to ``package``.
    """
    errors = []
    outer = context.get(_qualified(decl.outer, package))
    inner = context.get(_qualified(decl.inner, package))
    if outer is None:
        errors.append(ElaborationError(f"unknown message {decl.outer}", decl.location))
    if inner is None:
        errors.append(ElaborationError(f"unknown message {decl.inner}", decl.location))
    if errors:
        raise SpecElaborationError(errors)

    payload = outer.field(decl.payload_field)
    if payload is None:
        raise SpecElaborationError(
            [ElaborationError(f"{outer.message_name} has no field {decl.payload_field}", decl.location)]
        )
    if outer.fields[payload].size is not None:
        raise SpecElaborationError(
            [ElaborationError(f"field {payload} of {outer.message_name} is not an opaque field", decl.location)]
        )

    condition = TRUE
    if decl.condition is not None:
        fields = {f.name.lower(): f for f in outer.fields}
        literals = {
            literal.lower(): value
            for field_type in outer.fields.values()
            if isinstance(field_type, Enumeration)
            for literal, value in field_type.literals
        }
        condition = _resolve(decl.condition, fields, literals, decl.location, errors)
        if not errors:
            errors.extend(_refinement_condition_errors(outer, condition, decl.location))
        if errors:
            raise SpecElaborationError(errors)
    return Refinement(outer.message_name, payload, inner.message_name, condition, decl.name)


def _refinement_condition_errors(
    outer: MessageGraph, condition: Expr, location: Optional[Location]
) -> List[ElaborationError]:
    for node in walk(condition):
        if isinstance(node, FieldValue) and outer.fields[node.field].size is None:
            return [ElaborationError(f"condition uses the value of opaque field {node.field}", location)]
    try:
        sort = type_check_expression(condition, set(outer.fields))
    except ExpressionTypeError as e:
        return [ElaborationError(str(e), location)]
    if sort is not Sort.BOOLEAN:
        return [ElaborationError("refinement condition must be boolean", location)]
    return []
