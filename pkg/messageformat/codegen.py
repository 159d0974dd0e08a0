"""
Code generation.

Each derived parser becomes one module of plain functions: a validity and an
access helper per variant, ``valid_<field>`` / ``get_<field>`` per field,
``is_valid``, ``label``, ``is_contained`` and a ``contains_<refinement>``
per refinement of the message. The fixed support module is emitted next to
the generated modules.
"""

import abc
import keyword
import logging
import re
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Sequence

from .derive import DerivedParser, refinement_variants
from .exceptions import DerivationError
from .model import (
    FALSE,
    TRUE,
    Add,
    And,
    Const,
    Div,
    Enumeration,
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

SUPPORT_SOURCE = "flux_support.py"

# Module-level names of every generated module.
MODULE_NAMES = frozenset({"enum", "MESSAGE", "label", "is_contained", "is_valid"})


@dataclass(frozen=True)
class CodegenOptions:
    support_module: str = "flux_support"
    debug_assertions: bool = True
    emitter: str = "python"


def module_name(message_name: str) -> str:
    """``TLS_Heartbeat.Heartbeat_Message`` -> ``tls_heartbeat_heartbeat_message``."""
    return re.sub(r"\W", "_", message_name.replace(".", "_")).lower()


def suffix(path: Path) -> str:
    return "_".join(str(index) for index in path)


def python_name(name: str) -> str:
    """``name`` as a Python identifier that shadows nothing in a generated module."""
    if keyword.iskeyword(name) or name in MODULE_NAMES:
        return name + "_"
    return name


class Emitter(abc.ABC):
    """One target language of the generator."""

    extension = ""

    def __init__(self, options: CodegenOptions):
        self.options = options

    @abc.abstractmethod
    def support_file(self) -> str:
        """Text of the fixed runtime-support file."""

    @abc.abstractmethod
    def package_file(self, modules: Sequence[str]) -> str:
        """Text of the file tying the generated modules together."""

    @abc.abstractmethod
    def message_module(self, parser: DerivedParser, refinements: Sequence[Refinement]) -> str:
        """Text of the module implementing one message."""


PY_BINARY = {Add: "+", Mul: "*", Eq: "==", Ne: "!=", Le: "<=", Ge: ">=", Lt: "<", Gt: ">", And: "and", Or: "or"}
PY_CHECKED = {Sub: "sub", Div: "div"}


class PythonEmitter(Emitter):
    extension = ".py"

    def support_file(self) -> str:
        return resources.files(__package__).joinpath(SUPPORT_SOURCE).read_text(encoding="utf-8")

    def package_file(self, modules: Sequence[str]) -> str:
        lines = ['"""', "Generated message parsers; do not edit.", '"""', ""]
        lines.extend(f"from . import {module}" for module in modules)
        lines.extend(["", f"__all__ = {list(modules)!r}"])
        return "\n".join(lines) + "\n"

    def expression(self, expr: Expr) -> str:
        kind = type(expr)
        if kind is Const:
            return str(expr.value)
        if kind is TrueLit:
            return "True"
        if kind is FalseLit:
            return "False"
        if kind is MessageLength:
            return "_rt.length(buffer)"
        if kind is MessageLast:
            return "_rt.last(buffer)"
        if kind is Read:
            return f"_rt.read(buffer, {self.expression(expr.first)}, {self.expression(expr.length)})"
        if kind is ValidCall:
            return f"_valid_{suffix(expr.path)}(buffer)"
        if kind is Not:
            return f"(not {self.expression(expr.operand)})"
        if kind in PY_CHECKED:
            return f"_rt.{PY_CHECKED[kind]}({self.expression(expr.lhs)}, {self.expression(expr.rhs)})"
        if kind in PY_BINARY:
            return f"({self.expression(expr.lhs)} {PY_BINARY[kind]} {self.expression(expr.rhs)})"
        raise DerivationError(f"cannot emit {expr}")

    @staticmethod
    def function(name: str, body: List[str], doc: str = "") -> List[str]:
        lines = ["", "", f"def {name}(buffer):"]
        if doc:
            lines.append(f'    """{doc}"""')
        lines.extend(f"    {line}" if line else "" for line in body)
        return lines

    def guarded(self, name: str, expr: Expr) -> List[str]:
        """A boolean helper that is False whenever evaluation fails."""
        if expr in (TRUE, FALSE):
            return self.function(name, [f"return {self.expression(expr)}"])
        return self.function(
            name,
            [
                "try:",
                f"    return bool({self.expression(expr)})",
                "except _rt.Invalid:",
                "    return False",
            ],
        )

    def message_module(self, parser: DerivedParser, refinements: Sequence[Refinement]) -> str:
        graph = parser.graph
        enumerations = self.enumerations(parser)
        lines = [
            '"""',
            f"Parser for {parser.message_name}.",
            "",
            "Generated from the message specification; do not edit.",
            '"""',
            "",
        ]
        if enumerations:
            lines.extend(["import enum", ""])
        lines.extend([f"from . import {self.options.support_module} as _rt", "", "", f"MESSAGE = {parser.message_name!r}"])

        for type_name, field_type in enumerations.items():
            lines.extend(["", "", f"class {type_name}(enum.IntEnum):"])
            lines.extend(f"    {python_name(literal)} = {value}" for literal, value in field_type.literals)

        label_body = ["_rt.label(buffer, MESSAGE)"]
        if self.options.debug_assertions:
            label_body.append("assert is_contained(buffer)")
        label_body.append("return buffer")
        lines.extend(self.function("label", label_body, "Claim that buffer holds a " + parser.message_name + "."))
        lines.extend(self.function("is_contained", ["return _rt.is_contained(buffer, MESSAGE)"]))

        for path, variant in parser.variant_valid.items():
            lines.extend(self.guarded(f"_valid_{suffix(path)}", variant.body))
            access = parser.variant_access[path]
            lines.extend(
                self.function(
                    f"_access_{suffix(path)}",
                    [f"return {self.expression(access.first)}, {self.expression(access.length)}"],
                )
            )
        for field, valid in parser.field_valid.items():
            for path, conditions in valid.disjuncts:
                for position, condition in enumerate(conditions):
                    if condition != TRUE:
                        lines.extend(self.guarded(self.outgoing(path, position), condition))

        for field in graph.fields:
            lines.extend(self.field_validity(parser, field))
            lines.extend(self.field_getter(parser, field, enumerations))

        calls = ", ".join(f"_valid_{suffix(path)}(buffer)" for path in parser.final_paths)
        lines.extend(
            self.function(
                "is_valid",
                [
                    '_rt.require(is_contained(buffer), "buffer is not labeled " + MESSAGE)',
                    f"return [{calls}].count(True) == 1",
                ],
                "True iff exactly one complete path through the message is valid.",
            )
        )
        for refinement in refinements:
            lines.extend(self.contains(parser, refinement))
        return "\n".join(lines) + "\n"

    @staticmethod
    def enumerations(parser: DerivedParser) -> Dict[str, Enumeration]:
        result = {}
        for field, field_type in parser.graph.fields.items():
            if isinstance(field_type, Enumeration):
                result.setdefault(python_name(field_type.name or f"{field}_Type"), field_type)
        return result

    @staticmethod
    def outgoing(path: Path, position: int) -> str:
        """Helper for the condition of the ``position``-th edge leaving the variant ``path``."""
        return f"_outgoing_{suffix(path)}_edge_{position}"

    def field_validity(self, parser: DerivedParser, field: FieldId) -> List[str]:
        terms = []
        for path, conditions in parser.field_valid[field].disjuncts:
            call = f"_valid_{suffix(path)}(buffer)"
            for position, condition in enumerate(conditions):
                terms.append(call if condition == TRUE else f"({call} and {self.outgoing(path, position)}(buffer))")
        body = ['_rt.require(is_contained(buffer), "buffer is not labeled " + MESSAGE)']
        if len(terms) == 1:
            body.append(f"return {terms[0]}")
        else:
            body.append("return (")
            body.append(f"    {terms[0]}")
            body.extend(f"    or {term}" for term in terms[1:])
            body.append(")")
        return self.function(f"valid_{field.name.lower()}", body)

    def field_getter(self, parser: DerivedParser, field: FieldId, enumerations: Dict[str, Enumeration]) -> List[str]:
        field_type = parser.graph.fields[field]
        body = [f'_rt.require(valid_{field.name.lower()}(buffer), "{field} is not valid")']
        for position, path in enumerate(parser.field_access[field].variants):
            keyword = "if" if position == 0 else "elif"
            body.extend([f"{keyword} _valid_{suffix(path)}(buffer):", f"    first, length = _access_{suffix(path)}(buffer)"])
        body.extend(["else:", f'    raise _rt.ContractViolation("{field} has no valid variant")'])
        if self.options.debug_assertions:
            body.append("assert 0 <= first and first + length <= _rt.length(buffer)")
        if field_type.size is None:
            body.append("return first, first + length - 1")
            doc = f"First and last bit of {field}."
        elif isinstance(field_type, Enumeration):
            enum_name = next(name for name, t in enumerations.items() if t == field_type)
            body.append(f"return {enum_name}(_rt.read(buffer, first, length))")
            doc = ""
        else:
            body.append("return _rt.read(buffer, first, length)")
            doc = ""
        return self.function(f"get_{field.name.lower()}", body, doc)

    def contains(self, parser: DerivedParser, refinement: Refinement) -> List[str]:
        name = (refinement.name or module_name(refinement.inner_message)).lower()
        helpers: List[str] = []
        body = [
            '_rt.require(is_contained(buffer) and is_valid(buffer), "buffer is not a valid " + MESSAGE)',
        ]
        for variant in refinement_variants(parser, refinement):
            if variant.payload is None or variant.condition == FALSE:
                continue
            test = f"_valid_{suffix(variant.path)}(buffer)"
            if variant.condition != TRUE:
                helper = f"_refines_{name}_{suffix(variant.path)}"
                helpers.extend(self.guarded(helper, variant.condition))
                test += f" and {helper}(buffer)"
            body.extend(
                [
                    f"if {test}:",
                    f"    first, length = _access_{suffix(variant.payload)}(buffer)",
                    f"    return _rt.subbuffer(buffer, first, length, {refinement.inner_message!r})",
                ]
            )
        body.append("return None")
        doc = f"{refinement.payload_field} as a {refinement.inner_message} buffer, or None."
        return helpers + self.function(f"contains_{name}", body, doc)


EMITTERS = {"python": PythonEmitter}


def _emitter(options: CodegenOptions) -> Emitter:
    try:
        return EMITTERS[options.emitter](options)
    except KeyError:
        raise DerivationError(f"unknown emitter {options.emitter}") from None


def _refinements_of(parser: DerivedParser, refinements: Sequence[Refinement]) -> List[Refinement]:
    return [r for r in refinements if r.outer_message.lower() == parser.message_name.lower()]


def generate(
    parser: DerivedParser, refinements: Sequence[Refinement], options: CodegenOptions = CodegenOptions()
) -> Dict[str, str]:
    """Files (relative path -> text) of a package holding the parser of one message."""
    return generate_all([parser], refinements, options)


def generate_all(
    parsers: Sequence[DerivedParser], refinements: Sequence[Refinement], options: CodegenOptions = CodegenOptions()
) -> Dict[str, str]:
    emitter = _emitter(options)
    modules = [module_name(p.message_name) for p in parsers]
    files = {
        "__init__" + emitter.extension: emitter.package_file(modules),
        options.support_module + emitter.extension: emitter.support_file(),
    }
    for parser, module in zip(parsers, modules):
        files[module + emitter.extension] = emitter.message_module(parser, _refinements_of(parser, refinements))
    logger.debug("generated %d files for %d messages", len(files), len(parsers))
    return files
