"""
Parser derivation.

Every path from the initial node to a field is one variant of that field.
For each variant the attributes of its last edge are closed over the path
(field references become locations and buffer reads), which yields the
variant functions; the field functions combine all variants of a field.
"""

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Tuple

import networkx as nx

from .exceptions import DerivationError, UnknownNameError
from .model import (
    FALSE,
    FINAL,
    INITIAL,
    TRUE,
    Add,
    And,
    Const,
    Div,
    Eq,
    Expr,
    FieldFirst,
    FieldId,
    FieldLength,
    FieldValue,
    Ge,
    Gt,
    Le,
    Lt,
    MessageGraph,
    MessageLength,
    Mul,
    Ne,
    Not,
    Or,
    Path,
    Read,
    Refinement,
    Sub,
    ValidCall,
    conjunction,
    referenced_fields,
    transform,
)

logger = logging.getLogger(__name__)

# Location (first, length) of every field on a path prefix.
Environment = Mapping[FieldId, Tuple[Expr, Expr]]

COMPARISONS = {
    Eq: lambda a, b: a == b,
    Ne: lambda a, b: a != b,
    Le: lambda a, b: a <= b,
    Ge: lambda a, b: a >= b,
    Lt: lambda a, b: a < b,
    Gt: lambda a, b: a > b,
}


@dataclass(frozen=True)
class PathAttributes:
    path: Path
    target: FieldId
    condition: Expr
    length: Expr
    first: Expr
    constraint: Expr = TRUE


@dataclass(frozen=True)
class VariantValidFunc:
    path: Path
    field: FieldId
    body: Expr

    @property
    def predecessor(self) -> Optional[Path]:
        return self.path[:-1] if len(self.path) > 1 else None


@dataclass(frozen=True)
class VariantAccessFunc:
    path: Path
    field: FieldId
    first: Expr
    length: Expr


@dataclass(frozen=True)
class FieldValidFunc:
    """
    Variants of a field with the conditions of their outgoing edges.

    The field is valid if some variant is valid and one of its outgoing
    conditions holds; each condition is evaluated on its own.
    """

    field: FieldId
    disjuncts: Tuple[Tuple[Path, Tuple[Expr, ...]], ...]

    @property
    def terms(self) -> Tuple[Tuple[Path, Expr], ...]:
        return tuple((path, condition) for path, conditions in self.disjuncts for condition in conditions)

    @property
    def body(self) -> Expr:
        result: Expr = FALSE
        for path, condition in reversed(self.terms):
            term = conjunction([ValidCall(path), condition])
            result = term if result == FALSE else Or(term, result)
        return result


@dataclass(frozen=True)
class AccessChoice:
    """``if Valid(path) then Access(path) else orelse``; None ends the chain."""

    path: Path
    orelse: Optional["AccessChoice"]


@dataclass(frozen=True)
class FieldAccessFunc:
    field: FieldId
    variants: Tuple[Path, ...]

    @property
    def choice(self) -> Optional[AccessChoice]:
        result = None
        for path in reversed(self.variants):
            result = AccessChoice(path, result)
        return result


@dataclass(frozen=True)
class RefinementVariant:
    """Refinement condition and payload variant along one complete path."""

    path: Path
    condition: Expr
    payload: Optional[Path]


@dataclass(frozen=True, eq=False)
class DerivedParser:
    graph: MessageGraph
    attributes: Tuple[PathAttributes, ...]
    variant_valid: Mapping[Path, VariantValidFunc]
    variant_access: Mapping[Path, VariantAccessFunc]
    field_valid: Mapping[FieldId, FieldValidFunc]
    field_access: Mapping[FieldId, FieldAccessFunc]
    final_paths: Tuple[Path, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DerivedParser):
            return NotImplemented
        return (
            self.graph == other.graph
            and self.attributes == other.attributes
            and list(self.variant_valid.items()) == list(other.variant_valid.items())
            and list(self.variant_access.items()) == list(other.variant_access.items())
            and list(self.field_valid.items()) == list(other.field_valid.items())
            and list(self.field_access.items()) == list(other.field_access.items())
            and self.final_paths == other.final_paths
        )

    __hash__ = None

    @property
    def message_name(self) -> str:
        return self.graph.message_name

    def field(self, name: str) -> FieldId:
        field = self.graph.field(name)
        if field is None:
            raise UnknownNameError(f"{self.message_name} has no field {name}")
        return field


# ---------------------------------------------------------------------------
# Paths and substitution
# ---------------------------------------------------------------------------

def _all_paths(graph: MessageGraph) -> Dict[FieldId, List[Path]]:
    paths: Dict[FieldId, List[Path]] = {node: [] for node in graph.nodes}
    paths[INITIAL] = [()]
    for node in nx.topological_sort(graph.to_networkx()):
        for index, edge in graph.outgoing(node):
            paths[edge.target].extend(p + (index,) for p in paths[node])
    for node in paths:
        paths[node].sort()
    return paths


def paths_to(graph: MessageGraph, node: FieldId) -> List[Path]:
    """All paths from the initial node to ``node`` in lexicographic order."""
    if node not in graph.nodes:
        raise UnknownNameError(f"{graph.message_name} has no field {node}")
    return list(_all_paths(graph)[node])


def simplify(expr: Expr) -> Expr:
    """
    Fold constant subexpressions.

    Connectives are only folded on a constant left operand or a neutral
    right operand, so no subexpression that would be evaluated is dropped.
    """
    return transform(expr, _fold)


def _fold(node: Expr) -> Expr:
    if isinstance(node, (Add, Sub, Mul, Div)) and isinstance(node.lhs, Const) and isinstance(node.rhs, Const):
        lhs, rhs = node.lhs.value, node.rhs.value
        if isinstance(node, Add):
            return Const(lhs + rhs)
        if isinstance(node, Mul):
            return Const(lhs * rhs)
        if isinstance(node, Sub) and lhs >= rhs:
            return Const(lhs - rhs)
        if isinstance(node, Div) and rhs != 0:
            return Const(lhs // rhs)
        return node
    if type(node) in COMPARISONS and isinstance(node.lhs, Const) and isinstance(node.rhs, Const):
        return TRUE if COMPARISONS[type(node)](node.lhs.value, node.rhs.value) else FALSE
    if isinstance(node, And):
        if node.lhs == TRUE:
            return node.rhs
        if node.lhs == FALSE:
            return FALSE
        if node.rhs == TRUE:
            return node.lhs
    if isinstance(node, Or):
        if node.lhs == TRUE:
            return TRUE
        if node.lhs == FALSE:
            return node.rhs
        if node.rhs == FALSE:
            return node.lhs
    if isinstance(node, Not) and node.operand in (TRUE, FALSE):
        return FALSE if node.operand == TRUE else TRUE
    return node


def subs(expr: Expr, environment: Environment) -> Expr:
    """Replace field references by the locations recorded in ``environment``."""

    def visit(node: Expr) -> Expr:
        if isinstance(node, (FieldValue, FieldFirst, FieldLength)):
            if node.field not in environment:
                raise DerivationError(f"{node.field} is not located on this path")
            first, length = environment[node.field]
            if isinstance(node, FieldFirst):
                return first
            if isinstance(node, FieldLength):
                return length
            return Read(first, length)
        return node

    return simplify(transform(expr, visit))


def _environments(graph: MessageGraph) -> Dict[Path, Environment]:
    """Field locations after every path prefix, keyed by path."""
    environments: Dict[Path, Environment] = {(): MappingProxyType({})}
    paths = sorted(p for node_paths in _all_paths(graph).values() for p in node_paths if p)
    for path in paths:
        parent = environments[path[:-1]]
        edge = graph.edges[path[-1]]
        environment = dict(parent)
        if edge.target != FINAL:
            environment[edge.target] = (subs(edge.first, parent), subs(edge.length, parent))
        environments[path] = MappingProxyType(environment)
    return environments


def _attributes(graph: MessageGraph, path: Path, parent: Environment) -> PathAttributes:
    edge = graph.edges[path[-1]]
    first = subs(edge.first, parent)
    length = subs(edge.length, parent)
    constraint = TRUE
    if edge.target != FINAL:
        constraint = simplify(graph.fields[edge.target].constraint(Read(first, length)))
    return PathAttributes(path, edge.target, subs(edge.condition, parent), length, first, constraint)


def path_attrs(graph: MessageGraph) -> List[PathAttributes]:
    """Closed attributes of every nonempty path from the initial node, ordered by path."""
    environments = _environments(graph)
    return [_attributes(graph, path, environments[path[:-1]]) for path in sorted(environments) if path]


# ---------------------------------------------------------------------------
# Variant and field functions
# ---------------------------------------------------------------------------

def in_bounds(first: Expr, length: Expr) -> Expr:
    return simplify(Le(Add(first, length), MessageLength()))


def variant_functions(
    attrs: List[PathAttributes],
) -> Tuple[Dict[Path, VariantValidFunc], Dict[Path, VariantAccessFunc]]:
    valid = {}
    access = {}
    for a in attrs:
        conjuncts = [in_bounds(a.first, a.length), a.condition, a.constraint]
        if len(a.path) > 1:
            conjuncts.append(ValidCall(a.path[:-1]))
        valid[a.path] = VariantValidFunc(a.path, a.target, conjunction(conjuncts))
        access[a.path] = VariantAccessFunc(a.path, a.target, a.first, a.length)
    return valid, access


def node_paths(graph: MessageGraph) -> Dict[FieldId, List[Tuple[Path, Tuple[Expr, ...]]]]:
    """For each field, its variants with the closed condition of every outgoing edge, in edge order."""
    environments = _environments(graph)
    all_paths = _all_paths(graph)
    result = {}
    for field in graph.fields:
        result[field] = [
            (path, tuple(subs(edge.condition, environments[path]) for _, edge in graph.outgoing(field)))
            for path in all_paths[field]
        ]
    return result


def field_functions(
    node_paths_result: Mapping[FieldId, List[Tuple[Path, Tuple[Expr, ...]]]],
    variant_funcs: Tuple[Mapping[Path, VariantValidFunc], Mapping[Path, VariantAccessFunc]],
) -> Tuple[Dict[FieldId, FieldValidFunc], Dict[FieldId, FieldAccessFunc]]:
    variant_valid, _ = variant_funcs
    valid = {}
    access = {}
    for field, entries in node_paths_result.items():
        for path, _ in entries:
            if path not in variant_valid or variant_valid[path].field != field:
                raise DerivationError(f"no variant {list(path)} for {field}")
        valid[field] = FieldValidFunc(field, tuple(entries))
        access[field] = FieldAccessFunc(field, tuple(path for path, _ in entries))
    return valid, access


def derive_parser(graph: MessageGraph) -> DerivedParser:
    attrs = path_attrs(graph)
    variant_valid, variant_access = variant_functions(attrs)
    field_valid, field_access = field_functions(node_paths(graph), (variant_valid, variant_access))
    final_paths = tuple(a.path for a in attrs if a.target == FINAL)
    logger.debug(
        "derived %s: %d variants, %d fields, %d complete paths",
        graph.message_name,
        len(variant_valid),
        len(field_valid),
        len(final_paths),
    )
    return DerivedParser(
        graph,
        tuple(attrs),
        MappingProxyType(variant_valid),
        MappingProxyType(variant_access),
        MappingProxyType(field_valid),
        MappingProxyType(field_access),
        final_paths,
    )


def refinement_variants(parser: DerivedParser, refinement: Refinement) -> Tuple[RefinementVariant, ...]:
    """
    Close a refinement over every complete path of its outer message.

    The condition is false on paths that lack a field it refers to, and
    ``payload`` is None on paths that do not contain the refined field.
    """
    if refinement.outer_message.lower() != parser.message_name.lower():
        raise DerivationError(f"{refinement.name or 'refinement'} does not refine {parser.message_name}")
    environments = _environments(parser.graph)
    variants = []
    for path in parser.final_paths:
        environment = environments[path]
        if referenced_fields(refinement.condition) <= set(environment):
            condition = subs(refinement.condition, environment)
        else:
            condition = FALSE
        payload = None
        for position, index in enumerate(path):
            if parser.graph.edges[index].target == refinement.payload_field:
                payload = path[: position + 1]
        variants.append(RefinementVariant(path, condition, payload))
    return tuple(variants)
