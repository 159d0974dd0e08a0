"""
Output formatters: DOT graphs, diagnostics and field reports.
"""

from typing import Any, Dict, List, Optional

from .exceptions import Location
from .model import (
    FINAL,
    INITIAL,
    Add,
    Edge,
    Enumeration,
    FieldFirst,
    FieldLength,
    FieldType,
    MessageGraph,
    format_expression,
)
from .runtime import FieldSlice


class ReportFormatter:
    """
    Renders models and results as text for the command line and the API.
    """

    def __init__(self):
        # DOT attributes per kind of node
        self.node_attributes = {
            INITIAL: 'shape=circle, style=filled, fillcolor=black, fontcolor=white, label="Initial"',
            FINAL: 'shape=doublecircle, label="Final"',
        }
        self.field_attributes = "shape=box"
        # Shown instead of the default first-bit expression s'First + s'Length
        self.default_first = "*"

    def edge_label(self, edge: Edge) -> str:
        """
        Label of an edge as ``(condition, length, first)``.

        Args:
            edge: Model edge; a first expression that directly follows the
                source field is abbreviated.
        """
        if edge.first == Add(FieldFirst(edge.source), FieldLength(edge.source)):
            first = self.default_first
        else:
            first = format_expression(edge.first)
        return f"({format_expression(edge.condition)}, {format_expression(edge.length)}, {first})"

    @staticmethod
    def _quote(text: str) -> str:
        return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'

    def to_dot(self, graph: MessageGraph) -> str:
        """DOT digraph with one node per field and one edge per model edge, in model order."""
        lines = [f"digraph {self._quote(graph.message_name)} {{", f"    node [{self.field_attributes}];"]
        for node in graph.nodes:
            attributes = self.node_attributes.get(node)
            if attributes is None:
                lines.append(f"    {self._quote(node.name)};")
            else:
                lines.append(f"    {self._quote(node.name)} [{attributes}];")
        for index, edge in enumerate(graph.edges):
            lines.append(
                f"    {self._quote(edge.source.name)} -> {self._quote(edge.target.name)}"
                f" [label={self._quote(f'{index}: {self.edge_label(edge)}')}];"
            )
        lines.append("}")
        return "\n".join(lines) + "\n"

    def graph_data(self, graph: MessageGraph) -> Dict[str, Any]:
        return {
            "message": graph.message_name,
            "nodes": [node.name for node in graph.nodes],
            "edges": [
                {
                    "index": index,
                    "source": edge.source.name,
                    "target": edge.target.name,
                    "condition": format_expression(edge.condition),
                    "length": format_expression(edge.length),
                    "first": format_expression(edge.first),
                }
                for index, edge in enumerate(graph.edges)
            ],
        }

    @staticmethod
    def diagnostic(source: str, location: Optional[Location], message: str, severity: str = "error") -> str:
        """``file:line:column: severity: message``; the position is omitted if unknown."""
        if location is None:
            return f"{source}: {severity}: {message}"
        return f"{source}:{location.line}:{location.column}: {severity}: {message}"

    @staticmethod
    def sort_key(source: str, location: Optional[Location]) -> tuple:
        if location is None:
            return (source, 0, 0)
        return (source, location.line, location.column)

    def field_value(self, field_type: FieldType, found: FieldSlice) -> str:
        if found.value is None:
            return f"first {found.first}, last {found.last} ({found.length // 8} bytes)"
        if isinstance(field_type, Enumeration):
            literal = field_type.literal_name(found.value)
            if literal is not None:
                return f"{found.value} ({literal})"
        return str(found.value)

    def field_report(self, name: str, field_type: FieldType, found: Optional[FieldSlice]) -> List[str]:
        if found is None:
            return [f"{name}: invalid"]
        return [f"{name}: valid", f"{name} = {self.field_value(field_type, found)}"]


# Global formatter instance
formatter = ReportFormatter()
