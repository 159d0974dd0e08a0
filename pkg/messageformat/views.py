import logging

from rest_framework import status
from rest_framework.decorators import api_view
from rest_framework.response import Response

from .derive import derive_parser
from .dsl import elaborate_all, parse_spec
from .exceptions import SpecElaborationError, SpecParseError, UnknownNameError
from .formatters import formatter
from .runtime import MessageBuffer, field_access, field_valid, is_valid, label
from .serializers import GraphSerializer, SpecSerializer, ValidateSerializer

logger = logging.getLogger(__name__)


def _diagnostic(error, package=None):
    location = error.location
    return {
        "package": package if package is not None else getattr(error, "package", None),
        "line": location.line if location else None,
        "column": location.column if location else None,
        "message": str(error),
    }


def _elaborate(data):
    """
    Parse and elaborate all specs of a request.

    Returns the elaboration or an error response.
    """
    specs = []
    for index, text in enumerate([data["spec"], *data["extra_specs"]]):
        try:
            specs.append(parse_spec(text))
        except SpecParseError as e:
            return Response(
                {
                    "error": f"specification {index} does not parse",
                    "diagnostics": [_diagnostic(error, package=f"#{index}") for error in e.errors],
                },
                status=status.HTTP_400_BAD_REQUEST,
            )
    try:
        return elaborate_all(specs)
    except SpecElaborationError as e:
        return Response(
            {"error": "specification is not valid", "diagnostics": [_diagnostic(error) for error in e.errors]},
            status=status.HTTP_400_BAD_REQUEST,
        )


def _invalid_request(serializer):
    return Response({"error": "invalid request", "details": serializer.errors}, status=status.HTTP_400_BAD_REQUEST)


@api_view(["POST"])
def check_spec(request):
    """
    API endpoint that parses, elaborates and validates specifications.
    """
    serializer = SpecSerializer(data=request.data)
    if not serializer.is_valid():
        return _invalid_request(serializer)
    elaboration = _elaborate(serializer.validated_data)
    if isinstance(elaboration, Response):
        return elaboration
    return Response(
        {
            "messages": [graph.message_name for graph in elaboration.messages],
            "refinements": [
                {
                    "name": r.name,
                    "outer": r.outer_message,
                    "field": r.payload_field.name,
                    "inner": r.inner_message,
                }
                for r in elaboration.refinements
            ],
        },
        status=status.HTTP_200_OK,
    )


@api_view(["POST"])
def message_graph(request):
    """
    API endpoint returning the graph of one message as DOT text and as JSON.
    """
    serializer = GraphSerializer(data=request.data)
    if not serializer.is_valid():
        return _invalid_request(serializer)
    elaboration = _elaborate(serializer.validated_data)
    if isinstance(elaboration, Response):
        return elaboration
    try:
        graph = elaboration.message(serializer.validated_data["message"])
    except UnknownNameError as e:
        return Response({"error": str(e)}, status=status.HTTP_404_NOT_FOUND)
    return Response({"dot": formatter.to_dot(graph), "graph": formatter.graph_data(graph)}, status=status.HTTP_200_OK)


@api_view(["POST"])
def validate_message(request):
    """
    API endpoint that validates message bytes against a message of a specification.
    """
    serializer = ValidateSerializer(data=request.data)
    if not serializer.is_valid():
        return _invalid_request(serializer)
    data = serializer.validated_data
    elaboration = _elaborate(data)
    if isinstance(elaboration, Response):
        return elaboration
    try:
        graph = elaboration.message(data["message"])
    except UnknownNameError as e:
        return Response({"error": str(e)}, status=status.HTTP_404_NOT_FOUND)

    parser = derive_parser(graph)
    buffer = label(MessageBuffer(data["hex"]), graph.message_name)
    fields = {}
    for name in data["field_names"]:
        field_id = graph.field(name)
        if field_id is None:
            return Response(
                {"error": f"{graph.message_name} has no field {name}"}, status=status.HTTP_404_NOT_FOUND
            )
        if not field_valid(parser, field_id, buffer):
            fields[field_id.name] = {"valid": False}
            continue
        found = field_access(parser, field_id, buffer)
        fields[field_id.name] = {
            "valid": True,
            "first": found.first,
            "length": found.length,
            "value": found.value,
            "text": formatter.field_value(graph.fields[field_id], found),
        }
    valid = is_valid(parser, buffer)
    logger.debug("validated %d bytes as %s: %s", len(buffer), graph.message_name, valid)
    return Response(
        {"message": graph.message_name, "length": len(buffer), "valid": valid, "fields": fields},
        status=status.HTTP_200_OK,
    )
