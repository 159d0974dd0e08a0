import networkx as nx
from django.test import SimpleTestCase

from messageformat.derive import (
    derive_parser,
    field_functions,
    node_paths,
    path_attrs,
    paths_to,
    refinement_variants,
    simplify,
    subs,
    variant_functions,
)
from messageformat.dsl import elaborate_all, parse_spec
from messageformat.exceptions import DerivationError, UnknownNameError
from messageformat.model import (
    FALSE,
    FINAL,
    INITIAL,
    TRUE,
    Add,
    And,
    Const,
    Div,
    Edge,
    Eq,
    FieldFirst,
    FieldId,
    FieldLength,
    FieldValue,
    Ge,
    Le,
    MessageGraph,
    MessageLast,
    MessageLength,
    ModularInteger,
    Mul,
    Ne,
    Not,
    Or,
    Read,
    Refinement,
    Sub,
    ValidCall,
    is_closed,
    walk,
)

from .support import (
    BUNDLED,
    ETHERNET,
    HEARTBEAT,
    IPV4,
    PARTIAL,
    PARTIAL_SPEC,
    bundled,
    elaborated,
    parser_for,
    refinement,
    rng,
    spec_text,
)

BYTE = ModularInteger(256, "Byte")
TYPE_LENGTH = FieldId("Type_Length")
PAYLOAD = FieldId("Payload")


def random_dag(generator):
    """Random acyclic graph; edges only go from earlier to later nodes."""
    fields = [FieldId(f"F{i}") for i in range(generator.randint(1, 6))]
    nodes = [INITIAL, *fields, FINAL]
    edges = []
    for _ in range(generator.randint(1, 12)):
        i = generator.randrange(len(nodes) - 1)
        j = generator.randrange(i + 1, len(nodes))
        source, target = nodes[i], nodes[j]
        if source == INITIAL:
            edges.append(Edge(source, target, length=Const(0) if target == FINAL else Const(8)))
            continue
        edges.append(
            Edge(
                source,
                target,
                Ne(FieldValue(source), Const(generator.randrange(256))),
                Const(0) if target == FINAL else Const(8),
                Add(FieldFirst(source), FieldLength(source)),
            )
        )
    return MessageGraph("Random.Dag", {f: BYTE for f in fields}, edges)


def edge_paths_oracle(graph, node):
    digraph = graph.to_networkx()
    return sorted(tuple(key for _, _, key in path) for path in nx.all_simple_edge_paths(digraph, INITIAL, node))


def expressions(parser):
    for attributes in parser.attributes:
        yield from (attributes.condition, attributes.length, attributes.first, attributes.constraint)
    for variant in parser.variant_valid.values():
        yield variant.body
    for field in parser.field_valid.values():
        yield field.body


class PathsTests(SimpleTestCase):
    def test_ethernet_payload(self):
        graph = bundled().message(ETHERNET)
        self.assertEqual(
            paths_to(graph, PAYLOAD),
            [(0, 1, 2, 3, 5, 6, 7), (0, 1, 2, 3, 5, 6, 8), (0, 1, 2, 4, 7), (0, 1, 2, 4, 8)],
        )
        self.assertEqual(paths_to(graph, TYPE_LENGTH), [(0, 1, 2, 3, 5, 6), (0, 1, 2, 4)])
        self.assertEqual(len(paths_to(graph, FINAL)), 4)
        self.assertEqual(paths_to(graph, INITIAL), [()])

    def test_heartbeat(self):
        graph = bundled().message(HEARTBEAT)
        self.assertEqual(paths_to(graph, FieldId("Padding")), [(0, 1, 2, 3)])
        self.assertEqual(paths_to(graph, FINAL), [(0, 1, 2, 3, 4)])

    def test_unknown_node(self):
        with self.assertRaises(UnknownNameError):
            paths_to(bundled().message(HEARTBEAT), FieldId("Checksum"))

    def test_bundled_messages_match_networkx(self):
        for name in (ETHERNET, HEARTBEAT, IPV4):
            graph = bundled().message(name)
            for node in graph.nodes[1:]:
                with self.subTest(message=name, node=node.name):
                    self.assertEqual(paths_to(graph, node), edge_paths_oracle(graph, node))

    def test_random_graphs_match_networkx(self):
        generator = rng(2)
        for index in range(300):
            graph = random_dag(generator)
            for node in graph.nodes[1:]:
                with self.subTest(index=index, node=node.name):
                    self.assertEqual(paths_to(graph, node), edge_paths_oracle(graph, node))


class SimplifyTests(SimpleTestCase):
    def test_folding(self):
        self.assertEqual(simplify(Add(Const(96), Const(16))), Const(112))
        self.assertEqual(simplify(Mul(Add(Const(2), Const(3)), Const(8))), Const(40))
        self.assertEqual(simplify(Div(Const(7), Const(2))), Const(3))
        self.assertEqual(simplify(Le(Const(1), Const(2))), TRUE)
        self.assertEqual(simplify(Eq(Const(1), Const(2))), FALSE)
        self.assertEqual(simplify(Not(FALSE)), TRUE)

    def test_partial_operations_are_kept(self):
        self.assertEqual(simplify(Sub(Const(3), Const(5))), Sub(Const(3), Const(5)))
        self.assertEqual(simplify(Div(Const(3), Const(0))), Div(Const(3), Const(0)))

    def test_connectives(self):
        read = Eq(Read(Const(0), Const(8)), Const(1))
        self.assertEqual(simplify(And(TRUE, read)), read)
        self.assertEqual(simplify(And(read, TRUE)), read)
        self.assertEqual(simplify(And(FALSE, read)), FALSE)
        self.assertEqual(simplify(Or(FALSE, read)), read)
        self.assertEqual(simplify(Or(TRUE, read)), TRUE)
        # the read may fail, so it is not dropped
        self.assertEqual(simplify(And(read, FALSE)), And(read, FALSE))

    def test_subs(self):
        a = FieldId("A")
        environment = {a: (Const(8), Const(16))}
        self.assertEqual(subs(Mul(FieldValue(a), Const(8)), environment), Mul(Read(Const(8), Const(16)), Const(8)))
        self.assertEqual(subs(Add(FieldFirst(a), FieldLength(a)), environment), Const(24))
        with self.assertRaises(DerivationError):
            subs(FieldValue(FieldId("B")), environment)


class PathAttributesTests(SimpleTestCase):
    def attributes(self, message):
        return {a.path: a for a in path_attrs(bundled().message(message))}

    def test_counts(self):
        self.assertEqual(len(path_attrs(bundled().message(ETHERNET))), 15)
        self.assertEqual(len(path_attrs(bundled().message(HEARTBEAT))), 5)

    def test_heartbeat_payload(self):
        payload = self.attributes(HEARTBEAT)[(0, 1, 2)]
        self.assertEqual(payload.target, PAYLOAD)
        self.assertEqual(payload.first, Const(24))
        self.assertEqual(payload.length, Mul(Read(Const(8), Const(16)), Const(8)))
        self.assertEqual(payload.condition, TRUE)
        self.assertEqual(payload.constraint, TRUE)

    def test_heartbeat_payload_length_constraint(self):
        payload_length = self.attributes(HEARTBEAT)[(0, 1)]
        self.assertEqual(payload_length.first, Const(8))
        self.assertEqual(payload_length.constraint, Le(Read(Const(8), Const(16)), Const(16364)))

    def test_ethernet_locations(self):
        attributes = self.attributes(ETHERNET)
        self.assertEqual(attributes[(0, 1, 2, 4)].first, Const(96))
        self.assertEqual(attributes[(0, 1, 2, 3, 5, 6)].first, Const(128))
        tpid = attributes[(0, 1, 2, 3)]
        self.assertEqual(tpid.condition, Eq(Read(Const(96), Const(16)), Const(0x8100)))
        self.assertEqual(
            tpid.constraint,
            And(Ge(Read(Const(96), Const(16)), Const(0x8100)), Le(Read(Const(96), Const(16)), Const(0x8100))),
        )
        payload = attributes[(0, 1, 2, 4, 8)]
        self.assertEqual(payload.first, Const(112))
        self.assertEqual(payload.length, Sub(MessageLast(), Const(111)))
        self.assertEqual(payload.condition, Ge(Read(Const(96), Const(16)), Const(1536)))

    def test_final_attributes(self):
        final = self.attributes(HEARTBEAT)[(0, 1, 2, 3, 4)]
        self.assertEqual(final.target, FINAL)
        self.assertEqual(final.length, Const(0))
        self.assertEqual(final.constraint, TRUE)

    def test_single_field(self):
        a = FieldId("A")
        graph = MessageGraph(
            "Test.Single", {a: BYTE}, [Edge(INITIAL, a, length=Const(8)), Edge(a, FINAL, first=Add(FieldFirst(a), FieldLength(a)))]
        )
        [first, final] = path_attrs(graph)
        self.assertEqual((first.path, first.target, first.first, first.length), ((0,), a, Const(0), Const(8)))
        self.assertEqual((final.path, final.target, final.first, final.length), ((0, 1), FINAL, Const(8), Const(0)))

    def test_closed(self):
        for name in (ETHERNET, HEARTBEAT, IPV4):
            for expr in expressions(parser_for(name)):
                with self.subTest(message=name, expr=str(expr)):
                    self.assertTrue(is_closed(expr))

    def test_random_graphs_are_closed(self):
        generator = rng(3)
        for index in range(100):
            graph = random_dag(generator)
            parser = derive_parser(graph)
            expected = sum(len(paths_to(graph, node)) for node in graph.nodes[1:])
            with self.subTest(index=index):
                self.assertEqual(len(parser.attributes), expected)
                self.assertTrue(all(is_closed(expr) for expr in expressions(parser)))


class VariantFunctionTests(SimpleTestCase):
    def test_first_field_has_no_predecessor(self):
        valid, _ = variant_functions(path_attrs(bundled().message(HEARTBEAT)))
        first = valid[(0,)]
        self.assertIsNone(first.predecessor)
        read = Read(Const(0), Const(8))
        self.assertEqual(
            first.body,
            And(Le(Const(8), MessageLength()), Or(Eq(read, Const(1)), Eq(read, Const(2)))),
        )

    def test_predecessor_calls(self):
        for name in (ETHERNET, HEARTBEAT, IPV4):
            parser = parser_for(name)
            for path, variant in parser.variant_valid.items():
                calls = {node.path for node in walk(variant.body) if isinstance(node, ValidCall)}
                with self.subTest(message=name, path=path):
                    self.assertEqual(calls, {variant.predecessor} if variant.predecessor else set())

    def test_access_functions(self):
        _, access = variant_functions(path_attrs(bundled().message(HEARTBEAT)))
        payload = access[(0, 1, 2)]
        self.assertEqual((payload.field, payload.first), (PAYLOAD, Const(24)))
        self.assertEqual(payload.length, Mul(Read(Const(8), Const(16)), Const(8)))


class FieldFunctionTests(SimpleTestCase):
    def test_node_paths(self):
        entries = node_paths(bundled().message(ETHERNET))
        self.assertEqual(entries[FieldId("Destination")], [((0,), (TRUE,))])
        self.assertEqual(
            entries[TYPE_LENGTH],
            [
                (
                    (0, 1, 2, 3, 5, 6),
                    (Le(Read(Const(128), Const(16)), Const(1500)), Ge(Read(Const(128), Const(16)), Const(1536))),
                ),
                (
                    (0, 1, 2, 4),
                    (Le(Read(Const(96), Const(16)), Const(1500)), Ge(Read(Const(96), Const(16)), Const(1536))),
                ),
            ],
        )
        self.assertEqual(len(entries[PAYLOAD]), 4)

    def test_outgoing_conditions_stay_separate(self):
        parser = derive_parser(elaborated(PARTIAL_SPEC, PARTIAL))
        [(path, conditions)] = parser.field_valid[FieldId("A")].disjuncts
        self.assertEqual(path, (0,))
        self.assertEqual(len(conditions), 2)
        self.assertEqual(conditions[1], Eq(Read(Const(0), Const(8)), Const(1)))
        self.assertEqual([condition for _, condition in parser.field_valid[FieldId("A")].terms], list(conditions))

    def test_heartbeat_padding(self):
        [(path, (condition,))] = node_paths(bundled().message(HEARTBEAT))[FieldId("Padding")]
        self.assertEqual(path, (0, 1, 2, 3))
        padding_length = Sub(
            MessageLast(), Sub(Add(Const(24), Mul(Read(Const(8), Const(16)), Const(8))), Const(1))
        )
        self.assertEqual(
            condition, And(Le(MessageLength(), Const(131072)), Ge(padding_length, Const(128)))
        )

    def test_field_valid_body(self):
        parser = parser_for(ETHERNET)
        self.assertEqual(parser.field_valid[FieldId("Destination")].body, ValidCall((0,)))
        body = parser.field_valid[TYPE_LENGTH].body
        self.assertIsInstance(body, Or)
        self.assertEqual(body.lhs.lhs, ValidCall((0, 1, 2, 3, 5, 6)))

    def test_access_choice(self):
        choice = parser_for(ETHERNET).field_access[PAYLOAD].choice
        chain = []
        while choice is not None:
            chain.append(choice.path)
            choice = choice.orelse
        self.assertEqual(chain, paths_to(bundled().message(ETHERNET), PAYLOAD))

    def test_inconsistent_inputs(self):
        with self.assertRaises(DerivationError):
            field_functions({FieldId("X"): [((9,), (TRUE,))]}, ({}, {}))


class DeriveParserTests(SimpleTestCase):
    def test_counts(self):
        for name, variants, fields, final_paths in ((ETHERNET, 15, 7, 4), (HEARTBEAT, 5, 4, 1), (IPV4, 20, 17, 2)):
            parser = parser_for(name)
            with self.subTest(message=name):
                self.assertEqual(len(parser.variant_valid), variants)
                self.assertEqual(len(parser.variant_access), variants)
                self.assertEqual(len(parser.field_valid), fields)
                self.assertEqual(len(parser.field_access), fields)
                self.assertEqual(len(parser.final_paths), final_paths)

    def test_null_message(self):
        parser = derive_parser(MessageGraph("Test.Null", {}, [Edge(INITIAL, FINAL)]))
        self.assertEqual(list(parser.variant_valid), [(0,)])
        self.assertEqual(dict(parser.field_valid), {})
        self.assertEqual(parser.final_paths, ((0,),))

    def test_deterministic(self):
        fresh = elaborate_all([parse_spec(spec_text(name)) for name in BUNDLED])
        for graph in fresh.messages:
            with self.subTest(message=graph.message_name):
                self.assertEqual(derive_parser(graph), parser_for(graph.message_name))
                self.assertEqual(derive_parser(graph), derive_parser(graph))

    def test_field_lookup(self):
        parser = parser_for(HEARTBEAT)
        self.assertEqual(parser.field("payload_length"), FieldId("Payload_Length"))
        with self.assertRaises(UnknownNameError):
            parser.field("Checksum")


class RefinementVariantTests(SimpleTestCase):
    def test_ipv4_in_ethernet(self):
        variants = {v.path: v for v in refinement_variants(parser_for(ETHERNET), refinement("IPv4_In_Ethernet"))}
        self.assertEqual(len(variants), 4)
        vlan = variants[(0, 1, 2, 3, 5, 6, 7, 9)]
        self.assertEqual(vlan.condition, Eq(Read(Const(128), Const(16)), Const(0x0800)))
        self.assertEqual(vlan.payload, (0, 1, 2, 3, 5, 6, 7))
        direct = variants[(0, 1, 2, 4, 8, 9)]
        self.assertEqual(direct.condition, Eq(Read(Const(96), Const(16)), Const(0x0800)))
        self.assertEqual(direct.payload, (0, 1, 2, 4, 8))

    def test_field_missing_on_path(self):
        tagged = Refinement(ETHERNET, PAYLOAD, IPV4, Eq(FieldValue(FieldId("TCI")), Const(1)), "Tagged")
        variants = {v.path: v for v in refinement_variants(parser_for(ETHERNET), tagged)}
        self.assertEqual(variants[(0, 1, 2, 4, 7, 9)].condition, FALSE)
        self.assertEqual(variants[(0, 1, 2, 3, 5, 6, 7, 9)].condition, Eq(Read(Const(112), Const(16)), Const(1)))

    def test_wrong_message(self):
        with self.assertRaises(DerivationError):
            refinement_variants(parser_for(HEARTBEAT), refinement("IPv4_In_Ethernet"))
