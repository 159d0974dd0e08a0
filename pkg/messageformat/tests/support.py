"""
Shared fixtures for the test suite: the bundled specifications, their
derived parsers and the curated vectors.
"""

import functools
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

from messageformat.conf import flux_setting
from messageformat.derive import DerivedParser, derive_parser
from messageformat.dsl import Elaboration, SpecFile, elaborate_all, parse_spec
from messageformat.runtime import MessageBuffer, label

from . import oracles

SPEC_DIR = Path(__file__).resolve().parent.parent / "specs"
BUNDLED = ("ethernet", "tls_heartbeat", "ipv4")

ETHERNET = "Ethernet.Frame"
HEARTBEAT = "TLS_Heartbeat.Heartbeat_Message"
IPV4 = "IPv4.Packet"

# A's first outgoing condition underflows on short buffers; the second may
# still hold.
PARTIAL = "Partial.M"
PARTIAL_SPEC = """\
package Partial is
   type B is mod 2**8;
   type M is
      message
         A : B
            then C
               if Message'Length - 100 > 0,
            then D
               if A = 1;
         C : B;
         D : B;
      end message;
end Partial;
"""

FIELD_LINE = re.compile(r"^field:\s*(\w+)\s+expect_value:\s*(\d+)\s*$")


def spec_text(name: str) -> str:
    return (SPEC_DIR / f"{name}.rflx").read_text(encoding="utf-8")


def spec_path(name: str) -> Path:
    return SPEC_DIR / f"{name}.rflx"


@functools.lru_cache(maxsize=None)
def load_spec(name: str) -> SpecFile:
    return parse_spec(spec_text(name))


@functools.lru_cache(maxsize=None)
def bundled() -> Elaboration:
    return elaborate_all([load_spec(name) for name in BUNDLED])


@functools.lru_cache(maxsize=None)
def parser_for(message: str) -> DerivedParser:
    return derive_parser(bundled().message(message))


def refinement(name: str):
    return next(r for r in bundled().refinements if r.name.lower() == name.lower())


def labeled(data: bytes, message: str) -> MessageBuffer:
    return label(MessageBuffer(data), message)


def elaborated(text: str, message: str):
    return elaborate_all([parse_spec(text)]).message(message)


@dataclass
class Vector:
    name: str
    data: bytes
    valid: bool
    fields: Dict[str, int] = field(default_factory=dict)


def read_vectors(directory: str) -> List[Vector]:
    """Vectors of one format with the expectations of their ``.txt`` sidecars."""
    vectors = []
    for data_file in sorted((Path(flux_setting("VECTOR_DIR")) / directory).glob("*.bin")):
        expect_valid = None
        fields = {}
        for line in data_file.with_suffix(".txt").read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line.startswith("expect:"):
                expect_valid = line.split(":", 1)[1].strip() == "valid"
            elif FIELD_LINE.match(line):
                name, value = FIELD_LINE.match(line).groups()
                fields[name] = int(value)
        vectors.append(Vector(data_file.stem, data_file.read_bytes(), expect_valid, fields))
    return vectors


def vector(directory: str, name: str) -> Vector:
    return next(v for v in read_vectors(directory) if v.name == name)


def rng(salt: int = 0) -> random.Random:
    return random.Random(flux_setting("RANDOM_SEED") + salt)


def random_bytes(generator: random.Random, max_length: int) -> bytes:
    return generator.randbytes(generator.randint(0, max_length))


def mutate(generator: random.Random, data: bytes) -> bytes:
    """Flip, replace, drop or append bytes of ``data``."""
    mutated = bytearray(data)
    for _ in range(generator.randint(1, 3)):
        choice = generator.randrange(4)
        if choice == 0 and mutated:
            position = generator.randrange(len(mutated))
            mutated[position] ^= 1 << generator.randrange(8)
        elif choice == 1 and mutated:
            mutated[generator.randrange(len(mutated))] = generator.getrandbits(8)
        elif choice == 2 and mutated:
            del mutated[generator.randrange(len(mutated)):]
        else:
            mutated.extend(generator.getrandbits(8) for _ in range(generator.randint(1, 8)))
    return bytes(mutated)


def ethernet_candidate(generator: random.Random) -> bytes:
    """Random frame whose header often takes one of the interesting branches."""
    type_length = generator.choice(
        (
            generator.getrandbits(16),
            0x8100,
            0x0800,
            generator.randint(0, 1500),
            generator.randint(1501, 1535),
        )
    )
    header = generator.randbytes(12) + type_length.to_bytes(2, "big")
    if type_length == 0x8100:
        inner = generator.choice((0x0800, generator.randint(0, 1600)))
        header += generator.randbytes(2) + inner.to_bytes(2, "big")
    data = header + generator.randbytes(generator.choice((generator.randint(0, 80), generator.randint(40, 1600))))
    if generator.random() < 0.2:
        return data[: generator.randint(0, len(data))]
    return data


def heartbeat_candidate(generator: random.Random) -> bytes:
    payload_length = generator.choice((generator.randint(0, 40), generator.getrandbits(16)))
    data = bytes([generator.randint(0, 3)]) + payload_length.to_bytes(2, "big")
    data += generator.randbytes(generator.randint(0, 80))
    if generator.random() < 0.2:
        return data[: generator.randint(0, len(data))]
    return data


CANDIDATES = {ETHERNET: ethernet_candidate, HEARTBEAT: heartbeat_candidate}

# message, vector directory, reference validator
FORMATS = (
    (ETHERNET, "ethernet", oracles.ethernet_frame_valid),
    (HEARTBEAT, "tls_heartbeat", oracles.heartbeat_message_valid),
)
