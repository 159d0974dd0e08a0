"""
Runtime support for generated message parsers.

Emitted unchanged next to every generated package. Only the standard
library is used so generated parsers run anywhere.
"""


class Invalid(Exception):
    """Evaluation failed; the enclosing condition does not hold."""


class ContractViolation(Exception):
    """A generated function was called with an unmet precondition."""


class Buffer:
    """Read-only bytes plus the label of the message they are claimed to hold."""

    __slots__ = ("data", "label")

    def __init__(self, data, label=None):
        self.data = memoryview(data).toreadonly()
        self.label = label

    def __len__(self):
        return len(self.data)

    def tobytes(self):
        return self.data.tobytes()


def require(condition, message):
    if not condition:
        raise ContractViolation(message)


def label(buffer, message):
    buffer.label = message
    return buffer


def is_contained(buffer, message):
    return buffer.label is not None and buffer.label.lower() == message.lower()


def length(buffer):
    return 8 * len(buffer.data)


def last(buffer):
    return sub(length(buffer), 1)


def sub(lhs, rhs):
    if lhs < rhs:
        raise Invalid("underflow")
    return lhs - rhs


def div(lhs, rhs):
    if rhs == 0:
        raise Invalid("division by zero")
    return lhs // rhs


def read(buffer, first, size):
    """Big-endian value of ``size`` bits starting at bit ``first``."""
    if first < 0 or size < 0 or first + size > length(buffer):
        raise Invalid("read outside the buffer")
    if size == 0:
        return 0
    start = first // 8
    stop = (first + size + 7) // 8
    chunk = int.from_bytes(buffer.data[start:stop], "big")
    return (chunk >> (stop * 8 - first - size)) & ((1 << size) - 1)


def subbuffer(buffer, first, size, message):
    """Bits ``first`` .. ``first + size - 1`` as a new buffer labeled ``message``."""
    if first % 8 or size % 8:
        return None
    return Buffer(buffer.data[first // 8:(first + size) // 8], message)
