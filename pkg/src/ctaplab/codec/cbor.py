"""Strict CTAP2-canonical CBOR.

Only the subset CTAP uses: unsigned/negative ints, byte and text strings,
arrays, maps, booleans and null.  Encoding is deterministic; decoding rejects
anything a compliant peer would never emit (indefinite lengths, tags, floats,
oversized integer heads, unsorted or duplicate map keys, trailing bytes).

Python values map onto CBOR as ``int``, ``bytes``, ``str``, ``list``,
``dict``, ``bool`` and ``None``.
"""

from __future__ import annotations

import struct

UNSIGNED_INT = 0
NEGATIVE_INT = 1
BYTE_STRING = 2
TEXT_STRING = 3
ARRAY = 4
MAP = 5
TAG = 6
SIMPLE = 7

FALSE = 0xF4
TRUE = 0xF5
NULL = 0xF6

MAX_DEPTH = 16
_UINT64_LIMIT = 1 << 64


class CborError(ValueError):
    """Base class for decode failures."""


class MalformedCbor(CborError):
    """Truncated input, unsupported major type or otherwise unparseable."""


class NonCanonical(CborError):
    """Well-formed CBOR that violates the canonical encoding rules."""


def _head(major: int, arg: int) -> bytes:
    if arg < 24:
        return bytes([(major << 5) | arg])
    if arg < 0x100:
        return struct.pack(">BB", (major << 5) | 24, arg)
    if arg < 0x10000:
        return struct.pack(">BH", (major << 5) | 25, arg)
    if arg < 0x100000000:
        return struct.pack(">BI", (major << 5) | 26, arg)
    if arg < _UINT64_LIMIT:
        return struct.pack(">BQ", (major << 5) | 27, arg)
    raise ValueError(f"integer argument {arg} does not fit in 64 bits")


def key_order(encoded_key: bytes) -> tuple:
    """Sort key for encoded map keys: major type, then length, then bytes."""
    return (encoded_key[0] >> 5, len(encoded_key), encoded_key)


def encode(value) -> bytes:
    if value is False:
        return bytes([FALSE])
    if value is True:
        return bytes([TRUE])
    if value is None:
        return bytes([NULL])
    if isinstance(value, int):
        if value >= 0:
            return _head(UNSIGNED_INT, value)
        return _head(NEGATIVE_INT, -1 - value)
    if isinstance(value, (bytes, bytearray)):
        return _head(BYTE_STRING, len(value)) + bytes(value)
    if isinstance(value, str):
        raw = value.encode("utf-8")
        return _head(TEXT_STRING, len(raw)) + raw
    if isinstance(value, (list, tuple)):
        return _head(ARRAY, len(value)) + b"".join(encode(v) for v in value)
    if isinstance(value, dict):
        items = sorted(
            ((encode(k), encode(v)) for k, v in value.items()),
            key=lambda kv: key_order(kv[0]),
        )
        for (a, _), (b, _) in zip(items, items[1:]):
            if a == b:
                raise ValueError("duplicate map key after encoding")
        return _head(MAP, len(items)) + b"".join(k + v for k, v in items)
    raise TypeError(f"cannot encode {type(value).__name__} as CTAP CBOR")


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise MalformedCbor(f"truncated input: need {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def head(self) -> tuple[int, int, int]:
        start = self.pos
        initial = self.take(1)[0]
        major, info = initial >> 5, initial & 0x1F
        if info < 24:
            return major, info, start
        if info == 31:
            raise NonCanonical(f"indefinite-length item at offset {start}")
        if info > 27:
            raise MalformedCbor(f"reserved additional info {info} at offset {start}")
        if major == SIMPLE:
            # floats and extended simple values
            raise MalformedCbor(f"unsupported simple/float encoding at offset {start}")
        size = 1 << (info - 24)
        arg = int.from_bytes(self.take(size), "big")
        minimum = 24 if size == 1 else 1 << (4 * size)
        if arg < minimum:
            raise NonCanonical(f"non-minimal integer head at offset {start}")
        return major, arg, start


def _decode_item(r: _Reader, depth: int):
    if depth > MAX_DEPTH:
        raise MalformedCbor("nesting too deep")
    major, arg, start = r.head()
    if major == UNSIGNED_INT:
        return arg
    if major == NEGATIVE_INT:
        return -1 - arg
    if major == BYTE_STRING:
        return r.take(arg)
    if major == TEXT_STRING:
        raw = r.take(arg)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedCbor(f"invalid UTF-8 in text string at offset {start}") from exc
    if major == ARRAY:
        return [_decode_item(r, depth + 1) for _ in range(arg)]
    if major == MAP:
        out: dict = {}
        previous = None
        for _ in range(arg):
            key_start = r.pos
            key = _decode_item(r, depth + 1)
            encoded_key = r.data[key_start:r.pos]
            if isinstance(key, (list, dict)):
                raise MalformedCbor(f"unhashable map key at offset {key_start}")
            if previous is not None:
                if encoded_key == previous:
                    raise NonCanonical(f"duplicate map key at offset {key_start}")
                if key_order(encoded_key) < key_order(previous):
                    raise NonCanonical(f"map keys out of canonical order at offset {key_start}")
            if key in out:
                # e.g. 1 and true: distinct on the wire, equal as Python keys
                raise MalformedCbor(f"map key collides with an earlier key at offset {key_start}")
            previous = encoded_key
            out[key] = _decode_item(r, depth + 1)
        return out
    if major == TAG:
        raise MalformedCbor(f"tags are not supported (offset {start})")
    # major 7 with a direct value
    if arg == 20:
        return False
    if arg == 21:
        return True
    if arg == 22:
        return None
    raise MalformedCbor(f"unsupported simple value {arg} at offset {start}")


def decode(data: bytes):
    """Decode exactly one canonical CBOR item; trailing bytes are an error."""
    r = _Reader(bytes(data))
    value = _decode_item(r, 0)
    if r.pos != len(r.data):
        raise MalformedCbor(f"{len(r.data) - r.pos} trailing bytes after CBOR item")
    return value


def decode_prefix(data: bytes):
    """Decode one item from the front of ``data``; returns (value, bytes consumed)."""
    r = _Reader(bytes(data))
    value = _decode_item(r, 0)
    return value, r.pos


encode_canonical = encode
decode_canonical = decode


def strict_equal(a, b) -> bool:
    """Equality that does not conflate bool with int (``True == 1`` in Python)."""
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, (bytes, bytearray)) and isinstance(b, (bytes, bytearray)):
        return bytes(a) == bytes(b)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(strict_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        if len(a) != len(b):
            return False
        for k, v in a.items():
            match = [k2 for k2 in b if strict_equal(k, k2)]
            if len(match) != 1 or not strict_equal(v, b[match[0]]):
                return False
        return True
    if type(a) is not type(b):
        return False
    return a == b
