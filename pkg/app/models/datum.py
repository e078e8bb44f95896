# app/models/datum.py
"""
Datum values: the closed set of five kinds every test input and output is encoded into.

Equality and hashing are defined on the canonical binary serialization, so two
datums are equal iff their canonical bytes are equal. Float comparison is
therefore bit-level: Number(0.0) != Number(-0.0).
"""
from __future__ import annotations

import hashlib
import logging
import struct
from enum import Enum
from typing import Any, Iterable, Mapping, Union

import numpy as np

from app.errors import DatumFormatError

logger = logging.getLogger(__name__)

_TAG_NUMBER = 0
_TAG_TEXT = 1
_TAG_BITS = 2
_TAG_VECTOR = 3
_TAG_RECORD = 4


class DatumKind(str, Enum):
    NUMBER = "num"
    TEXT = "text"
    BITS = "bits"
    VECTOR = "vec"
    RECORD = "rec"


class _DatumBase:
    """Shared equality, hashing and identity for all datum kinds."""

    __slots__ = ("_canonical",)
    kind: DatumKind

    def __init__(self) -> None:
        object.__setattr__(self, "_canonical", None)

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError(f"{type(self).__name__} is immutable")

    def canonical_bytes(self) -> bytes:
        cached = self._canonical
        if cached is None:
            out = bytearray()
            _encode(self, out)
            cached = bytes(out)
            object.__setattr__(self, "_canonical", cached)
        return cached

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, _DatumBase):
            return NotImplemented
        return self.canonical_bytes() == other.canonical_bytes()

    def __hash__(self) -> int:
        return hash(self.canonical_bytes())


class Number(_DatumBase):
    __slots__ = ("value",)
    kind = DatumKind.NUMBER

    def __init__(self, value: float):
        super().__init__()
        object.__setattr__(self, "value", float(value))

    def __repr__(self) -> str:
        return f"Number({self.value!r})"


class Text(_DatumBase):
    __slots__ = ("value",)
    kind = DatumKind.TEXT

    def __init__(self, value: str):
        super().__init__()
        if not isinstance(value, str):
            raise DatumFormatError(f"Text expects str, got {type(value).__name__}")
        object.__setattr__(self, "value", value)

    def __repr__(self) -> str:
        return f"Text({self.value!r})"


class Bits(_DatumBase):
    """Fixed-width bit vector. Bit 0 is the leftmost character of the string form."""

    __slots__ = ("bits",)
    kind = DatumKind.BITS

    def __init__(self, bits: Iterable[int]):
        super().__init__()
        values = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in values):
            raise DatumFormatError(f"Bits accepts only 0 and 1, got {values}")
        object.__setattr__(self, "bits", values)

    @classmethod
    def from_string(cls, text: str) -> "Bits":
        if any(ch not in "01" for ch in text):
            raise DatumFormatError(f"Bits string may only contain '0' and '1': {text!r}")
        return cls(int(ch) for ch in text)

    @property
    def width(self) -> int:
        return len(self.bits)

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def with_bit(self, index: int, value: int) -> "Bits":
        bits = list(self.bits)
        bits[index] = value
        return Bits(bits)

    def __repr__(self) -> str:
        return f"Bits({self.to_string()!r})"


class NumVector(_DatumBase):
    __slots__ = ("values",)
    kind = DatumKind.VECTOR

    def __init__(self, values: Iterable[float]):
        super().__init__()
        object.__setattr__(self, "values", tuple(float(v) for v in values))

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"NumVector({list(self.values)!r})"


class Record(_DatumBase):
    """Name to datum mapping; fields are held sorted by the UTF-8 bytes of their names."""

    __slots__ = ("fields",)
    kind = DatumKind.RECORD

    def __init__(self, fields: Mapping[str, "Datum"] | Iterable[tuple[str, "Datum"]]):
        super().__init__()
        items = list(fields.items()) if isinstance(fields, Mapping) else list(fields)
        names = [name for name, _ in items]
        if len(set(names)) != len(names):
            raise DatumFormatError(f"Record keys must be unique: {names}")
        for name, value in items:
            if not isinstance(name, str) or not isinstance(value, _DatumBase):
                raise DatumFormatError(f"Record field {name!r} must map a str to a Datum")
        ordered = tuple(sorted(items, key=lambda item: item[0].encode("utf-8")))
        object.__setattr__(self, "fields", ordered)

    def get(self, name: str) -> "Datum":
        for key, value in self.fields:
            if key == name:
                return value
        raise KeyError(name)

    def replace(self, name: str, value: "Datum") -> "Record":
        updated = dict(self.fields)
        updated[name] = value
        return Record(updated)

    def as_dict(self) -> dict[str, "Datum"]:
        return dict(self.fields)

    def __repr__(self) -> str:
        return f"Record({dict(self.fields)!r})"


Datum = Union[Number, Text, Bits, NumVector, Record]


def _u32(value: int) -> bytes:
    return struct.pack(">I", value)


def _pack_bits(bits: tuple[int, ...]) -> bytes:
    packed = bytearray((len(bits) + 7) // 8)
    for index, bit in enumerate(bits):
        if bit:
            packed[index // 8] |= 0x80 >> (index % 8)
    return bytes(packed)


def _encode(datum: _DatumBase, out: bytearray) -> None:
    if isinstance(datum, Number):
        out.append(_TAG_NUMBER)
        out += struct.pack(">d", datum.value)
    elif isinstance(datum, Text):
        raw = datum.value.encode("utf-8")
        out.append(_TAG_TEXT)
        out += _u32(len(raw)) + raw
    elif isinstance(datum, Bits):
        out.append(_TAG_BITS)
        out += _u32(datum.width) + _pack_bits(datum.bits)
    elif isinstance(datum, NumVector):
        out.append(_TAG_VECTOR)
        out += _u32(len(datum.values))
        for value in datum.values:
            out += struct.pack(">d", value)
    elif isinstance(datum, Record):
        out.append(_TAG_RECORD)
        out += _u32(len(datum.fields))
        for name, value in datum.fields:
            raw = name.encode("utf-8")
            out += _u32(len(raw)) + raw
            out += value.canonical_bytes()
    else:
        raise DatumFormatError(f"Not a datum: {datum!r}")


def to_canonical_bytes(datum: Datum) -> bytes:
    """Returns the length-prefixed tagged big-endian serialization of a datum."""
    return datum.canonical_bytes()


def canonical_hash(datum: Datum) -> str:
    """
    Returns the case id of a datum: the hex SHA-256 digest of its canonical bytes.

    Equal datums always hash to the same id, on every run and platform.
    """
    return hashlib.sha256(datum.canonical_bytes()).hexdigest()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, count: int) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise DatumFormatError(
                f"Truncated datum: needed {count} bytes at offset {self.offset}, have {len(self.data) - self.offset}"
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack(">d", self.take(8))[0]


def _decode(reader: _Reader) -> Datum:
    tag = reader.take(1)[0]
    if tag == _TAG_NUMBER:
        return Number(reader.f64())
    if tag == _TAG_TEXT:
        raw = reader.take(reader.u32())
        try:
            return Text(raw.decode("utf-8"))
        except UnicodeDecodeError as e:
            raise DatumFormatError(f"Text payload is not valid UTF-8: {e}") from e
    if tag == _TAG_BITS:
        width = reader.u32()
        packed = reader.take((width + 7) // 8)
        bits = tuple((packed[i // 8] >> (7 - i % 8)) & 1 for i in range(width))
        if _pack_bits(bits) != packed:
            raise DatumFormatError("Bits padding must be zero")
        return Bits(bits)
    if tag == _TAG_VECTOR:
        count = reader.u32()
        return NumVector(reader.f64() for _ in range(count))
    if tag == _TAG_RECORD:
        count = reader.u32()
        fields = []
        previous = None
        for _ in range(count):
            raw = reader.take(reader.u32())
            if previous is not None and raw <= previous:
                raise DatumFormatError("Record keys must be unique and sorted by their UTF-8 bytes")
            previous = raw
            try:
                name = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise DatumFormatError(f"Record key is not valid UTF-8: {e}") from e
            fields.append((name, _decode(reader)))
        return Record(fields)
    raise DatumFormatError(f"Unknown datum tag {tag}")


def from_canonical_bytes(data: bytes) -> Datum:
    """Inverse of to_canonical_bytes; rejects trailing bytes and non-canonical encodings."""
    reader = _Reader(bytes(data))
    datum = _decode(reader)
    if reader.offset != len(reader.data):
        raise DatumFormatError(f"{len(reader.data) - reader.offset} trailing bytes after datum")
    return datum


def to_tagged_json(datum: Datum) -> dict[str, Any]:
    """Encodes a datum in the tagged JSON form used on the wire and in files."""
    if isinstance(datum, Number):
        return {"num": datum.value}
    if isinstance(datum, Text):
        return {"text": datum.value}
    if isinstance(datum, Bits):
        return {"bits": datum.to_string()}
    if isinstance(datum, NumVector):
        return {"vec": list(datum.values)}
    if isinstance(datum, Record):
        return {"rec": {name: to_tagged_json(value) for name, value in datum.fields}}
    raise DatumFormatError(f"Not a datum: {datum!r}")


def from_tagged_json(data: Any) -> Datum:
    if not isinstance(data, dict) or len(data) != 1:
        raise DatumFormatError(f"Tagged datum must be a single-key object, got {data!r}")
    (tag, payload), = data.items()
    if tag == "num":
        if isinstance(payload, bool) or not isinstance(payload, (int, float)):
            raise DatumFormatError(f"'num' payload must be a number, got {payload!r}")
        return Number(payload)
    if tag == "text":
        return Text(payload)
    if tag == "bits":
        if not isinstance(payload, str):
            raise DatumFormatError(f"'bits' payload must be a string, got {payload!r}")
        return Bits.from_string(payload)
    if tag == "vec":
        if not isinstance(payload, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in payload):
            raise DatumFormatError(f"'vec' payload must be a list of numbers, got {payload!r}")
        return NumVector(payload)
    if tag == "rec":
        if not isinstance(payload, dict):
            raise DatumFormatError(f"'rec' payload must be an object, got {payload!r}")
        return Record({name: from_tagged_json(value) for name, value in payload.items()})
    raise DatumFormatError(f"Unknown datum tag {tag!r}")


def magnitude(datum: Datum) -> float | None:
    """Numeric size of a datum: the value of a Number, the L2 norm of a NumVector, else None."""
    if isinstance(datum, Number):
        return datum.value
    if isinstance(datum, NumVector):
        return float(np.linalg.norm(datum.values)) if datum.values else 0.0
    return None
