"""Runtime values, their canonical encoding and their textual rendering.

Values are immutable. Module references inside them are always 32-byte
addresses, so an encoded value means the same thing in every ledger.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .types import (
    BUILTIN_CAPS,
    STRUCTURAL,
    AdtRef,
    Type,
    UserCap,
    cap_sort_key,
    tuple_of,
)

CAP_BITS = {name: 1 << i for i, name in enumerate(BUILTIN_CAPS)}
TAGS = ("uint", "int", "unit", "tuple", "adt", "id", "context", "ref")
TYPE_TAGS = ("UInt", "Int", "Unit", "ID", "Context", "Ref", "Tuple", "Adt")


class ValueDecodeError(Exception):
    pass


@dataclass(frozen=True)
class Value:
    kind: str  # one of TAGS
    data: object = None  # int | bytes | tuple of Value
    caps: frozenset = frozenset()
    adt: AdtRef | None = None
    targs: tuple = ()
    ctor: int = 0
    inner: Type | None = None  # content type of a context or reference

    def has(self, cap) -> bool:
        if self.kind == "tuple":
            return all(v.has(cap) for v in self.data)
        return cap in self.caps


def uint(n: int) -> Value:
    return Value("uint", n, STRUCTURAL)


def int_(n: int) -> Value:
    return Value("int", n, STRUCTURAL)


UNIT_VALUE = Value("unit", None, STRUCTURAL)


def id_value(raw: bytes, master: bool = False) -> Value:
    return Value("id", raw, STRUCTURAL | ({"Master"} if master else set()))


def with_value_caps(v: Value, caps) -> Value:
    caps = frozenset(caps)
    if v.kind != "adt":
        caps |= STRUCTURAL
    return Value(v.kind, v.data, caps, v.adt, v.targs, v.ctor, v.inner)


def type_of(v: Value) -> Type:
    if v.kind == "tuple":
        return tuple_of(type_of(e) for e in v.data)
    if v.kind == "adt":
        return Type("Adt", v.targs, v.caps, adt=v.adt)
    head = {"uint": "UInt", "int": "Int", "unit": "Unit", "id": "ID", "context": "Context", "ref": "Ref"}[v.kind]
    args = (v.inner,) if v.inner is not None else ()
    return Type(head, args, v.caps)


# ---- encoding ----------------------------------------------------------------------------


def _caps(caps) -> bytes:
    mask = 0
    users = []
    for c in caps:
        if isinstance(c, str):
            mask |= CAP_BITS[c]
        else:
            users.append(c)
    users.sort(key=cap_sort_key)
    out = [struct.pack("<BB", mask, len(users))]
    for c in users:
        out.append(c.module + struct.pack("<H", c.index))
    return b"".join(out)


def encode_type(t: Type) -> bytes:
    if t.head == "Var":
        raise ValueError("values never contain type variables")
    out = [bytes([TYPE_TAGS.index(t.head)])]
    if t.head == "Tuple":
        out.append(bytes([len(t.args)]))
    else:
        out.append(_caps(t.caps))
        if t.head == "Adt":
            out.append(t.adt.module + struct.pack("<HB", t.adt.index, len(t.args)))
    out.extend(encode_type(a) for a in t.args)
    return b"".join(out)


def encode_value(v: Value) -> bytes:
    out = [bytes([TAGS.index(v.kind)])]
    if v.kind == "tuple":
        out.append(bytes([len(v.data)]))
        out.extend(encode_value(e) for e in v.data)
        return b"".join(out)
    out.append(_caps(v.caps))
    if v.kind == "uint":
        out.append(struct.pack("<Q", v.data))
    elif v.kind == "int":
        out.append(struct.pack("<q", v.data))
    elif v.kind == "adt":
        out.append(v.adt.module + struct.pack("<HBB", v.adt.index, v.ctor, len(v.targs)))
        out.extend(encode_type(t) for t in v.targs)
        out.append(bytes([len(v.data)]))
        out.extend(encode_value(f) for f in v.data)
    elif v.kind == "id":
        out.append(v.data)
    elif v.kind in ("context", "ref"):
        out.append(v.data)
        out.append(encode_type(v.inner))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueDecodeError("truncated value")
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return b

    def u8(self) -> int:
        return self.take(1)[0]

    def caps(self) -> frozenset:
        mask = self.u8()
        caps = {name for name, bit in CAP_BITS.items() if mask & bit}
        for _ in range(self.u8()):
            mod = self.take(32)
            (idx,) = struct.unpack("<H", self.take(2))
            caps.add(UserCap(mod, idx))
        return frozenset(caps)

    def type(self) -> Type:
        tag = self.u8()
        if tag >= len(TYPE_TAGS):
            raise ValueDecodeError("bad type tag")
        head = TYPE_TAGS[tag]
        if head == "Tuple":
            return tuple_of(self.type() for _ in range(self.u8()))
        caps = self.caps()
        if head == "Adt":
            mod = self.take(32)
            idx, n = struct.unpack("<HB", self.take(3))
            return Type("Adt", tuple(self.type() for _ in range(n)), caps, adt=AdtRef(mod, idx))
        n = 1 if head in ("Context", "Ref") else 0
        return Type(head, tuple(self.type() for _ in range(n)), caps)

    def value(self) -> Value:
        tag = self.u8()
        if tag >= len(TAGS):
            raise ValueDecodeError("bad value tag")
        kind = TAGS[tag]
        if kind == "tuple":
            return Value("tuple", tuple(self.value() for _ in range(self.u8())))
        caps = self.caps()
        if kind == "uint":
            return Value(kind, struct.unpack("<Q", self.take(8))[0], caps)
        if kind == "int":
            return Value(kind, struct.unpack("<q", self.take(8))[0], caps)
        if kind == "unit":
            return Value(kind, None, caps)
        if kind == "adt":
            mod = self.take(32)
            idx, ctor, n = struct.unpack("<HBB", self.take(4))
            targs = tuple(self.type() for _ in range(n))
            fields = tuple(self.value() for _ in range(self.u8()))
            return Value(kind, fields, caps, AdtRef(mod, idx), targs, ctor)
        if kind == "id":
            return Value(kind, self.take(32), caps)
        raw = self.take(32)
        return Value(kind, raw, caps, inner=self.type())


def decode_value(data: bytes) -> Value:
    r = _Reader(data)
    v = r.value()
    if r.pos != len(data):
        raise ValueDecodeError("trailing bytes after value")
    return v


# ---- rendering ------------------------------------------------------------------------------


def render_type(t: Type, namer) -> str:
    """``namer(AdtRef) -> str`` supplies type names; capabilities are omitted."""
    if t.head == "Tuple":
        return "(" + ", ".join(render_type(a, namer) for a in t.args) + ")"
    base = namer(t.adt) if t.head == "Adt" else t.head
    if t.args:
        base += "[" + ", ".join(render_type(a, namer) for a in t.args) + "]"
    return base


def render_value(v: Value, namer, ctor_namer=None) -> str:
    if v.kind in ("uint", "int"):
        return str(v.data)
    if v.kind == "unit":
        return "()"
    if v.kind == "tuple":
        return "(" + ", ".join(render_value(e, namer, ctor_namer) for e in v.data) + ")"
    if v.kind == "adt":
        name = ctor_namer(v.adt, v.ctor) if ctor_namer else namer(v.adt)
        targs = "[" + ", ".join(render_type(t, namer) for t in v.targs) + "]" if v.targs else ""
        fields = "(" + ", ".join(render_value(f, namer, ctor_namer) for f in v.data) + ")" if v.data else ""
        return f"{name}{targs}{fields}"
    if v.kind == "id":
        prefix = "Master ID" if "Master" in v.caps else "ID"
        return f"{prefix}({v.data.hex()[:16]})"
    head = "Context" if v.kind == "context" else "Ref"
    return f"{head}[{render_type(v.inner, namer)}]({v.data.hex()[:16]})"


__all__ = [
    "Value",
    "ValueDecodeError",
    "uint",
    "int_",
    "UNIT_VALUE",
    "id_value",
    "with_value_caps",
    "type_of",
    "encode_value",
    "decode_value",
    "encode_type",
    "render_type",
    "render_value",
]
