"""Canonical binary encoding of IR modules.

Little-endian fixed-width integers, count-prefixed lists, no padding. Decoding
is total: any malformed input yields a DecodeError carrying the byte offset.
A byte string is only accepted if re-encoding the decoded module reproduces it.
"""

from __future__ import annotations

import hashlib
import struct

from ..types import BUILTIN_CAPS, BUILTIN_RISKS, AdtRef, Effect, FunRef, Risk, Type, UserCap, cap_sort_key, risk_sort_key, tuple_of
from . import ir
from .ir import MAGIC, VERSION

TYPE_TAGS = {"UInt": 0, "Int": 1, "Unit": 2, "ID": 3, "Context": 4, "Ref": 5, "Tuple": 6, "Adt": 7, "Var": 8}
TAG_TYPES = {v: k for k, v in TYPE_TAGS.items()}
CAP_BITS = {name: 1 << i for i, name in enumerate(BUILTIN_CAPS)}
RESERVED_CAP_BITS = 0xFF & ~sum(CAP_BITS.values())
VISIBILITY = ("public", "private", "protected")
MAX_DEPTH = 200

OP = {
    "LIT_UINT": 0x01,
    "LIT_INT": 0x02,
    "LIT_UNIT": 0x03,
    "MOVE": 0x04,
    "COPY": 0x05,
    "DROP": 0x06,
    "VAL": 0x07,
    "ADD": 0x08,
    "SUB": 0x09,
    "CONV": 0x0A,
    "CONSTRUCT": 0x0B,
    "TUPLE": 0x0C,
    "CALL": 0x0D,
    "DERIVE": 0x0E,
    "NEW_ID": 0x0F,
    "NEW_CONTEXT": 0x10,
    "READ": 0x11,
    "LET": 0x12,
    "CASE": 0x13,
    "MODIFY": 0x14,
    "ANDRETURN": 0x15,
    "ATTACH": 0x16,
    "DETACH": 0x17,
    "CYCLE": 0x18,
    "TRY": 0x19,
}
PAT = {"PVAR": 0x30, "PWILD": 0x31, "PTUPLE": 0x32, "PCTOR": 0x33}
OP_NAMES = {v: k for k, v in OP.items()}


class DecodeError(Exception):
    def __init__(self, offset: int, reason: str):
        super().__init__(f"offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason


def address(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


# ---- encoding ----------------------------------------------------------------------------


class _Writer:
    def __init__(self):
        self.parts: list = []

    def u8(self, v):
        self.parts.append(struct.pack("<B", v))

    def u16(self, v):
        self.parts.append(struct.pack("<H", v))

    def u32(self, v):
        self.parts.append(struct.pack("<I", v))

    def u64(self, v):
        self.parts.append(struct.pack("<Q", v))

    def i64(self, v):
        self.parts.append(struct.pack("<q", v))

    def raw(self, b: bytes):
        self.parts.append(b)

    def text(self, s: str):
        b = s.encode("utf-8")
        self.u16(len(b))
        self.raw(b)

    def bytes(self) -> bytes:
        return b"".join(self.parts)


def _caps(w: _Writer, caps):
    mask = 0
    users = []
    for c in caps:
        if isinstance(c, str):
            mask |= CAP_BITS[c]
        else:
            users.append(c)
    w.u8(mask)
    users.sort(key=cap_sort_key)
    w.u8(len(users))
    for c in users:
        w.u16(c.module)
        w.u16(c.index)


def _type(w: _Writer, t: Type):
    w.u8(TYPE_TAGS[t.head])
    if t.head == "Tuple":
        w.u8(len(t.args))
        for a in t.args:
            _type(w, a)
        return
    if t.head == "Var":
        w.u16(t.var)
        return
    _caps(w, t.caps)
    if t.head == "Adt":
        w.u16(t.adt.module)
        w.u16(t.adt.index)
        w.u8(len(t.args))
    for a in t.args:
        _type(w, a)


def _risk(w: _Writer, r: Risk):
    if r.module is None:
        w.u8(0)
        w.u8(BUILTIN_RISKS.index(r.name))
    else:
        w.u8(1)
        w.u16(r.module)
        w.text(r.name)


def _ref(w: _Writer, ref):
    w.u16(ref.module)
    w.u16(ref.index)


def _opt_ref(w: _Writer, ref):
    if ref is None:
        w.u8(0)
    else:
        w.u8(1)
        _ref(w, ref)


def _slots(w: _Writer, slots):
    w.u8(len(slots))
    for s in slots:
        w.u16(s)


def _cap(w: _Writer, c):
    if isinstance(c, str):
        w.u8(0)
        w.u8(BUILTIN_CAPS.index(c))
    else:
        w.u8(1)
        w.u16(c.module)
        w.u16(c.index)


def _pattern(w: _Writer, p):
    if isinstance(p, ir.PVar):
        w.u8(PAT["PVAR"])
        w.u16(p.slot)
    elif isinstance(p, ir.PWild):
        w.u8(PAT["PWILD"])
    elif isinstance(p, ir.PTuple):
        w.u8(PAT["PTUPLE"])
        w.u8(len(p.elems))
        for e in p.elems:
            _pattern(w, e)
    else:
        w.u8(PAT["PCTOR"])
        _ref(w, p.adt)
        w.u8(p.ctor)
        w.u8(len(p.subs))
        for s in p.subs:
            _pattern(w, s)


def _node(w: _Writer, n):
    if isinstance(n, ir.Lit):
        if n.kind == "uint":
            w.u8(OP["LIT_UINT"])
            w.u64(n.value)
        elif n.kind == "int":
            w.u8(OP["LIT_INT"])
            w.i64(n.value)
        else:
            w.u8(OP["LIT_UNIT"])
    elif isinstance(n, (ir.Move, ir.Copy)):
        w.u8(OP["MOVE"] if isinstance(n, ir.Move) else OP["COPY"])
        w.u16(n.slot)
    elif isinstance(n, ir.Drop):
        w.u8(OP["DROP"])
        _slots(w, n.slots)
        _node(w, n.body)
    elif isinstance(n, ir.Val):
        w.u8(OP["VAL"])
        w.u16(n.module)
        w.u16(n.index)
    elif isinstance(n, ir.Arith):
        w.u8(OP["ADD"] if n.op == "+" else OP["SUB"])
        _node(w, n.left)
        _node(w, n.right)
    elif isinstance(n, ir.Conv):
        w.u8(OP["CONV"])
        w.u8(0 if n.target == "UInt" else 1)
        _node(w, n.arg)
    elif isinstance(n, ir.Construct):
        w.u8(OP["CONSTRUCT"])
        _ref(w, n.adt)
        w.u8(n.ctor)
        w.u8(len(n.targs))
        for t in n.targs:
            _type(w, t)
        w.u8(len(n.args))
        for a in n.args:
            _node(w, a)
    elif isinstance(n, ir.MkTuple):
        w.u8(OP["TUPLE"])
        w.u8(len(n.elems))
        for e in n.elems:
            _node(w, e)
    elif isinstance(n, ir.Call):
        w.u8(OP["CALL"])
        _ref(w, n.fun)
        w.u8(len(n.targs))
        for t in n.targs:
            _type(w, t)
        w.u8(len(n.args))
        for a in n.args:
            _node(w, a)
    elif isinstance(n, ir.Derive):
        w.u8(OP["DERIVE"])
        _node(w, n.ctx)
        _node(w, n.id)
    elif isinstance(n, ir.NewId):
        w.u8(OP["NEW_ID"])
    elif isinstance(n, ir.NewContext):
        w.u8(OP["NEW_CONTEXT"])
        _type(w, n.inner)
    elif isinstance(n, ir.Read):
        w.u8(OP["READ"])
        _opt_ref(w, n.default)
        _node(w, n.ref)
    elif isinstance(n, ir.Let):
        w.u8(OP["LET"])
        _pattern(w, n.pattern)
        _node(w, n.bound)
        _node(w, n.body)
    elif isinstance(n, ir.Case):
        w.u8(OP["CASE"])
        _node(w, n.scrutinee)
        w.u8(len(n.arms))
        for p, b in n.arms:
            _pattern(w, p)
            _node(w, b)
    elif isinstance(n, ir.Modify):
        w.u8(OP["MODIFY"])
        _node(w, n.ref)
        if n.slot is None:
            w.u8(0)
        else:
            w.u8(1)
            w.u16(n.slot)
        _opt_ref(w, n.default)
        _node(w, n.body)
    elif isinstance(n, ir.AndReturn):
        w.u8(OP["ANDRETURN"])
        _node(w, n.value)
        _node(w, n.result)
    elif isinstance(n, ir.CapOp):
        w.u8(OP["ATTACH"] if n.attach else OP["DETACH"])
        _cap(w, n.cap)
        _node(w, n.arg)
    elif isinstance(n, ir.Cycle):
        w.u8(OP["CYCLE"])
        w.u32(n.count)
        _node(w, n.init)
        w.u16(n.slot)
        _node(w, n.body)
        _slots(w, n.after)
    elif isinstance(n, ir.Try):
        w.u8(OP["TRY"])
        _node(w, n.call)
        w.u8(len(n.handlers))
        for h in n.handlers:
            _risk(w, h.risk)
            _slots(w, h.slots)
            _node(w, h.body)
        _slots(w, n.success_drops)
    else:
        raise TypeError(f"cannot encode {type(n).__name__}")


def _fun(w: _Writer, f: ir.BFun):
    w.text(f.name)
    w.u8(VISIBILITY.index(f.visibility))
    if f.visibility == "protected":
        w.u8(f.protected)
    w.u8(int(f.effect))
    _opt_ref(w, f.default_for)
    w.u8(len(f.risks))
    for r in sorted(f.risks, key=risk_sort_key):
        _risk(w, r)
    w.u8(len(f.tparams))
    for p in f.tparams:
        w.text(p)
    w.u8(len(f.params))
    for t, p in f.params:
        _type(w, t)
        _pattern(w, p)
    _type(w, f.ret)
    w.u16(f.slots)
    _node(w, f.body)


def encode(m: ir.BModule) -> bytes:
    w = _Writer()
    w.raw(MAGIC)
    w.u16(VERSION)
    w.text(m.name)
    w.u16(len(m.types))
    for t in m.types:
        w.text(t.name)
        w.u8(int(t.open) | int(t.public) << 1 | int(t.shorthand) << 2)
        _caps(w, t.caps)
        w.u8(len(t.params))
        for p in t.params:
            w.text(p)
        w.u8(len(t.ctors))
        for name, fields in t.ctors:
            w.text(name)
            w.u8(len(fields))
            for f in fields:
                _type(w, f)
    w.u16(len(m.caps))
    for c in m.caps:
        w.text(c.name)
        w.u8(int(c.open))
    w.u16(len(m.imports))
    for a in m.imports:
        w.raw(a)
    w.u16(len(m.risks))
    for r in m.risks:
        w.text(r)
    w.u16(len(m.funs))
    for f in m.funs:
        _fun(w, f)
    w.u16(len(m.vals))
    for v in m.vals:
        w.text(v.name)
        _type(w, v.type)
        w.u16(v.slots)
        _node(w, v.body)
    if m.init is None:
        w.u8(0)
    else:
        w.u8(1)
        _fun(w, m.init)
    return w.bytes()


# ---- decoding ----------------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.depth = 0

    def fail(self, reason: str):
        raise DecodeError(self.pos, reason)

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            self.fail("truncated")
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return b

    def u8(self):
        return self.take(1)[0]

    def u16(self):
        return struct.unpack("<H", self.take(2))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self.take(8))[0]

    def i64(self):
        return struct.unpack("<q", self.take(8))[0]

    def text(self) -> str:
        n = self.u16()
        raw = self.take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            self.fail("invalid utf-8 in name")

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.fail("nesting too deep")

    def leave(self):
        self.depth -= 1


def _rcaps(r: _Reader) -> frozenset:
    mask = r.u8()
    if mask & RESERVED_CAP_BITS:
        r.fail("reserved capability bit set")
    caps = {name for name, bit in CAP_BITS.items() if mask & bit}
    for _ in range(r.u8()):
        caps.add(UserCap(r.u16(), r.u16()))
    return frozenset(caps)


def _rtype(r: _Reader) -> Type:
    r.enter()
    tag = r.u8()
    head = TAG_TYPES.get(tag)
    if head is None:
        r.fail(f"unknown type tag {tag:#x}")
    if head == "Tuple":
        n = r.u8()
        t = tuple_of(_rtype(r) for _ in range(n))
    elif head == "Var":
        t = Type("Var", var=r.u16())
    else:
        caps = _rcaps(r)
        if head == "Adt":
            ref = AdtRef(r.u16(), r.u16())
            args = tuple(_rtype(r) for _ in range(r.u8()))
            t = Type("Adt", args, caps, adt=ref)
        else:
            n = 1 if head in ("Context", "Ref") else 0
            t = Type(head, tuple(_rtype(r) for _ in range(n)), caps)
    r.leave()
    return t


def _rrisk(r: _Reader) -> Risk:
    kind = r.u8()
    if kind == 0:
        i = r.u8()
        if i >= len(BUILTIN_RISKS):
            r.fail("unknown builtin risk")
        return Risk(BUILTIN_RISKS[i])
    if kind == 1:
        mod = r.u16()
        return Risk(r.text(), mod)
    r.fail("bad risk kind")


def _rref(r: _Reader, cls):
    return cls(r.u16(), r.u16())


def _ropt_ref(r: _Reader, cls):
    flag = r.u8()
    if flag == 0:
        return None
    if flag != 1:
        r.fail("bad option flag")
    return _rref(r, cls)


def _rslots(r: _Reader) -> list:
    return [r.u16() for _ in range(r.u8())]


def _rcap(r: _Reader):
    kind = r.u8()
    if kind == 0:
        i = r.u8()
        if i >= len(BUILTIN_CAPS):
            r.fail("unknown builtin capability")
        return BUILTIN_CAPS[i]
    if kind == 1:
        return UserCap(r.u16(), r.u16())
    r.fail("bad capability kind")


def _rpattern(r: _Reader):
    r.enter()
    tag = r.u8()
    if tag == PAT["PVAR"]:
        p = ir.PVar(r.u16())
    elif tag == PAT["PWILD"]:
        p = ir.PWild()
    elif tag == PAT["PTUPLE"]:
        p = ir.PTuple([_rpattern(r) for _ in range(r.u8())])
    elif tag == PAT["PCTOR"]:
        ref = _rref(r, AdtRef)
        ctor = r.u8()
        p = ir.PCtor(ref, ctor, [_rpattern(r) for _ in range(r.u8())])
    else:
        r.fail(f"unknown pattern tag {tag:#x}")
    r.leave()
    return p


def _rnode(r: _Reader):
    r.enter()
    start = r.pos
    op = OP_NAMES.get(r.u8())
    if op is None:
        r.pos = start
        r.fail("unknown opcode")
    if op == "LIT_UINT":
        n = ir.Lit("uint", r.u64())
    elif op == "LIT_INT":
        n = ir.Lit("int", r.i64())
    elif op == "LIT_UNIT":
        n = ir.Lit("unit")
    elif op == "MOVE":
        n = ir.Move(r.u16())
    elif op == "COPY":
        n = ir.Copy(r.u16())
    elif op == "DROP":
        slots = _rslots(r)
        n = ir.Drop(slots, _rnode(r))
    elif op == "VAL":
        n = ir.Val(r.u16(), r.u16())
    elif op in ("ADD", "SUB"):
        left = _rnode(r)
        n = ir.Arith("+" if op == "ADD" else "-", left, _rnode(r))
    elif op == "CONV":
        k = r.u8()
        if k > 1:
            r.fail("bad conversion target")
        n = ir.Conv("UInt" if k == 0 else "Int", _rnode(r))
    elif op == "CONSTRUCT":
        ref = _rref(r, AdtRef)
        ctor = r.u8()
        targs = [_rtype(r) for _ in range(r.u8())]
        n = ir.Construct(ref, ctor, targs, [_rnode(r) for _ in range(r.u8())])
    elif op == "TUPLE":
        n = ir.MkTuple([_rnode(r) for _ in range(r.u8())])
    elif op == "CALL":
        ref = _rref(r, FunRef)
        targs = [_rtype(r) for _ in range(r.u8())]
        n = ir.Call(ref, targs, [_rnode(r) for _ in range(r.u8())])
    elif op == "DERIVE":
        ctx = _rnode(r)
        n = ir.Derive(ctx, _rnode(r))
    elif op == "NEW_ID":
        n = ir.NewId()
    elif op == "NEW_CONTEXT":
        n = ir.NewContext(_rtype(r))
    elif op == "READ":
        default = _ropt_ref(r, FunRef)
        n = ir.Read(_rnode(r), default)
    elif op == "LET":
        pat = _rpattern(r)
        bound = _rnode(r)
        n = ir.Let(pat, bound, _rnode(r))
    elif op == "CASE":
        scrut = _rnode(r)
        arms = []
        for _ in range(r.u8()):
            pat = _rpattern(r)
            arms.append((pat, _rnode(r)))
        n = ir.Case(scrut, arms)
    elif op == "MODIFY":
        ref = _rnode(r)
        flag = r.u8()
        if flag > 1:
            r.fail("bad option flag")
        slot = r.u16() if flag else None
        default = _ropt_ref(r, FunRef)
        n = ir.Modify(ref, slot, default, _rnode(r))
    elif op == "ANDRETURN":
        value = _rnode(r)
        n = ir.AndReturn(value, _rnode(r))
    elif op in ("ATTACH", "DETACH"):
        cap = _rcap(r)
        n = ir.CapOp(op == "ATTACH", cap, _rnode(r))
    elif op == "CYCLE":
        count = r.u32()
        init = _rnode(r)
        slot = r.u16()
        body = _rnode(r)
        n = ir.Cycle(count, init, slot, body, _rslots(r))
    elif op == "TRY":
        call = _rnode(r)
        if not isinstance(call, ir.Call):
            r.fail("try must wrap a call")
        handlers = []
        for _ in range(r.u8()):
            risk = _rrisk(r)
            slots = _rslots(r)
            handlers.append(ir.Handler(risk, slots, _rnode(r)))
        n = ir.Try(call, handlers, _rslots(r))
    r.leave()
    return n


def _rfun(r: _Reader) -> ir.BFun:
    name = r.text()
    vis_i = r.u8()
    if vis_i >= len(VISIBILITY):
        r.fail("bad visibility")
    vis = VISIBILITY[vis_i]
    protected = r.u8() if vis == "protected" else None
    eff = r.u8()
    if eff > int(Effect.ACTIVE):
        r.fail("bad effect")
    default_for = _ropt_ref(r, AdtRef)
    risks = tuple(_rrisk(r) for _ in range(r.u8()))
    tparams = tuple(r.text() for _ in range(r.u8()))
    params = []
    for _ in range(r.u8()):
        t = _rtype(r)
        params.append((t, _rpattern(r)))
    ret = _rtype(r)
    slots = r.u16()
    body = _rnode(r)
    return ir.BFun(name, vis, protected, Effect(eff), default_for, risks, tparams, params, ret, slots, body)


def _decode(data: bytes) -> ir.BModule:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise DecodeError(0, "bad magic")
    version = r.u16()
    if version != VERSION:
        raise DecodeError(4, f"unsupported version {version}")
    m = ir.BModule(r.text())
    for _ in range(r.u16()):
        name = r.text()
        flags = r.u8()
        if flags & ~0b111:
            r.fail("bad type flags")
        caps = _rcaps(r)
        params = tuple(r.text() for _ in range(r.u8()))
        ctors = []
        for _ in range(r.u8()):
            cname = r.text()
            ctors.append((cname, tuple(_rtype(r) for _ in range(r.u8()))))
        m.types.append(ir.BType(name, bool(flags & 1), bool(flags & 2), bool(flags & 4), caps, params, ctors))
    for _ in range(r.u16()):
        name = r.text()
        flag = r.u8()
        if flag > 1:
            r.fail("bad capability flag")
        m.caps.append(ir.BCap(name, bool(flag)))
    for _ in range(r.u16()):
        m.imports.append(r.take(32))
    for _ in range(r.u16()):
        m.risks.append(r.text())
    for _ in range(r.u16()):
        m.funs.append(_rfun(r))
    for _ in range(r.u16()):
        name = r.text()
        t = _rtype(r)
        slots = r.u16()
        m.vals.append(ir.BVal(name, t, slots, _rnode(r)))
    flag = r.u8()
    if flag > 1:
        r.fail("bad init flag")
    if flag:
        m.init = _rfun(r)
    if r.pos != len(data):
        r.fail("trailing bytes")
    return m


def decode(data: bytes) -> ir.BModule:
    """Decode ``data``; raise DecodeError for anything that is not a canonical encoding."""
    try:
        m = _decode(bytes(data))
    except DecodeError:
        raise
    except RecursionError:
        raise DecodeError(0, "nesting too deep") from None
    except Exception as exc:  # any other failure is a malformed input
        raise DecodeError(0, f"malformed module: {exc}") from None
    try:
        again = encode(m)
    except Exception as exc:
        raise DecodeError(0, f"not re-encodable: {exc}") from None
    if again != data:
        first = next((i for i, (a, b) in enumerate(zip(again, data)) if a != b), min(len(again), len(data)))
        raise DecodeError(first, "non-canonical encoding")
    return m
