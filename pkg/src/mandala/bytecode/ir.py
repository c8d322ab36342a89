"""Tree-shaped intermediate representation: the unit that is encoded, deployed and validated.

Module keys inside an IR module are integers: 0 is the module itself and
``k`` is ``imports[k - 1]``. Local variables live in numbered frame slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..types import AdtRef, Effect, FunRef, Risk, Type

MAGIC = b"MDLC"
VERSION = 1  # sha256 addresses, cost table v1


# ---- nodes --------------------------------------------------------------------------


@dataclass
class Lit:
    kind: str  # "uint" | "int" | "unit"
    value: Optional[int] = None


@dataclass
class Move:
    slot: int


@dataclass
class Copy:
    slot: int


@dataclass
class Drop:
    slots: list
    body: object


@dataclass
class Val:
    module: int
    index: int


@dataclass
class Arith:
    op: str  # "+" | "-"
    left: object
    right: object


@dataclass
class Conv:
    target: str  # "UInt" | "Int"
    arg: object


@dataclass
class Construct:
    adt: AdtRef
    ctor: int
    targs: list
    args: list


@dataclass
class MkTuple:
    elems: list


@dataclass
class Call:
    fun: FunRef
    targs: list
    args: list


@dataclass
class Derive:
    ctx: object
    id: object


@dataclass
class NewId:
    pass


@dataclass
class NewContext:
    inner: Type


@dataclass
class Read:
    ref: object
    default: Optional[FunRef]


@dataclass
class Let:
    pattern: object
    bound: object
    body: object


@dataclass
class Case:
    scrutinee: object
    arms: list  # of (pattern, body)


@dataclass
class Modify:
    ref: object
    slot: Optional[int]  # None: the old content is discarded
    default: Optional[FunRef]
    body: object


@dataclass
class AndReturn:
    value: object
    result: object


@dataclass
class CapOp:
    attach: bool
    cap: object
    arg: object


@dataclass
class Cycle:
    count: int
    init: object
    slot: int
    body: object
    after: list


@dataclass
class Handler:
    risk: Risk
    slots: list
    body: object


@dataclass
class Try:
    call: Call
    handlers: list
    success_drops: list


# ---- patterns -------------------------------------------------------------------------


@dataclass
class PVar:
    slot: int


@dataclass
class PWild:
    pass


@dataclass
class PTuple:
    elems: list


@dataclass
class PCtor:
    adt: AdtRef
    ctor: int
    subs: list


# ---- tables ---------------------------------------------------------------------------


@dataclass
class BType:
    name: str
    open: bool
    public: bool
    shorthand: bool
    caps: frozenset
    params: tuple
    ctors: list  # of (name, tuple of field types)


@dataclass
class BCap:
    name: str
    open: bool


@dataclass
class BFun:
    name: str
    visibility: str  # public | private | protected
    protected: Optional[int]
    effect: Effect
    default_for: Optional[AdtRef]
    risks: tuple  # sorted
    tparams: tuple
    params: list  # of (Type, pattern)
    ret: Type
    slots: int
    body: object


@dataclass
class BVal:
    name: str
    type: Type
    slots: int
    body: object


@dataclass
class BModule:
    name: str
    types: list = field(default_factory=list)
    caps: list = field(default_factory=list)
    imports: list = field(default_factory=list)  # 32-byte addresses
    funs: list = field(default_factory=list)
    vals: list = field(default_factory=list)
    init: Optional[BFun] = None
    risks: list = field(default_factory=list)  # custom risk names declared here


def children(node) -> list:
    """Sub-nodes of an IR node in evaluation order (handlers and arms last)."""
    if isinstance(node, (Lit, Move, Copy, Val, NewId, NewContext)):
        return []
    if isinstance(node, Drop):
        return [node.body]
    if isinstance(node, Arith):
        return [node.left, node.right]
    if isinstance(node, (Conv, CapOp)):
        return [node.arg]
    if isinstance(node, (Construct, Call)):
        return list(node.args)
    if isinstance(node, MkTuple):
        return list(node.elems)
    if isinstance(node, Derive):
        return [node.ctx, node.id]
    if isinstance(node, Read):
        return [node.ref]
    if isinstance(node, Let):
        return [node.bound, node.body]
    if isinstance(node, Case):
        return [node.scrutinee] + [b for _, b in node.arms]
    if isinstance(node, Modify):
        return [node.ref, node.body]
    if isinstance(node, AndReturn):
        return [node.value, node.result]
    if isinstance(node, Cycle):
        return [node.init, node.body]
    if isinstance(node, Try):
        return [node.call] + [h.body for h in node.handlers]
    raise TypeError(type(node).__name__)


def walk(node):
    yield node
    for c in children(node):
        yield from walk(c)


def all_functions(m: BModule) -> list:
    return list(m.funs) + ([m.init] if m.init is not None else [])
