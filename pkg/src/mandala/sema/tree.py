"""Typed, name-resolved expression tree produced by the type checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..interface import FunSig, TypeInfo, ValInfo
from ..types import AdtRef, Cap, Effect, Risk, Type


class Binding:
    """A local variable. Identity matters: two bindings never compare equal."""

    __slots__ = ("name", "type", "pos", "uses", "fate")

    def __init__(self, name: str, type: Type, pos):
        self.name = name
        self.type = type
        self.pos = pos
        self.uses = 0
        self.fate = None  # "moved" | "copied" | "dropped", filled by the linear check

    def __repr__(self) -> str:
        return f"Binding({self.name}: {self.type})"


@dataclass(eq=False)
class TNode:
    type: Type
    pos: tuple


@dataclass(eq=False)
class TLit(TNode):
    value: Optional[int] = None


@dataclass(eq=False)
class TVar(TNode):
    binding: Binding = None
    kind: str = "move"  # "move" | "copy", set by the linear check


@dataclass(eq=False)
class TVal(TNode):
    val: ValInfo = None


@dataclass(eq=False)
class TArith(TNode):
    op: str = "+"
    left: TNode = None
    right: TNode = None


@dataclass(eq=False)
class TConv(TNode):
    arg: TNode = None


@dataclass(eq=False)
class TCtor(TNode):
    info: TypeInfo = None
    targs: tuple = ()
    ctor: int = 0
    args: list = field(default_factory=list)


@dataclass(eq=False)
class TTuple(TNode):
    elems: list = field(default_factory=list)


@dataclass(eq=False)
class TCall(TNode):
    sig: FunSig = None
    targs: tuple = ()
    args: list = field(default_factory=list)


@dataclass(eq=False)
class TBuiltin(TNode):
    name: str = ""  # derive | read | id_new | context_new
    args: list = field(default_factory=list)
    inner: Optional[Type] = None
    default: Optional[FunSig] = None


# ---- patterns --------------------------------------------------------------


@dataclass(eq=False)
class TPat:
    type: Type
    pos: tuple


@dataclass(eq=False)
class TPVar(TPat):
    binding: Binding = None


@dataclass(eq=False)
class TPWild(TPat):
    pass


@dataclass(eq=False)
class TPTuple(TPat):
    elems: list = field(default_factory=list)


@dataclass(eq=False)
class TPCtor(TPat):
    info: TypeInfo = None
    targs: tuple = ()
    ctor: int = 0
    subs: list = field(default_factory=list)


def pattern_bindings(p: TPat) -> list:
    if isinstance(p, TPVar):
        return [p.binding]
    if isinstance(p, TPTuple):
        return [b for e in p.elems for b in pattern_bindings(e)]
    if isinstance(p, TPCtor):
        return [b for e in p.subs for b in pattern_bindings(e)]
    return []


# ---- binders and control -----------------------------------------------------


@dataclass(eq=False)
class TLet(TNode):
    pattern: TPat = None
    bound: TNode = None
    body: TNode = None
    drops: list = field(default_factory=list)  # bindings dropped before the body


@dataclass(eq=False)
class TArm:
    pattern: TPat
    body: TNode
    drops: list = field(default_factory=list)


@dataclass(eq=False)
class TCase(TNode):
    scrutinee: TNode = None
    arms: list = field(default_factory=list)


@dataclass(eq=False)
class TModify(TNode):
    ref: TNode = None
    binding: Binding = None
    body: TNode = None
    inner: Type = None
    default: Optional[FunSig] = None
    returns: bool = False
    drops: list = field(default_factory=list)


@dataclass(eq=False)
class TAndReturn(TNode):
    value: TNode = None
    result: TNode = None


@dataclass(eq=False)
class TCapOp(TNode):
    attach: bool = True
    cap: Cap = None
    arg: TNode = None


@dataclass(eq=False)
class TCycle(TNode):
    bound: int = 0
    init: TNode = None
    acc: Binding = None
    body: TNode = None
    drops: list = field(default_factory=list)  # at the start of each iteration
    after: list = field(default_factory=list)  # captured bindings released after the loop


@dataclass(eq=False)
class THandler:
    risk: Risk
    bindings: list
    body: TNode
    pos: tuple
    drops: list = field(default_factory=list)


@dataclass(eq=False)
class TTry(TNode):
    call: TCall = None
    handlers: list = field(default_factory=list)
    success_drops: list = field(default_factory=list)


# ---- declarations -----------------------------------------------------------


@dataclass(eq=False)
class TFunction:
    sig: FunSig
    params: list  # TPat per parameter
    body: TNode
    pos: tuple
    drops: list = field(default_factory=list)
    is_init: bool = False


@dataclass(eq=False)
class TValDecl:
    info: ValInfo
    expr: TNode
    pos: tuple


@dataclass(eq=False)
class TCapDecl:
    name: str
    open: bool


@dataclass(eq=False)
class TypedModule:
    name: str
    types: list  # TypeInfo (module key SELF)
    caps: list  # CapInfo
    funs: list  # TFunction
    vals: list  # TValDecl
    init: Optional[TFunction]
    risks: list  # custom risk names
    imports: list  # ModuleInterface, in scope order
    type_decl_pos: list = field(default_factory=list)


def children(node: TNode) -> list:
    """Direct sub-expressions in evaluation order."""
    if isinstance(node, (TLit, TVar, TVal)):
        return []
    if isinstance(node, TArith):
        return [node.left, node.right]
    if isinstance(node, TConv):
        return [node.arg]
    if isinstance(node, (TCtor, TCall, TBuiltin)):
        return list(node.args)
    if isinstance(node, TTuple):
        return list(node.elems)
    if isinstance(node, TLet):
        return [node.bound, node.body]
    if isinstance(node, TCase):
        return [node.scrutinee, *(a.body for a in node.arms)]
    if isinstance(node, TModify):
        return [node.ref, node.body]
    if isinstance(node, TAndReturn):
        return [node.value, node.result]
    if isinstance(node, TCapOp):
        return [node.arg]
    if isinstance(node, TCycle):
        return [node.init, node.body]
    if isinstance(node, TTry):
        return [node.call, *(h.body for h in node.handlers)]
    raise TypeError(type(node).__name__)


def walk(node: TNode):
    yield node
    for c in children(node):
        yield from walk(c)
