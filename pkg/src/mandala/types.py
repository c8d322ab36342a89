"""Semantic type model shared by the checker, the bytecode layer, the validator and the runtime.

A type is a head (primitive, tuple, ADT or type variable), its arguments and the
capability set attached to it. Two types are equal only if all three agree.
Module references inside types are *module keys*: ``SELF`` while a module is
being compiled, a bytecode-local import index inside encoded modules, or a
32-byte address once relocated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable, Union

SELF = b""

BUILTIN_CAPS = ("Drop", "Copy", "Persist", "Modify", "Inspect", "Master")
STRUCTURAL = frozenset({"Copy", "Drop", "Persist"})
PRIMITIVES = ("UInt", "Int", "Unit", "ID", "Context", "Ref")
PRIM_ARITY = {"UInt": 0, "Int": 0, "Unit": 0, "ID": 0, "Context": 1, "Ref": 1}
NUMERIC = ("UInt", "Int")

UINT_MAX = 2**64 - 1
INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

ModKey = Union[bytes, int]


@dataclass(frozen=True)
class UserCap:
    module: ModKey
    index: int
    name: str = field(default="", compare=False)

    def __str__(self) -> str:
        return self.name or f"cap#{self.index}"


Cap = Union[str, UserCap]


def cap_sort_key(cap: Cap):
    if isinstance(cap, str):
        return (0, BUILTIN_CAPS.index(cap), b"", 0)
    mod = cap.module
    if isinstance(mod, int):
        return (1, 0, b"", mod, cap.index)
    return (1, 0, mod, 0, cap.index)


class Effect(IntEnum):
    PURE = 0
    INIT = 1
    DEPENDENT = 2
    ACTIVE = 3

    @property
    def keyword(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class AdtRef:
    module: ModKey
    index: int
    name: str = field(default="", compare=False)


@dataclass(frozen=True)
class FunRef:
    module: ModKey
    index: int
    name: str = field(default="", compare=False)


@dataclass(frozen=True)
class Risk:
    name: str
    module: ModKey | None = None  # None for the builtin risks

    def __str__(self) -> str:
        return self.name


BUILTIN_RISKS = ("NumericOverflow", "NumericUnderflow", "EmptyCell")
OVERFLOW = Risk("NumericOverflow")
UNDERFLOW = Risk("NumericUnderflow")
EMPTY_CELL = Risk("EmptyCell")


def risk_sort_key(r: Risk):
    if r.module is None:
        return (0, BUILTIN_RISKS.index(r.name), 0, b"", r.name)
    if isinstance(r.module, int):
        return (1, 0, r.module, b"", r.name)
    return (1, 0, 0, r.module, r.name)


@dataclass(frozen=True)
class Type:
    head: str  # one of PRIMITIVES, "Tuple", "Adt", "Var"
    args: tuple = ()
    caps: frozenset = frozenset()
    adt: AdtRef | None = None
    var: int = -1

    def has(self, cap: Cap) -> bool:
        return cap in self.caps

    @property
    def is_numeric(self) -> bool:
        return self.head in NUMERIC

    def __str__(self) -> str:
        return render(self)


def prim(head: str, args: Iterable[Type] = (), caps: Iterable[Cap] = ()) -> Type:
    return Type(head, tuple(args), frozenset(caps) | STRUCTURAL)


def tuple_of(elems: Iterable[Type]) -> Type:
    elems = tuple(elems)
    caps = set(STRUCTURAL)
    for e in elems:
        caps &= e.caps
    return Type("Tuple", elems, frozenset(caps))


def adt(ref: AdtRef, args: Iterable[Type] = (), caps: Iterable[Cap] = ()) -> Type:
    return Type("Adt", tuple(args), frozenset(caps), adt=ref)


def tvar(index: int) -> Type:
    return Type("Var", var=index)


UINT = prim("UInt")
INT = prim("Int")
UNIT = prim("Unit")
ID = prim("ID")
MASTER_ID = prim("ID", caps=("Master",))


def with_caps(t: Type, caps: Iterable[Cap]) -> Type:
    caps = frozenset(caps)
    if t.head in PRIMITIVES:
        caps |= STRUCTURAL
    if t.head == "Tuple":
        return t
    return Type(t.head, t.args, caps, t.adt, t.var)


def subst(t: Type, targs: tuple) -> Type:
    """Replace type variables by ``targs`` (a variable keeps the caps of its binding)."""
    if t.head == "Var":
        if t.var < len(targs) and targs[t.var] is not None:
            return targs[t.var]
        return t
    if not t.args:
        return t
    new_args = tuple(subst(a, targs) for a in t.args)
    if t.head == "Tuple":
        return tuple_of(new_args)
    return Type(t.head, new_args, t.caps, t.adt, t.var)


def has_vars(t: Type) -> bool:
    return t.head == "Var" or any(has_vars(a) for a in t.args)


def map_modules(t: Type, fn: Callable[[ModKey], ModKey]) -> Type:
    caps = frozenset(map_cap(c, fn) for c in t.caps)
    args = tuple(map_modules(a, fn) for a in t.args)
    ref = t.adt
    if ref is not None:
        ref = AdtRef(fn(ref.module), ref.index, ref.name)
    if t.head == "Tuple":
        return tuple_of(args)
    return Type(t.head, args, caps, ref, t.var)


def map_cap(c: Cap, fn: Callable[[ModKey], ModKey]) -> Cap:
    if isinstance(c, UserCap):
        return UserCap(fn(c.module), c.index, c.name)
    return c


def map_risk(r: Risk, fn: Callable[[ModKey], ModKey]) -> Risk:
    if r.module is None:
        return r
    return Risk(r.name, fn(r.module))


def accepts(required: Type, actual: Type) -> bool:
    """Width subsumption: same shape, exact arguments, ``required.caps`` within ``actual.caps``."""
    if required.head != actual.head:
        return False
    if required.head == "Tuple":
        return len(required.args) == len(actual.args) and all(
            accepts(r, a) for r, a in zip(required.args, actual.args)
        )
    if required.head == "Var":
        return required.var == actual.var and required.caps <= actual.caps
    if required.adt != actual.adt or required.args != actual.args:
        return False
    return required.caps <= actual.caps


def unify(pattern: Type, actual: Type, binding: list, top: bool = True) -> bool:
    """Bind type variables of ``pattern`` (indices into ``binding``) against ``actual``.

    At the top level only the shape has to agree (capabilities are checked
    afterwards with :func:`accepts`); nested positions must match exactly.
    """
    if pattern.head == "Var" and pattern.var < len(binding):
        bound = binding[pattern.var]
        if bound is None:
            binding[pattern.var] = actual
            return True
        return bound == actual
    if pattern.head != actual.head or len(pattern.args) != len(actual.args):
        return False
    if pattern.head == "Adt" and pattern.adt != actual.adt:
        return False
    if pattern.head == "Var" and pattern.var != actual.var:
        return False
    if not top and pattern.head != "Tuple" and pattern.caps != actual.caps:
        return False
    nested_top = top and pattern.head == "Tuple"
    return all(unify(p, a, binding, nested_top) for p, a in zip(pattern.args, actual.args))


def render_caps(caps: Iterable[Cap], hide: frozenset = frozenset()) -> str:
    names = [str(c) for c in sorted(caps, key=cap_sort_key) if c not in hide]
    return " ".join(names)


def render(t: Type, var_names: tuple = ()) -> str:
    if t.head == "Tuple":
        return "(" + ", ".join(render(a, var_names) for a in t.args) + ")"
    if t.head == "Var":
        base = var_names[t.var] if t.var < len(var_names) else f"T{t.var}"
    elif t.head == "Adt":
        base = t.adt.name or f"type#{t.adt.index}"
    else:
        base = t.head
    if t.args:
        base += "[" + ", ".join(render(a, var_names) for a in t.args) + "]"
    hide = STRUCTURAL if t.head in PRIMITIVES else frozenset()
    caps = render_caps(t.caps, hide)
    return f"{caps} {base}" if caps else base
