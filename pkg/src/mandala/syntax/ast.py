"""Surface syntax tree. Positions are carried but excluded from equality."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Pos = tuple  # (line, column)


def _pos():
    return field(default=(0, 0), compare=False, repr=False)


@dataclass
class TypeExpr:
    caps: list[str]
    name: str  # possibly qualified, e.g. "Token.Token"
    args: list["TypeExpr"]
    pos: Pos = _pos()


@dataclass
class TupleTypeExpr:
    elems: list["TypeExpr"]
    pos: Pos = _pos()


# ---- patterns ---------------------------------------------------------------


@dataclass
class PVar:
    name: str
    pos: Pos = _pos()


@dataclass
class PWild:
    pos: Pos = _pos()


@dataclass
class PTuple:
    elems: list["Pattern"]
    pos: Pos = _pos()


@dataclass
class PCtor:
    name: str
    targs: list[TypeExpr]
    subs: list["Pattern"]
    caps: list[str] = field(default_factory=list)  # only on parameters
    pos: Pos = _pos()


Pattern = Union[PVar, PWild, PTuple, PCtor]

# ---- expressions ------------------------------------------------------------


@dataclass
class Lit:
    value: int | None  # None for unit
    kind: str  # "uint" | "int" | "unit"
    pos: Pos = _pos()


@dataclass
class Var:
    name: str
    pos: Pos = _pos()


@dataclass
class Ctor:
    name: str
    targs: list[TypeExpr]
    args: list["Expr"]
    pos: Pos = _pos()


@dataclass
class Call:
    name: str
    targs: list[TypeExpr]
    args: list["Expr"]
    pos: Pos = _pos()


@dataclass
class Tuple:
    elems: list["Expr"]
    pos: Pos = _pos()


@dataclass
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = _pos()


@dataclass
class Let:
    pattern: Pattern
    bound: "Expr"
    body: "Expr"
    pos: Pos = _pos()


@dataclass
class Arm:
    pattern: Pattern
    body: "Expr"
    pos: Pos = _pos()


@dataclass
class Case:
    scrutinee: "Expr"
    arms: list[Arm]
    pos: Pos = _pos()


@dataclass
class Modify:
    ref: "Expr"
    pattern: Pattern
    body: "Expr"
    pos: Pos = _pos()


@dataclass
class AndReturn:
    value: "Expr"
    result: "Expr"
    pos: Pos = _pos()


@dataclass
class Attach:
    expr: "Expr"
    cap: str
    pos: Pos = _pos()


@dataclass
class Detach:
    expr: "Expr"
    cap: str
    pos: Pos = _pos()


@dataclass
class Cycle:
    bound: int
    init: "Expr"
    acc: str
    body: "Expr"
    pos: Pos = _pos()


@dataclass
class Handler:
    risk: str
    names: list[str]
    body: "Expr"
    pos: Pos = _pos()


@dataclass
class Try:
    call: Call
    handlers: list[Handler]
    pos: Pos = _pos()


Expr = Union[Lit, Var, Ctor, Call, Tuple, Binary, Let, Case, Modify, AndReturn, Attach, Detach, Cycle, Try]

# ---- declarations -----------------------------------------------------------


@dataclass
class CtorDecl:
    name: str
    fields: list[TypeExpr]
    pos: Pos = _pos()


@dataclass
class TypeDecl:
    open: bool
    visibility: Optional[str]  # "public" | "private" | None
    caps: list[str]
    name: str
    params: list[str]
    ctors: list[CtorDecl]
    shorthand: bool
    pos: Pos = _pos()


@dataclass
class CapabilityDecl:
    open: bool
    name: str
    pos: Pos = _pos()


@dataclass
class Param:
    pattern: Pattern
    type: Optional[TypeExpr]  # None when the pattern carries the type (PCtor)
    pos: Pos = _pos()


@dataclass
class FunDecl:
    risks: list[str]
    visibility: Optional[str]  # "public" | "private" | "protected" | None
    protected: Optional[str]
    effect: Optional[str]
    default_for: Optional[str]
    name: str
    tparams: list[str]
    params: list[Param]
    body: Expr
    pos: Pos = _pos()


@dataclass
class ValDecl:
    name: str
    expr: Expr
    pos: Pos = _pos()


@dataclass
class InitDecl:
    risks: list[str]
    param: Param
    body: Expr
    pos: Pos = _pos()


Decl = Union[TypeDecl, CapabilityDecl, FunDecl, ValDecl, InitDecl]


@dataclass
class Import:
    path: str
    wildcard: bool
    pos: Pos = _pos()


@dataclass
class AstModule:
    name: str
    imports: list[Import]
    decls: list[Decl]
    pos: Pos = _pos()

    def count(self, kind: type) -> int:
        return sum(isinstance(d, kind) for d in self.decls)
