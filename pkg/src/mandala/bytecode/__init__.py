"""Compilation to the tree IR and its canonical binary form."""

from __future__ import annotations

from ..interface import CapInfo, CtorInfo, FunSig, ModuleInterface, TypeInfo, ValInfo
from ..types import AdtRef, FunRef, UserCap, map_cap, map_modules, map_risk
from . import ir
from .codec import DecodeError, address, decode, encode
from .compiler import CompileError, compile_module

__all__ = [
    "ir",
    "encode",
    "decode",
    "address",
    "DecodeError",
    "compile_module",
    "CompileError",
    "resolver",
    "interface_from_module",
]


def resolver(m: ir.BModule, addr: bytes):
    """Map the module-local keys of ``m`` (0 = itself) to addresses."""
    imports = list(m.imports)

    def fn(key):
        if key == 0:
            return addr
        return imports[key - 1]

    return fn


def interface_from_module(m: ir.BModule, addr: bytes) -> ModuleInterface:
    """The interface of a deployed module, with every reference as an address."""
    fn = resolver(m, addr)

    def ty(t):
        return map_modules(t, fn)

    types = [
        TypeInfo(
            AdtRef(addr, i, t.name),
            t.name,
            t.open,
            t.public,
            frozenset(map_cap(c, fn) for c in t.caps),
            tuple(t.params),
            [CtorInfo(name, tuple(ty(f) for f in fields)) for name, fields in t.ctors],
            t.shorthand,
        )
        for i, t in enumerate(m.types)
    ]
    caps = [CapInfo(UserCap(addr, i, c.name), c.name, c.open) for i, c in enumerate(m.caps)]
    funs = [
        FunSig(
            FunRef(addr, i, f.name),
            f.name,
            f.visibility,
            f.protected,
            f.effect,
            frozenset(map_risk(r, fn) for r in f.risks),
            tuple(f.tparams),
            tuple(ty(t) for t, _ in f.params),
            ty(f.ret),
            AdtRef(fn(f.default_for.module), f.default_for.index) if f.default_for is not None else None,
        )
        for i, f in enumerate(m.funs)
    ]
    vals = [ValInfo(addr, i, v.name, ty(v.type)) for i, v in enumerate(m.vals)]
    return ModuleInterface(addr, m.name, types, caps, funs, vals, list(m.risks), m.init is not None)
