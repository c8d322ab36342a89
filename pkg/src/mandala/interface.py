"""What a deployed module exposes to the modules compiled after it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Protocol

from .types import AdtRef, Effect, FunRef, Risk, Type, UserCap, map_cap, map_modules, map_risk


@dataclass
class CtorInfo:
    name: str
    fields: tuple  # of Type; type variables index the owning type's parameters


@dataclass
class TypeInfo:
    ref: AdtRef
    name: str
    open: bool
    public: bool
    caps: frozenset
    params: tuple
    ctors: list
    shorthand: bool = True

    def ctor_index(self, name: str) -> int | None:
        for i, c in enumerate(self.ctors):
            if c.name == name:
                return i
        return None


@dataclass
class CapInfo:
    ref: UserCap
    name: str
    open: bool


@dataclass
class FunSig:
    ref: FunRef
    name: str
    visibility: str  # public | private | protected
    protected: Optional[int]
    effect: Effect
    risks: frozenset
    tparams: tuple
    params: tuple
    ret: Type
    default_for: Optional[AdtRef] = None


@dataclass
class ValInfo:
    module: object
    index: int
    name: str
    type: Type


@dataclass
class ModuleInterface:
    address: bytes
    name: str
    types: list = field(default_factory=list)
    caps: list = field(default_factory=list)
    funs: list = field(default_factory=list)
    vals: list = field(default_factory=list)
    risks: list = field(default_factory=list)  # custom risk names declared here
    has_init: bool = False

    def public_types(self) -> Iterator[TypeInfo]:
        return (t for t in self.types if t.public)


class Registry(Protocol):
    """Read-only view of the deployed universe used during elaboration and validation."""

    def address_of(self, name: str) -> Optional[bytes]: ...

    def module_names(self) -> list: ...

    def interface(self, address: bytes) -> Optional[ModuleInterface]: ...

    def default_for(self, ref: AdtRef) -> Optional[FunRef]: ...

    def gas_bound(self, ref: FunRef) -> Optional[int]: ...


class EmptyRegistry:
    def address_of(self, name):
        return None

    def module_names(self):
        return []

    def interface(self, address):
        return None

    def default_for(self, ref):
        return None

    def gas_bound(self, ref):
        return None



def map_interface(iface: ModuleInterface, fn, address: bytes | None = None) -> ModuleInterface:
    """Rewrite every module key inside ``iface`` through ``fn``."""

    def ty(t):
        return map_modules(t, fn)

    def adt_ref(r):
        return AdtRef(fn(r.module), r.index, r.name)

    types = [
        TypeInfo(
            adt_ref(t.ref),
            t.name,
            t.open,
            t.public,
            frozenset(map_cap(c, fn) for c in t.caps),
            t.params,
            [CtorInfo(c.name, tuple(ty(f) for f in c.fields)) for c in t.ctors],
            t.shorthand,
        )
        for t in iface.types
    ]
    caps = [CapInfo(map_cap(c.ref, fn), c.name, c.open) for c in iface.caps]
    funs = [
        FunSig(
            FunRef(fn(f.ref.module), f.ref.index, f.ref.name),
            f.name,
            f.visibility,
            f.protected,
            f.effect,
            frozenset(map_risk(r, fn) for r in f.risks),
            f.tparams,
            tuple(ty(p) for p in f.params),
            ty(f.ret),
            adt_ref(f.default_for) if f.default_for is not None else None,
        )
        for f in iface.funs
    ]
    vals = [ValInfo(fn(v.module), v.index, v.name, ty(v.type)) for v in iface.vals]
    return ModuleInterface(
        iface.address if address is None else address,
        iface.name,
        types,
        caps,
        funs,
        vals,
        list(iface.risks),
        iface.has_init,
    )


class MemoryRegistry:
    """A registry held in memory; also used as an overlay on top of another registry."""

    def __init__(self, base: Registry | None = None):
        self.base = base if base is not None else EmptyRegistry()
        self.names: dict = {}
        self.order: list = []
        self.ifaces: dict = {}
        self.defaults: dict = {}
        self.bounds: dict = {}

    def add(self, iface: ModuleInterface, bounds: dict | None = None):
        self.names[iface.name] = iface.address
        self.order.append(iface.name)
        self.ifaces[iface.address] = iface
        for f in iface.funs:
            if f.default_for is not None:
                self.defaults[f.default_for] = f.ref
        for ref, b in (bounds or {}).items():
            self.bounds[ref] = b

    def address_of(self, name):
        if name in self.names:
            return self.names[name]
        return self.base.address_of(name)

    def module_names(self):
        return [n for n in self.base.module_names() if n not in self.names] + list(self.order)

    def interface(self, address):
        if address in self.ifaces:
            return self.ifaces[address]
        return self.base.interface(address)

    def default_for(self, ref):
        if ref in self.defaults:
            return self.defaults[ref]
        return self.base.default_for(ref)

    def gas_bound(self, ref):
        if ref in self.bounds:
            return self.bounds[ref]
        return self.base.gas_bound(ref)
