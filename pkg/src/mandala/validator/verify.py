"""Deployment-time verification of encoded modules.

Nothing produced by the compiler is trusted: the IR is re-typed from scratch,
the MOVE/COPY/DROP annotations are audited slot by slot, and the capability,
visibility, effect and risk rules are checked again against the deployed
universe. Only a module that passes gets gas bounds and may be deployed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..bytecode import DecodeError, address, decode, interface_from_module, ir
from ..interface import FunSig, ModuleInterface
from ..sema.exhaustive import exhaustive
from ..types import (
    EMPTY_CELL,
    MASTER_ID,
    OVERFLOW,
    PRIMITIVES,
    STRUCTURAL,
    INT,
    UINT,
    UNDERFLOW,
    UNIT,
    AdtRef,
    Effect,
    FunRef,
    Risk,
    Type,
    UserCap,
    accepts,
    adt,
    map_cap,
    map_modules,
    prim,
    render,
    subst,
    tuple_of,
    tvar,
    with_caps,
)
from .gas import COSTS, CostTable, gas_bound

V_CODES = ("V-DECODE", "V-TYPE", "V-LINEAR", "V-CAP", "V-EFFECT", "V-RISK", "V-DEP-MISSING", "V-DEFAULT-DUP")
NEVER_ATTACHABLE = ("Master", "Modify")


class Rejection(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(f"{code} {detail}")
        self.code = code
        self.detail = detail

    def line(self) -> str:
        return f"REJECT {self.code} {self.detail}"


def _reject(code, detail):
    raise Rejection(code, detail)


@dataclass
class VerifiedModule:
    address: bytes
    data: bytes
    module: ir.BModule
    interface: ModuleInterface
    bounds: list  # per function, in table order
    val_bounds: list
    init_bound: int | None
    deps: list = field(default_factory=list)

    def report(self) -> list:
        lines = [f"OK {self.address.hex()} fn={f.name} bound={b}" for f, b in zip(self.module.funs, self.bounds)]
        for v, b in zip(self.module.vals, self.val_bounds):
            lines.append(f"OK {self.address.hex()} val={v.name} bound={b}")
        if self.init_bound is not None:
            lines.append(f"OK {self.address.hex()} fn=init bound={self.init_bound}")
        if not lines:
            lines.append(f"OK {self.address.hex()}")
        return lines

    def fun_ref(self, name: str) -> FunRef | None:
        for i, f in enumerate(self.module.funs):
            if f.name == name:
                return FunRef(self.address, i, name)
        return None


def _tails(n) -> list:
    if isinstance(n, ir.Let):
        return _tails(n.body)
    if isinstance(n, ir.Drop):
        return _tails(n.body)
    if isinstance(n, ir.Case):
        return [t for _, b in n.arms for t in _tails(b)]
    return [n]


class _Universe:
    def __init__(self, m: ir.BModule, addr: bytes, registry):
        self.m = m
        self.addr = addr
        self.registry = registry
        self.deps: list = []
        for a in m.imports:
            if a == addr or a in self.deps:
                _reject("V-DECODE", "duplicate or self import")
            if registry.interface(a) is None:
                _reject("V-DEP-MISSING", f"import {a.hex()} is not deployed")
            self.deps.append(a)
        try:
            self.own = interface_from_module(m, addr)
        except IndexError:
            _reject("V-TYPE", "module key out of range")

    def key(self, k):
        if k == 0:
            return self.addr
        if not 1 <= k <= len(self.m.imports):
            _reject("V-TYPE", f"module key {k} out of range")
        return self.m.imports[k - 1]

    def ty(self, t: Type) -> Type:
        return map_modules(t, self.key)

    def iface(self, a: bytes) -> ModuleInterface:
        if a == self.addr:
            return self.own
        return self.registry.interface(a)

    def type_info(self, ref: AdtRef):
        types = self.iface(ref.module).types
        if not 0 <= ref.index < len(types):
            _reject("V-TYPE", f"type index {ref.index} out of range")
        return types[ref.index]

    def cap_info(self, cap: UserCap):
        caps = self.iface(cap.module).caps
        if not 0 <= cap.index < len(caps):
            _reject("V-TYPE", f"capability index {cap.index} out of range")
        return caps[cap.index]

    def fun(self, ref: FunRef) -> FunSig:
        funs = self.iface(ref.module).funs
        if not 0 <= ref.index < len(funs):
            _reject("V-TYPE", f"function index {ref.index} out of range")
        return funs[ref.index]

    def risk(self, r: Risk) -> Risk:
        if r.module is None:
            return r
        a = self.key(r.module)
        if r.name not in self.iface(a).risks:
            _reject("V-RISK", f"risk {r.name} is not declared by its module")
        return Risk(r.name, a)

    def ctors_of(self, t: Type) -> list:
        info = self.type_info(t.adt)
        return [tuple(subst(f, t.args) for f in c.fields) for c in info.ctors]

    def wf(self, t: Type, ntparams: int):
        """Well-formedness of an address-form type."""
        if t.head == "Var":
            if not 0 <= t.var < ntparams:
                _reject("V-TYPE", f"type variable {t.var} out of range")
            return
        if t.head == "Tuple":
            for a in t.args:
                self.wf(a, ntparams)
            return
        for c in t.caps:
            if isinstance(c, UserCap):
                self.cap_info(c)
            elif c == "Master" and t.head != "ID" or c == "Modify" and t.head != "Ref":
                _reject("V-CAP", f"{c} cannot apply to {t.head}")
            elif c == "Inspect" and t.head in PRIMITIVES:
                _reject("V-CAP", f"Inspect cannot apply to {t.head}")
        if t.head in PRIMITIVES:
            if not STRUCTURAL <= t.caps:
                _reject("V-TYPE", f"primitive {t.head} without its structural capabilities")
            if t.head in ("Ref", "Context") and "Persist" not in t.args[0].caps:
                _reject("V-TYPE", f"{t.head} content lacks Persist")
        else:
            info = self.type_info(t.adt)
            if len(t.args) != len(info.params):
                _reject("V-TYPE", f"{info.name} expects {len(info.params)} type argument(s)")
        for a in t.args:
            self.wf(a, ntparams)

    def default_for(self, t: Type, before: int | None) -> FunRef | None:
        if t.head != "Adt":
            return None
        if t.adt.module == self.addr:
            for i, f in enumerate(self.own.funs):
                if f.default_for == t.adt and (before is None or i < before):
                    return f.ref
            return None
        return self.registry.default_for(t.adt)


class _Body:
    """Types one function or val body while auditing slot usage."""

    def __init__(self, u: _Universe, ntparams: int, nslots: int, effect: Effect, fun_index: int | None, val_index: int | None):
        self.u = u
        self.ntparams = ntparams
        self.nslots = nslots
        self.effect = effect
        self.fun_index = fun_index
        self.val_index = val_index
        self.env: dict = {}
        self.live: dict = {}
        self.risks: set = set()
        self.vals_used: set = set()
        self.calls: set = set()
        self.pure_depth = 0
        self.returns: dict = {}

    # ---- slots ---------------------------------------------------------------------

    def bind(self, slot: int, t: Type):
        if not 0 <= slot < self.nslots:
            _reject("V-TYPE", f"slot {slot} out of range")
        if slot in self.env:
            _reject("V-LINEAR", f"slot {slot} bound twice")
        self.env[slot] = t
        self.live[slot] = True

    def consume(self, slot: int, why: str) -> Type:
        if slot not in self.env:
            _reject("V-TYPE", f"slot {slot} used before it is bound")
        if not self.live[slot]:
            _reject("V-LINEAR", f"slot {slot} {why} after it was consumed")
        return self.env[slot]

    def drop(self, slot: int):
        t = self.consume(slot, "dropped")
        if "Drop" not in t.caps:
            _reject("V-LINEAR", f"slot {slot} of type {render(t)} dropped without Drop")
        self.live[slot] = False

    def closed(self, slots):
        for s in slots:
            if self.live.get(s):
                _reject("V-LINEAR", f"slot {s} of type {render(self.env[s])} is never consumed")

    def snapshot(self) -> dict:
        return dict(self.live)

    # ---- effects ---------------------------------------------------------------------

    def need(self, e: Effect, what: str):
        if self.pure_depth and e > Effect.PURE:
            _reject("V-EFFECT", f"{what} inside a modify transition")
        if e > self.effect:
            _reject("V-EFFECT", f"{what} needs {e.keyword}, the function is {self.effect.keyword}")

    # ---- patterns --------------------------------------------------------------------

    def pattern(self, p, t: Type) -> list:
        """Bind ``p`` against ``t``; return the slots it binds."""
        if isinstance(p, ir.PVar):
            self.bind(p.slot, t)
            return [p.slot]
        if isinstance(p, ir.PWild):
            if "Drop" not in t.caps:
                _reject("V-LINEAR", f"wildcard discards {render(t)} without Drop")
            return []
        if isinstance(p, ir.PTuple):
            if t.head != "Tuple" or len(t.args) != len(p.elems):
                _reject("V-TYPE", f"tuple pattern against {render(t)}")
            return [s for e, et in zip(p.elems, t.args) for s in self.pattern(e, et)]
        ref = AdtRef(self.u.key(p.adt.module), p.adt.index)
        if t.head != "Adt" or t.adt != ref:
            _reject("V-TYPE", f"constructor pattern against {render(t)}")
        info = self.u.type_info(ref)
        if ref.module != self.u.addr and "Inspect" not in t.caps:
            _reject("V-CAP", f"unpacking {info.name} outside its module without Inspect")
        if not 0 <= p.ctor < len(info.ctors):
            _reject("V-TYPE", "constructor index out of range")
        fields = info.ctors[p.ctor].fields
        if len(fields) != len(p.subs):
            _reject("V-TYPE", f"{info.ctors[p.ctor].name} pattern arity")
        return [s for sp, f in zip(p.subs, fields) for s in self.pattern(sp, subst(f, t.args))]

    def irrefutable(self, p, t: Type):
        if not exhaustive([[p]], [t], self.u.ctors_of):
            _reject("V-TYPE", "refutable pattern in a binding position")

    # ---- expressions -----------------------------------------------------------------

    def targs(self, targs) -> tuple:
        out = tuple(self.u.ty(t) for t in targs)
        for t in out:
            self.u.wf(t, self.ntparams)
        return out

    def cell_default(self, inner: Type, given) -> None:
        want = self.u.default_for(inner, self.fun_index)
        got = None if given is None else FunRef(self.u.key(given.module), given.index)
        if want != got:
            _reject("V-TYPE", "cell default does not match the registered default")
        if got is None:
            self.risks.add(EMPTY_CELL)
        else:
            self.risks |= set(self.u.fun(got).risks)

    def call(self, n: ir.Call, handled=frozenset()) -> tuple:
        ref = FunRef(self.u.key(n.fun.module), n.fun.index)
        sig = self.u.fun(ref)
        if ref.module == self.u.addr:
            if self.fun_index is not None and ref.index >= self.fun_index:
                _reject("V-DEP-MISSING", f"call to {sig.name}, which is not deployed before the caller")
            self.calls.add(ref.index)
        targs = self.targs(n.targs)
        if len(targs) != len(sig.tparams) or len(n.args) != len(sig.params):
            _reject("V-TYPE", f"call to {sig.name} with wrong arity")
        types = []
        for a, pt in zip(n.args, sig.params):
            at = self.synth(a)
            want = subst(pt, targs)
            if not accepts(want, at):
                _reject("V-TYPE", f"argument {render(at)} does not fit {render(want)} of {sig.name}")
            types.append(at)
        if sig.visibility == "private" and ref.module != self.u.addr:
            _reject("V-CAP", f"{sig.name} is private to its module")
        if sig.visibility == "protected":
            t = targs[sig.protected]
            if t.head != "Adt" or t.adt.module != self.u.addr:
                _reject("V-CAP", f"{sig.name} is protected by a type this module does not define")
        self.need(sig.effect, f"call to {sig.name}")
        self.risks |= set(sig.risks) - set(handled)
        return subst(sig.ret, targs), types, sig

    def synth(self, n) -> Type:
        u = self.u
        if isinstance(n, ir.Lit):
            return {"uint": UINT, "int": INT, "unit": UNIT}[n.kind]
        if isinstance(n, ir.Move):
            t = self.consume(n.slot, "moved")
            self.live[n.slot] = False
            return t
        if isinstance(n, ir.Copy):
            t = self.consume(n.slot, "copied")
            if "Copy" not in t.caps:
                _reject("V-LINEAR", f"slot {n.slot} of type {render(t)} copied without Copy")
            return t
        if isinstance(n, ir.Drop):
            for s in n.slots:
                self.drop(s)
            return self.synth(n.body)
        if isinstance(n, ir.Val):
            a = u.key(n.module)
            vals = u.iface(a).vals
            if not 0 <= n.index < len(vals):
                _reject("V-TYPE", "val index out of range")
            if a == u.addr:
                if self.val_index is not None and n.index >= self.val_index:
                    _reject("V-DEP-MISSING", f"val {vals[n.index].name} is not initialized yet")
                self.vals_used.add(n.index)
            return vals[n.index].type
        if isinstance(n, ir.Arith):
            lt, rt = self.synth(n.left), self.synth(n.right)
            if lt != rt or not lt.is_numeric:
                _reject("V-TYPE", f"arithmetic on {render(lt)} and {render(rt)}")
            if lt.head == "Int":
                self.risks |= {OVERFLOW, UNDERFLOW}
            else:
                self.risks.add(OVERFLOW if n.op == "+" else UNDERFLOW)
            return lt
        if isinstance(n, ir.Conv):
            at = self.synth(n.arg)
            if not at.is_numeric or at.head == n.target:
                _reject("V-TYPE", f"conversion of {render(at)} to {n.target}")
            self.risks.add(UNDERFLOW if n.target == "UInt" else OVERFLOW)
            return UINT if n.target == "UInt" else INT
        if isinstance(n, ir.Construct):
            ref = AdtRef(u.key(n.adt.module), n.adt.index)
            info = u.type_info(ref)
            if ref.module != u.addr and not info.open:
                _reject("V-CAP", f"{info.name} is closed and defined elsewhere")
            if not 0 <= n.ctor < len(info.ctors):
                _reject("V-TYPE", "constructor index out of range")
            targs = self.targs(n.targs)
            fields = info.ctors[n.ctor].fields
            if len(targs) != len(info.params) or len(fields) != len(n.args):
                _reject("V-TYPE", f"{info.ctors[n.ctor].name} with wrong arity")
            for a, f in zip(n.args, fields):
                at = self.synth(a)
                if not accepts(subst(f, targs), at):
                    _reject("V-TYPE", f"field of {info.name} given {render(at)}")
            return adt(ref, targs, info.caps)
        if isinstance(n, ir.MkTuple):
            return tuple_of(self.synth(e) for e in n.elems)
        if isinstance(n, ir.Call):
            return self.call(n)[0]
        if isinstance(n, ir.Derive):
            ct, it = self.synth(n.ctx), self.synth(n.id)
            if ct.head != "Context" or it.head != "ID":
                _reject("V-TYPE", f"derive over {render(ct)} and {render(it)}")
            return prim("Ref", [ct.args[0]], ["Modify"])
        if isinstance(n, ir.NewId):
            self.need(Effect.INIT, "ID.new")
            return MASTER_ID
        if isinstance(n, ir.NewContext):
            self.need(Effect.INIT, "Context.new")
            inner = self.u.ty(n.inner)
            self.u.wf(inner, self.ntparams)
            if "Persist" not in inner.caps:
                _reject("V-TYPE", "context content lacks Persist")
            return prim("Context", [inner])
        if isinstance(n, ir.Read):
            self.need(Effect.DEPENDENT, "read")
            rt = self.synth(n.ref)
            if rt.head != "Ref":
                _reject("V-TYPE", f"read of {render(rt)}")
            inner = rt.args[0]
            if "Copy" not in inner.caps:
                _reject("V-LINEAR", f"read duplicates {render(inner)} without Copy")
            self.cell_default(inner, n.default)
            return inner
        if isinstance(n, ir.Let):
            bt = self.synth(n.bound)
            self.irrefutable(n.pattern, bt)
            slots = self.pattern(n.pattern, bt)
            t = self.synth(n.body)
            self.closed(slots)
            return t
        if isinstance(n, ir.Case):
            st = self.synth(n.scrutinee)
            if not n.arms:
                _reject("V-TYPE", "case without arms")
            if not exhaustive([[p] for p, _ in n.arms], [st], self.u.ctors_of):
                _reject("V-TYPE", "non-exhaustive case")
            start = self.snapshot()
            result, end = None, None
            for p, body in n.arms:
                self.live = dict(start)
                slots = self.pattern(p, st)
                t = self.synth(body)
                self.closed(slots)
                after = {s: self.live[s] for s in start}
                if result is None:
                    result, end = t, after
                elif t != result:
                    _reject("V-TYPE", "case arms of different types")
                elif after != end:
                    _reject("V-LINEAR", "case arms consume different values")
            self.live.update(end)
            return result
        if isinstance(n, ir.Modify):
            self.need(Effect.ACTIVE, "modify")
            rt = self.synth(n.ref)
            if rt.head != "Ref":
                _reject("V-TYPE", f"modify of {render(rt)}")
            if "Modify" not in rt.caps:
                _reject("V-CAP", "modify through a reference without Modify")
            inner = rt.args[0]
            self.cell_default(inner, n.default)
            if n.slot is None:
                if "Drop" not in inner.caps:
                    _reject("V-LINEAR", f"modify discards {render(inner)} without Drop")
            else:
                self.bind(n.slot, inner)
            tails = _tails(n.body)
            returning = [isinstance(t, ir.AndReturn) for t in tails]
            if any(returning) and not all(returning):
                _reject("V-TYPE", "modify body mixes '& return' and plain results")
            for t in tails:
                if isinstance(t, ir.AndReturn):
                    self.returns[id(t)] = inner
            self.pure_depth += 1
            bt = self.synth(n.body)
            self.pure_depth -= 1
            if n.slot is not None:
                self.closed([n.slot])
            if all(returning):
                return bt
            if not accepts(inner, bt):
                _reject("V-TYPE", f"modify stores {render(bt)} into a {render(inner)} cell")
            return UNIT
        if isinstance(n, ir.AndReturn):
            inner = self.returns.pop(id(n), None)
            if inner is None:
                _reject("V-TYPE", "'& return' outside the tail of a modify body")
            vt = self.synth(n.value)
            if not accepts(inner, vt):
                _reject("V-TYPE", f"modify stores {render(vt)} into a {render(inner)} cell")
            return self.synth(n.result)
        if isinstance(n, ir.CapOp):
            t = self.synth(n.arg)
            if t.head in ("Tuple", "Var"):
                _reject("V-TYPE", f"capabilities cannot change on {render(t)}")
            cap = map_cap(n.cap, u.key)
            if isinstance(cap, UserCap):
                info = u.cap_info(cap)
            if cap == "Master" and t.head != "ID" or cap == "Modify" and t.head != "Ref":
                _reject("V-CAP", f"{cap} cannot apply to {t.head}")
            if cap == "Inspect" and t.head in PRIMITIVES:
                _reject("V-CAP", f"Inspect cannot apply to {t.head}")
            if not n.attach:
                return with_caps(t, t.caps - {cap})
            if isinstance(cap, str):
                if cap in NEVER_ATTACHABLE:
                    _reject("V-CAP", f"{cap} can never be attached")
                if t.head != "Adt" or t.adt.module != u.addr:
                    _reject("V-CAP", f"{cap} may only be attached by the module defining the type")
                if cap in STRUCTURAL:
                    tinfo = u.type_info(t.adt)
                    for c in tinfo.ctors:
                        for f in c.fields:
                            if cap not in subst(f, t.args).caps:
                                _reject("V-CAP", f"a field of {c.name} lacks {cap}")
            elif cap.module != u.addr and not (info.open and t.head == "Adt" and t.adt.module == u.addr):
                _reject("V-CAP", f"{info.name} cannot be attached here")
            return with_caps(t, t.caps | {cap})
        if isinstance(n, ir.Cycle):
            it = self.synth(n.init)
            start = self.snapshot()
            self.bind(n.slot, it)
            bt = self.synth(n.body)
            if not accepts(it, bt):
                _reject("V-TYPE", "cycle body changes the accumulator type")
            self.closed([n.slot])
            if any(self.live[s] != start[s] for s in start):
                _reject("V-LINEAR", "cycle body consumes a value from outside the loop")
            for s in n.after:
                self.drop(s)
            return it
        if isinstance(n, ir.Try):
            if not isinstance(n.call, ir.Call):
                _reject("V-TYPE", "try must wrap a call")
            handled = [u.risk(h.risk) for h in n.handlers]
            if len(set(handled)) != len(handled):
                _reject("V-TYPE", "risk handled twice")
            rt, arg_types, sig = self.call(n.call, frozenset(handled))
            start = self.snapshot()
            for s in n.success_drops:
                self.drop(s)
            end = self.snapshot()
            for h in n.handlers:
                self.live = dict(start)
                if len(h.slots) != len(arg_types):
                    _reject("V-TYPE", "handler binds the wrong number of arguments")
                for s, at in zip(h.slots, arg_types):
                    self.bind(s, at)
                ht = self.synth(h.body)
                if not accepts(rt, ht):
                    _reject("V-TYPE", f"handler yields {render(ht)}, the call {render(rt)}")
                self.closed(h.slots)
                if {s: self.live[s] for s in end} != end:
                    _reject("V-LINEAR", "handler and success path consume different values")
            self.live = end
            for s in self.env:
                self.live.setdefault(s, False)
            return rt
        _reject("V-TYPE", f"unknown node {type(n).__name__}")


class Validator:
    def __init__(self, registry, table: CostTable = COSTS):
        self.registry = registry
        self.table = table

    def validate(self, data: bytes) -> VerifiedModule:
        try:
            m = decode(data)
        except DecodeError as exc:
            _reject("V-DECODE", f"offset {exc.offset}: {exc.reason}")
        addr = address(data)
        u = _Universe(m, addr, self.registry)
        self.u = u
        self.check_types(m)
        val_deps: list = []
        bounds: list = []

        def callee(ref):
            a = u.key(ref.module)
            if a == addr:
                return bounds[ref.index]
            b = self.registry.gas_bound(FunRef(a, ref.index))
            if b is None:
                _reject("V-DEP-MISSING", "callee has no gas bound")
            return b

        defaults = set()
        for i, f in enumerate(m.funs):
            body = self.check_function(f, i)
            deps = set(body.vals_used)
            for c in body.calls:
                deps |= val_deps[c]
            val_deps.append(deps)
            if f.default_for is not None:
                ref = self.check_default(f, i)
                if ref in defaults or self.registry.default_for(ref) is not None:
                    _reject("V-DEFAULT-DUP", f"{u.type_info(ref).name} already has a default function")
                defaults.add(ref)
            bounds.append(gas_bound(f, callee, self.table))
        val_bounds = []
        for j, v in enumerate(m.vals):
            body = _Body(u, 0, v.slots, Effect.INIT, None, j)
            vt = u.ty(v.type)
            u.wf(vt, 0)
            bt = body.synth(v.body)
            body.closed(body.env)
            if not accepts(vt, bt):
                _reject("V-TYPE", f"val {v.name} declared {render(vt)} but computes {render(bt)}")
            for cap in ("Copy", "Persist"):
                if cap not in vt.caps:
                    _reject("V-CAP", f"val {v.name} lacks {cap}")
            for c in body.calls:
                if any(k >= j for k in val_deps[c]):
                    _reject("V-DEP-MISSING", f"val {v.name} depends on a later val")
            val_bounds.append(gas_bound(ir.BFun(v.name, "private", None, Effect.INIT, None, (), (), [], vt, v.slots, v.body), callee, self.table))
        init_bound = None
        if m.init is not None:
            self.check_init(m.init)
            self.check_function(m.init, len(m.funs))
            init_bound = gas_bound(m.init, callee, self.table)
        return VerifiedModule(addr, bytes(data), m, u.own, bounds, val_bounds, init_bound, list(u.deps))

    def check_types(self, m: ir.BModule):
        u = self.u
        for i, t in enumerate(u.own.types):
            if t.caps & set(NEVER_ATTACHABLE):
                _reject("V-CAP", f"{t.name} declares Master or Modify")
            for c in t.caps:
                if isinstance(c, UserCap):
                    u.cap_info(c)
            for c in t.ctors:
                for f in c.fields:
                    u.wf(f, len(t.params))
                    for sub in _adts(f):
                        if sub.module == u.addr and sub.index >= i:
                            _reject("V-TYPE", f"{t.name} refers to itself or a later type")
            for cap in sorted(t.caps & STRUCTURAL):
                for c in t.ctors:
                    for f in c.fields:
                        if cap not in f.caps:
                            _reject("V-CAP", f"{t.name} declares {cap} but a field of {c.name} lacks it")

    def check_function(self, f: ir.BFun, index: int) -> _Body:
        u = self.u
        if f.visibility == "protected" and not 0 <= f.protected < len(f.tparams):
            _reject("V-TYPE", f"{f.name} is protected by a missing type parameter")
        risks = {u.risk(r) for r in f.risks}
        body = _Body(u, len(f.tparams), f.slots, f.effect, index, None)
        slots = []
        for t, p in f.params:
            pt = u.ty(t)
            u.wf(pt, len(f.tparams))
            body.irrefutable(p, pt)
            slots += body.pattern(p, pt)
        ret = u.ty(f.ret)
        u.wf(ret, len(f.tparams))
        bt = body.synth(f.body)
        body.closed(body.env)
        if not accepts(ret, bt):
            _reject("V-TYPE", f"{f.name} declares {render(ret)} but returns {render(bt)}")
        missing = body.risks - risks
        if missing:
            _reject("V-RISK", f"{f.name} may fail with {', '.join(sorted(str(r) for r in missing))}")
        return body

    def check_default(self, f: ir.BFun, index: int) -> AdtRef:
        u = self.u
        ref = AdtRef(u.key(f.default_for.module), f.default_for.index)
        info = u.type_info(ref)
        ret = u.ty(f.ret)
        expect = tuple(tvar(k) for k in range(len(f.tparams)))
        if f.params or f.effect != Effect.PURE or len(f.tparams) != len(info.params):
            _reject("V-TYPE", f"default function {f.name} must be pure without parameters")
        if ret.head != "Adt" or ret.adt != ref or ret.args != expect:
            _reject("V-TYPE", f"default function {f.name} must return {info.name}")
        return ref

    def check_init(self, f: ir.BFun):
        ok = (
            len(f.params) == 1
            and self.u.ty(f.params[0][0]) == MASTER_ID
            and isinstance(f.params[0][1], (ir.PVar, ir.PWild))
            and f.effect == Effect.ACTIVE
            and not f.tparams
            and f.visibility == "private"
            and f.default_for is None
        )
        if not ok:
            _reject("V-TYPE", "init takes exactly one Master ID and is active")


def _adts(t: Type):
    if t.head == "Adt":
        yield t.adt
    for a in t.args:
        yield from _adts(a)


def validate(data: bytes, registry, table: CostTable = COSTS) -> VerifiedModule:
    """Verify ``data`` against the deployed ``registry``; raise Rejection otherwise."""
    return Validator(registry, table).validate(data)
