"""Tree-walking interpreter over verified IR.

Every check the validator proved statically is repeated here as a guard that
raises InternalFault; a fault means the validator let something unsound through.
Risks raised inside a function roll back that function's writes and surface to
the caller as CallFailed carrying the original arguments.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from ..bytecode import ir
from ..ledger import Ledger, PersistViolation
from ..types import (
    EMPTY_CELL,
    INT_MAX,
    INT_MIN,
    OVERFLOW,
    STRUCTURAL,
    UINT_MAX,
    UNDERFLOW,
    AdtRef,
    Effect,
    FunRef,
    Risk,
    Type,
    map_cap,
    map_modules,
    map_risk,
    subst,
)
from ..validator.gas import COSTS, CostTable, destructure_cost, nested_cost
from ..values import UNIT_VALUE, Value, id_value, int_, uint, with_value_caps


class InternalFault(Exception):
    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail


class RiskError(Exception):
    def __init__(self, risk: Risk):
        super().__init__(risk.name)
        self.risk = risk


class CallFailed(RiskError):
    def __init__(self, risk: Risk, args: tuple):
        super().__init__(risk)
        self.args_back = args


@dataclass
class Stats:
    """Counters accumulated over the lifetime of an engine."""

    calls: int = 0
    gas_checks: int = 0
    gas_violations: list = field(default_factory=list)
    faults: dict = field(default_factory=dict)
    reentrancy: int = 0

    def fault(self, kind: str):
        self.faults[kind] = self.faults.get(kind, 0) + 1
        if kind == "reentrancy":
            self.reentrancy += 1


_DEAD = object()


@dataclass
class _Returning:
    stored: Value
    result: Value


class Frame:
    def __init__(self, loaded, targs: tuple, effect: Effect, nslots: int):
        self.loaded = loaded
        self.targs = targs
        self.effect = effect
        self.slots = [_DEAD] * nslots

    def ty(self, t: Type) -> Type:
        return subst(map_modules(t, self.loaded.key), self.targs)

    def ref(self, r):
        return type(r)(self.loaded.key(r.module), r.index)


def external_id(name: str) -> bytes:
    return hashlib.sha256(b"external:" + name.encode()).digest()


def cell_key(ctx: bytes, id_: bytes) -> bytes:
    return hashlib.sha256(ctx + id_).digest()


class Interpreter:
    """Executes one transaction; create a fresh instance per transaction."""

    def __init__(self, ledger: Ledger, tx_digest: bytes, stats: Stats, table: CostTable = COSTS):
        self.ledger = ledger
        self.tx_digest = tx_digest
        self.stats = stats
        self.t = table
        self.gas = 0
        self.fresh = 0
        self.stack: list = []
        self.transition = 0  # depth of modify transitions in progress

    # ---- helpers ----------------------------------------------------------------------

    def fault(self, kind: str, detail: str):
        self.stats.fault(kind)
        raise InternalFault(kind, detail)

    def charge(self, n: int):
        self.gas += n

    def need(self, frame: Frame, e: Effect, what: str):
        if self.transition and e > Effect.PURE:
            self.fault("effect", f"{what} during a modify transition")
        if e > frame.effect:
            self.fault("effect", f"{what} in a {frame.effect.keyword} frame")

    def fresh_bytes(self) -> bytes:
        raw = hashlib.sha256(b"fresh:" + self.tx_digest + struct.pack("<Q", self.fresh)).digest()
        self.fresh += 1
        return raw

    # ---- invocation ---------------------------------------------------------------------

    def invoke(self, ref: FunRef, targs: tuple, args: tuple) -> Value:
        """Run the function at address-form ``ref``; raises CallFailed on a risk."""
        loaded = self.ledger.loaded(ref.module)
        if loaded is None or not 0 <= ref.index < len(loaded.module.funs):
            self.fault("dispatch", "call to an undeployed function")
        return self.run(loaded, loaded.module.funs[ref.index], ref.index, loaded.record.bounds[ref.index], targs, args)

    def run(self, loaded, f: ir.BFun, index: int, bound: int, targs: tuple, args: tuple) -> Value:
        key = (loaded.address, index)
        if key in self.stack:
            self.fault("reentrancy", f"{loaded.name}.{f.name} is already on the call stack")
        if len(args) != len(f.params):
            self.fault("dispatch", f"{f.name} called with {len(args)} arguments")
        self.stack.append(key)
        self.stats.calls += 1
        mark = self.ledger.store.mark()
        fresh = self.fresh
        start = self.gas
        frame = Frame(loaded, targs, f.effect, f.slots)
        try:
            for (_, p), a in zip(f.params, args):
                self.charge(destructure_cost(p, self.t))
                self.bind(frame, p, a)
            result = self.eval(f.body, frame)
            self.closed(frame)
        except CallFailed as exc:
            self.ledger.store.rollback_to(mark)
            self.fresh = fresh
            raise CallFailed(exc.risk, args) from None
        except RiskError as exc:
            self.ledger.store.rollback_to(mark)
            self.fresh = fresh
            raise CallFailed(exc.risk, args) from None
        finally:
            self.stack.pop()
            used = self.gas - start
            self.stats.gas_checks += 1
            if used > bound:
                self.stats.gas_violations.append((loaded.name, f.name, used, bound))
        return result

    def closed(self, frame: Frame):
        if any(s is not _DEAD for s in frame.slots):
            self.fault("linearity", "a value is still live when its function returns")

    # ---- patterns -----------------------------------------------------------------------

    def bind(self, frame: Frame, p, v: Value):
        if isinstance(p, ir.PVar):
            frame.slots[p.slot] = v
        elif isinstance(p, ir.PWild):
            if not v.has("Drop"):
                self.fault("linearity", "wildcard discards a value without Drop")
        elif isinstance(p, ir.PTuple):
            if v.kind != "tuple" or len(v.data) != len(p.elems):
                self.fault("type", "tuple pattern against a non-tuple")
            for sp, e in zip(p.elems, v.data):
                self.bind(frame, sp, e)
        else:
            if not self.matches(frame, p, v):
                self.fault("type", "irrefutable pattern did not match")
            for sp, e in zip(p.subs, v.data):
                self.bind(frame, sp, e)

    def matches(self, frame: Frame, p, v: Value) -> bool:
        if isinstance(p, (ir.PVar, ir.PWild)):
            return True
        if isinstance(p, ir.PTuple):
            return v.kind == "tuple" and all(self.matches(frame, sp, e) for sp, e in zip(p.elems, v.data))
        if v.kind != "adt" or v.adt != frame.ref(p.adt):
            self.fault("type", "constructor pattern against a foreign value")
        return v.ctor == p.ctor and all(self.matches(frame, sp, e) for sp, e in zip(p.subs, v.data))

    # ---- slots --------------------------------------------------------------------------

    def take(self, frame: Frame, slot: int) -> Value:
        v = frame.slots[slot]
        if v is _DEAD:
            self.fault("linearity", f"slot {slot} used after it was consumed")
        return v

    # ---- evaluation ---------------------------------------------------------------------

    def eval(self, n, frame: Frame):
        t = self.t
        if isinstance(n, ir.Lit):
            self.charge(t.lit)
            return UNIT_VALUE if n.kind == "unit" else uint(n.value) if n.kind == "uint" else int_(n.value)
        if isinstance(n, ir.Move):
            self.charge(t.move)
            v = self.take(frame, n.slot)
            frame.slots[n.slot] = _DEAD
            return v
        if isinstance(n, ir.Copy):
            self.charge(t.copy)
            v = self.take(frame, n.slot)
            if not v.has("Copy"):
                self.fault("linearity", f"slot {n.slot} copied without Copy")
            return v
        if isinstance(n, ir.Drop):
            self.charge(t.drop * len(n.slots))
            for s in n.slots:
                if not self.take(frame, s).has("Drop"):
                    self.fault("linearity", f"slot {s} dropped without Drop")
                frame.slots[s] = _DEAD
            return self.eval(n.body, frame)
        if isinstance(n, ir.Val):
            self.charge(t.val)
            v = self.ledger.get_val(frame.loaded.key(n.module), n.index)
            if v is None:
                self.fault("dispatch", "val read before it was initialized")
            return v
        if isinstance(n, ir.Arith):
            self.charge(t.arith)
            a, b = self.eval(n.left, frame), self.eval(n.right, frame)
            r = a.data + b.data if n.op == "+" else a.data - b.data
            lo, hi = (0, UINT_MAX) if a.kind == "uint" else (INT_MIN, INT_MAX)
            if r > hi:
                raise RiskError(OVERFLOW)
            if r < lo:
                raise RiskError(UNDERFLOW)
            return Value(a.kind, r, STRUCTURAL)
        if isinstance(n, ir.Conv):
            self.charge(t.conv)
            a = self.eval(n.arg, frame)
            if n.target == "UInt":
                if a.data < 0:
                    raise RiskError(UNDERFLOW)
                return uint(a.data)
            if a.data > INT_MAX:
                raise RiskError(OVERFLOW)
            return int_(a.data)
        if isinstance(n, ir.Construct):
            self.charge(t.construct + len(n.args))
            fields = tuple(self.eval(a, frame) for a in n.args)
            ref = frame.ref(n.adt)
            info = self.ledger.interface(ref.module).types[ref.index]
            targs = tuple(frame.ty(x) for x in n.targs)
            return Value("adt", fields, info.caps, AdtRef(ref.module, ref.index), targs, n.ctor)
        if isinstance(n, ir.MkTuple):
            self.charge(t.construct + len(n.elems))
            return Value("tuple", tuple(self.eval(e, frame) for e in n.elems))
        if isinstance(n, ir.Call):
            self.charge(t.call)
            args = tuple(self.eval(a, frame) for a in n.args)
            return self.call(n, frame, args)
        if isinstance(n, ir.Derive):
            self.charge(t.derive)
            c, i = self.eval(n.ctx, frame), self.eval(n.id, frame)
            if c.kind != "context" or i.kind != "id":
                self.fault("type", "derive over a non-context or non-id")
            return Value("ref", cell_key(c.data, i.data), STRUCTURAL | {"Modify"}, inner=c.inner)
        if isinstance(n, ir.NewId):
            self.charge(t.new_id)
            self.need(frame, Effect.INIT, "ID.new")
            return id_value(self.fresh_bytes(), master=True)
        if isinstance(n, ir.NewContext):
            self.charge(t.new_context)
            self.need(frame, Effect.INIT, "Context.new")
            inner = frame.ty(n.inner)
            if "Persist" not in inner.caps:
                self.fault("persist", "context over a type without Persist")
            return Value("context", self.fresh_bytes(), STRUCTURAL, inner=inner)
        if isinstance(n, ir.Read):
            self.charge(t.cell_read)
            r = self.eval(n.ref, frame)
            self.need(frame, Effect.DEPENDENT, "read")
            v = self.cell(frame, r, n.default)
            if not v.has("Copy"):
                self.fault("linearity", "read duplicates a value without Copy")
            return v
        if isinstance(n, ir.Let):
            self.charge(t.let + destructure_cost(n.pattern, t))
            self.bind(frame, n.pattern, self.eval(n.bound, frame))
            return self.eval(n.body, frame)
        if isinstance(n, ir.Case):
            self.charge(t.match + len(n.arms))
            v = self.eval(n.scrutinee, frame)
            for p, body in n.arms:
                if self.matches(frame, p, v):
                    self.charge(nested_cost(p, t))
                    self.bind(frame, p, v)
                    return self.eval(body, frame)
            self.fault("type", "no case arm matched")
        if isinstance(n, ir.Modify):
            return self.modify(n, frame)
        if isinstance(n, ir.AndReturn):
            self.charge(t.and_return)
            stored = self.eval(n.value, frame)
            return _Returning(stored, self.eval(n.result, frame))
        if isinstance(n, ir.CapOp):
            self.charge(t.cap_op)
            v = self.eval(n.arg, frame)
            cap = map_cap(n.cap, frame.loaded.key)
            caps = v.caps | {cap} if n.attach else v.caps - {cap}
            return with_value_caps(v, caps)
        if isinstance(n, ir.Cycle):
            self.charge(t.cycle)
            acc = self.eval(n.init, frame)
            for _ in range(n.count):
                frame.slots[n.slot] = acc
                acc = self.eval(n.body, frame)
            self.charge(t.drop * len(n.after))
            for s in n.after:
                if not self.take(frame, s).has("Drop"):
                    self.fault("linearity", f"slot {s} dropped without Drop")
                frame.slots[s] = _DEAD
            return acc
        if isinstance(n, ir.Try):
            self.charge(t.try_)
            self.charge(t.call)
            args = tuple(self.eval(a, frame) for a in n.call.args)
            try:
                v = self.call(n.call, frame, args)
            except CallFailed as exc:
                for h in n.handlers:
                    if map_risk(h.risk, frame.loaded.key) == exc.risk:
                        for s, a in zip(h.slots, exc.args_back):
                            frame.slots[s] = a
                        return self.eval(h.body, frame)
                raise
            self.charge(t.drop * len(n.success_drops))
            for s in n.success_drops:
                if not self.take(frame, s).has("Drop"):
                    self.fault("linearity", f"slot {s} dropped without Drop")
                frame.slots[s] = _DEAD
            return v
        self.fault("type", f"unknown node {type(n).__name__}")

    def call(self, n: ir.Call, frame: Frame, args: tuple) -> Value:
        ref = frame.ref(n.fun)
        loaded = self.ledger.loaded(ref.module)
        if loaded is None:
            self.fault("dispatch", "call into an undeployed module")
        self.need(frame, loaded.module.funs[ref.index].effect, f"call to {loaded.module.funs[ref.index].name}")
        targs = tuple(frame.ty(x) for x in n.targs)
        return self.invoke(ref, targs, args)

    # ---- cells --------------------------------------------------------------------------

    def cell(self, frame: Frame, r: Value, default) -> Value:
        if r.kind != "ref":
            self.fault("type", "cell access through a non-reference")
        v = self.ledger.get_cell(r.data)
        if v is not None:
            return v
        if default is None:
            raise RiskError(EMPTY_CELL)
        self.charge(self.t.call)
        ref = frame.ref(default)
        return self.invoke(FunRef(ref.module, ref.index), tuple(r.inner.args), ())

    def modify(self, n: ir.Modify, frame: Frame):
        self.charge(self.t.cell_read + self.t.cell_write)
        r = self.eval(n.ref, frame)
        self.need(frame, Effect.ACTIVE, "modify")
        if "Modify" not in r.caps:
            self.fault("capability", "modify through a reference without Modify")
        old = self.cell(frame, r, n.default)
        if n.slot is None:
            if not old.has("Drop"):
                self.fault("linearity", "modify discards a value without Drop")
        else:
            frame.slots[n.slot] = old
        self.transition += 1
        try:
            out = self.eval(n.body, frame)
        finally:
            self.transition -= 1
        stored, result = (out.stored, out.result) if isinstance(out, _Returning) else (out, UNIT_VALUE)
        try:
            self.ledger.put_cell(r.data, stored)
        except PersistViolation as exc:
            self.fault("persist", str(exc))
        return result
