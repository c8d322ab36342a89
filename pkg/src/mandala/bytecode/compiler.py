"""Lowering of an elaborated module to the IR.

Names disappear: every binding becomes a frame slot and every cross-module
reference becomes an (import key, index) pair. The linear-use proof of the
checker turns into explicit MOVE, COPY and DROP nodes.
"""

from __future__ import annotations

from ..types import SELF, AdtRef, FunRef, map_cap, map_modules, map_risk, risk_sort_key
from ..sema import tree as T
from . import ir


class CompileError(Exception):
    """Internal invariant violated: elaboration should have rejected the module."""


class _Keys:
    def __init__(self, order: list | None):
        self.order = order
        self.seen: list = []

    def __call__(self, mod):
        if mod == SELF:
            return 0
        if self.order is None:
            if mod not in self.seen:
                self.seen.append(mod)
            return 0
        return self.order.index(mod) + 1


class _FunctionLowering:
    def __init__(self, keys: _Keys):
        self.keys = keys
        self.slots: dict = {}

    def slot(self, b: T.Binding) -> int:
        if b not in self.slots:
            self.slots[b] = len(self.slots)
        return self.slots[b]

    def ty(self, t):
        return map_modules(t, self.keys)

    def fref(self, sig) -> FunRef:
        return FunRef(self.keys(sig.ref.module), sig.ref.index, sig.name)

    def aref(self, ref) -> AdtRef:
        return AdtRef(self.keys(ref.module), ref.index, ref.name)

    def drops(self, bindings, body):
        if not bindings:
            return body
        return ir.Drop([self.slot(b) for b in bindings], body)

    def pattern(self, p):
        if isinstance(p, T.TPVar):
            return ir.PVar(self.slot(p.binding))
        if isinstance(p, T.TPWild):
            return ir.PWild()
        if isinstance(p, T.TPTuple):
            return ir.PTuple([self.pattern(e) for e in p.elems])
        if isinstance(p, T.TPCtor):
            return ir.PCtor(self.aref(p.info.ref), p.ctor, [self.pattern(s) for s in p.subs])
        raise CompileError(f"unknown pattern {type(p).__name__}")

    def node(self, n):
        if isinstance(n, T.TLit):
            kind = {"UInt": "uint", "Int": "int", "Unit": "unit"}[n.type.head]
            return ir.Lit(kind, n.value if kind != "unit" else None)
        if isinstance(n, T.TVar):
            s = self.slot(n.binding)
            return ir.Copy(s) if n.kind == "copy" else ir.Move(s)
        if isinstance(n, T.TVal):
            return ir.Val(self.keys(n.val.module), n.val.index)
        if isinstance(n, T.TArith):
            return ir.Arith(n.op, self.node(n.left), self.node(n.right))
        if isinstance(n, T.TConv):
            return ir.Conv(n.type.head, self.node(n.arg))
        if isinstance(n, T.TCtor):
            return ir.Construct(
                self.aref(n.info.ref), n.ctor, [self.ty(t) for t in n.targs], [self.node(a) for a in n.args]
            )
        if isinstance(n, T.TTuple):
            return ir.MkTuple([self.node(e) for e in n.elems])
        if isinstance(n, T.TCall):
            return ir.Call(self.fref(n.sig), [self.ty(t) for t in n.targs], [self.node(a) for a in n.args])
        if isinstance(n, T.TBuiltin):
            if n.name == "derive":
                return ir.Derive(self.node(n.args[0]), self.node(n.args[1]))
            if n.name == "id_new":
                return ir.NewId()
            if n.name == "context_new":
                return ir.NewContext(self.ty(n.inner))
            if n.name == "read":
                default = self.fref(n.default) if n.default is not None else None
                return ir.Read(self.node(n.args[0]), default)
            raise CompileError(f"unknown builtin {n.name}")
        if isinstance(n, T.TLet):
            return ir.Let(self.pattern(n.pattern), self.node(n.bound), self.drops(n.drops, self.node(n.body)))
        if isinstance(n, T.TCase):
            arms = [(self.pattern(a.pattern), self.drops(a.drops, self.node(a.body))) for a in n.arms]
            return ir.Case(self.node(n.scrutinee), arms)
        if isinstance(n, T.TModify):
            slot = self.slot(n.binding) if n.binding is not None else None
            default = self.fref(n.default) if n.default is not None else None
            return ir.Modify(self.node(n.ref), slot, default, self.drops(n.drops, self.node(n.body)))
        if isinstance(n, T.TAndReturn):
            return ir.AndReturn(self.node(n.value), self.node(n.result))
        if isinstance(n, T.TCapOp):
            return ir.CapOp(n.attach, map_cap(n.cap, self.keys), self.node(n.arg))
        if isinstance(n, T.TCycle):
            init = self.node(n.init)
            slot = self.slot(n.acc)
            body = self.drops(n.drops, self.node(n.body))
            return ir.Cycle(n.bound, init, slot, body, [self.slot(b) for b in n.after])
        if isinstance(n, T.TTry):
            call = self.node(n.call)
            handlers = []
            for h in n.handlers:
                slots = [self.slot(b) for b in h.bindings]
                handlers.append(ir.Handler(map_risk(h.risk, self.keys), slots, self.drops(h.drops, self.node(h.body))))
            return ir.Try(call, handlers, [self.slot(b) for b in n.success_drops])
        raise CompileError(f"unknown node {type(n).__name__}")


def _function(fn: T.TFunction, keys: _Keys) -> ir.BFun:
    low = _FunctionLowering(keys)
    sig = fn.sig
    params = [(low.ty(t), low.pattern(p)) for t, p in zip(sig.params, fn.params)]
    body = low.drops(fn.drops, low.node(fn.body))
    risks = tuple(sorted((map_risk(r, keys) for r in sig.risks), key=risk_sort_key))
    default_for = low.aref(sig.default_for) if sig.default_for is not None else None
    return ir.BFun(
        sig.name,
        sig.visibility,
        sig.protected,
        sig.effect,
        default_for,
        risks,
        tuple(sig.tparams),
        params,
        low.ty(sig.ret),
        len(low.slots),
        body,
    )


def _lower(tm: T.TypedModule, keys: _Keys) -> ir.BModule:
    m = ir.BModule(tm.name)
    for info in tm.types:
        caps = frozenset(map_cap(c, keys) for c in info.caps)
        ctors = [(c.name, tuple(map_modules(f, keys) for f in c.fields)) for c in info.ctors]
        m.types.append(ir.BType(info.name, info.open, info.public, info.shorthand, caps, tuple(info.params), ctors))
    m.caps = [ir.BCap(c.name, c.open) for c in tm.caps]
    m.risks = list(tm.risks)
    m.funs = [_function(f, keys) for f in tm.funs]
    for v in tm.vals:
        low = _FunctionLowering(keys)
        body = low.node(v.expr)
        m.vals.append(ir.BVal(v.info.name, low.ty(v.info.type), len(low.slots), body))
    if tm.init is not None:
        m.init = _function(tm.init, keys)
    return m


def compile_module(tm: T.TypedModule) -> ir.BModule:
    """Lower ``tm``; imports are the referenced modules in scope order."""
    probe = _Keys(None)
    _lower(tm, probe)
    scope_order = [iface.address for iface in tm.imports]
    used = set(probe.seen)
    order = [a for a in scope_order if a in used]
    order += sorted(used - set(order))
    m = _lower(tm, _Keys(order))
    m.imports = order
    return m

