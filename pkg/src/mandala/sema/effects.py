"""Effect lattice and risk coverage."""

from __future__ import annotations

from ..types import EMPTY_CELL, OVERFLOW, UNDERFLOW, Effect, risk_sort_key
from . import tree as T
from .diagnostics import Diagnostic

BUILTIN_EFFECT = {
    "derive": Effect.PURE,
    "read": Effect.DEPENDENT,
    "id_new": Effect.INIT,
    "context_new": Effect.INIT,
}


class EffectFailure(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


def _fail(code, pos, msg):
    raise EffectFailure(Diagnostic(code, pos, msg))


def node_effect(node: T.TNode) -> Effect:
    """Effect of the node itself, excluding its children."""
    if isinstance(node, T.TCall):
        return node.sig.effect
    if isinstance(node, T.TBuiltin):
        return BUILTIN_EFFECT[node.name]
    if isinstance(node, T.TModify):
        return Effect.ACTIVE
    return Effect.PURE


def arith_risks(op: str, head: str) -> set:
    if head == "Int":
        return {OVERFLOW, UNDERFLOW}
    return {OVERFLOW} if op == "+" else {UNDERFLOW}


def conv_risks(target_head: str) -> set:
    return {UNDERFLOW} if target_head == "UInt" else {OVERFLOW}


def cell_risks(default) -> set:
    return {EMPTY_CELL} if default is None else set(default.risks)


def risks_of(node: T.TNode) -> set:
    if isinstance(node, T.TTry):
        handled = {h.risk for h in node.handlers}
        out = set()
        for a in node.call.args:
            out |= risks_of(a)
        out |= set(node.call.sig.risks) - handled
        for h in node.handlers:
            out |= risks_of(h.body)
        return out
    out = set()
    if isinstance(node, T.TArith):
        out |= arith_risks(node.op, node.type.head)
    elif isinstance(node, T.TConv):
        out |= conv_risks(node.type.head)
    elif isinstance(node, T.TCall):
        out |= set(node.sig.risks)
    elif isinstance(node, T.TModify) or isinstance(node, T.TBuiltin) and node.name == "read":
        out |= cell_risks(node.default)
    for c in T.children(node):
        out |= risks_of(c)
    return out


def max_effect(node: T.TNode) -> tuple:
    """Highest effect in the tree and the node that requires it."""
    best, where = node_effect(node), node
    for c in T.children(node):
        e, w = max_effect(c)
        if e > best:
            best, where = e, w
    return best, where


def check_function(fn: T.TFunction):
    sig = fn.sig
    for n in T.walk(fn.body):
        e = node_effect(n)
        if e > sig.effect:
            what = "modify" if isinstance(n, T.TModify) else getattr(getattr(n, "sig", None), "name", None) or n.name
            _fail("E-EFF-ESCALATE", n.pos, f"{what} is {e.keyword} but {sig.name} is {sig.effect.keyword}")
        if isinstance(n, T.TModify):
            inner, where = max_effect(n.body)
            if inner > Effect.PURE:
                _fail("E-EFF-MODIFY-IMPURE", where.pos, f"modify transition must be pure, found {inner.keyword}")
    missing = risks_of(fn.body) - set(sig.risks)
    if missing:
        names = ", ".join(str(r) for r in sorted(missing, key=risk_sort_key))
        _fail("E-RISK-UNDECLARED", fn.pos, f"{sig.name} may fail with {names} but does not declare it")


def check_val(v: T.TValDecl):
    e, where = max_effect(v.expr)
    if e > Effect.INIT:
        _fail("E-VAL-EFFECT", where.pos, f"val {v.info.name} initializer is {e.keyword}")
    for cap in ("Copy", "Persist"):
        if cap not in v.info.type.caps:
            _fail("E-VAL-CAPS", v.pos, f"val {v.info.name} of type {v.info.type} lacks {cap}")


def check_effects(tm: T.TypedModule) -> list:
    diags = []
    for fn in list(tm.funs) + ([tm.init] if tm.init is not None else []):
        try:
            check_function(fn)
        except EffectFailure as exc:
            diags.append(exc.diag)
    for v in tm.vals:
        try:
            check_val(v)
        except EffectFailure as exc:
            diags.append(exc.diag)
    return diags
