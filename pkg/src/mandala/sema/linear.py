"""Substructural use check.

A backward liveness pass decides, for every variable occurrence, whether it is
the last use on its path (MOVE) or not (COPY), and where unused bindings are
released (DROP). The result is the linear-use proof the compiler lowers into
explicit MOVE/COPY/DROP nodes.
"""

from __future__ import annotations

from ..types import SELF
from . import tree as T
from .diagnostics import Diagnostic


class LinearFailure(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


def _fail(code, pos, msg):
    raise LinearFailure(Diagnostic(code, pos, msg))


def _require_drop(b: T.Binding, pos):
    if "Drop" not in b.type.caps:
        _fail("E-LIN-DROP", pos, f"{b.name} of type {b.type} is never used and cannot be dropped")
    b.fate = "dropped"


def _drops(bindings, live: set, pos) -> list:
    out = [b for b in bindings if b not in live]
    for b in out:
        _require_drop(b, b.pos or pos)
    return out


def check_pattern(p: T.TPat):
    """Wildcards discard a value; constructor patterns unpack one."""
    if isinstance(p, T.TPWild):
        if "Drop" not in p.type.caps:
            _fail("E-LIN-DROP", p.pos, f"wildcard discards {p.type}, which cannot be dropped")
    elif isinstance(p, T.TPTuple):
        for e in p.elems:
            check_pattern(e)
    elif isinstance(p, T.TPCtor):
        if p.info.ref.module != SELF and "Inspect" not in p.type.caps:
            _fail("E-INSPECT", p.pos, f"cannot unpack {p.info.name} outside its module without Inspect")
        for e in p.subs:
            check_pattern(e)


def _bound_inside(node: T.TNode) -> set:
    out = set()
    for n in T.walk(node):
        if isinstance(n, T.TLet):
            out.update(T.pattern_bindings(n.pattern))
        elif isinstance(n, T.TCase):
            for a in n.arms:
                out.update(T.pattern_bindings(a.pattern))
        elif isinstance(n, T.TModify) and n.binding is not None:
            out.add(n.binding)
        elif isinstance(n, T.TCycle):
            out.add(n.acc)
        elif isinstance(n, T.TTry):
            for h in n.handlers:
                out.update(h.bindings)
    return out


def free_vars(node: T.TNode) -> set:
    used = {n.binding for n in T.walk(node) if isinstance(n, T.TVar)}
    return used - _bound_inside(node)


def _seq(nodes, live: set) -> set:
    for n in reversed(nodes):
        live = lin(n, live)
    return live


def lin(node: T.TNode, live: set) -> set:
    """Annotate ``node`` given the variables live after it; return those live before it."""
    if isinstance(node, T.TVar):
        b = node.binding
        if b in live:
            node.kind = "copy"
            if "Copy" not in b.type.caps:
                _fail("E-LIN-COPY", node.pos, f"{b.name} of type {b.type} is used again but cannot be copied")
            if b.fate is None:
                b.fate = "copied"
        else:
            node.kind = "move"
            b.fate = "moved"
        return live | {b}
    if isinstance(node, (T.TLit, T.TVal)):
        return live
    if isinstance(node, T.TLet):
        check_pattern(node.pattern)
        body_in = lin(node.body, live)
        bound = T.pattern_bindings(node.pattern)
        node.drops = _drops(bound, body_in, node.pos)
        return lin(node.bound, body_in - set(bound))
    if isinstance(node, T.TCase):
        arm_live = []
        for arm in node.arms:
            check_pattern(arm.pattern)
            arm_in = lin(arm.body, live)
            bound = T.pattern_bindings(arm.pattern)
            arm.drops = _drops(bound, arm_in, node.pos)
            arm_live.append(arm_in - set(bound))
        union = set().union(*arm_live) if arm_live else set(live)
        for arm, alive in zip(node.arms, arm_live):
            extra = _ordered(union - alive)
            for b in extra:
                _require_drop(b, node.pos)
            arm.drops = arm.drops + extra
        return lin(node.scrutinee, union)
    if isinstance(node, T.TModify):
        body_in = lin(node.body, live)
        if node.binding is not None:
            node.drops = _drops([node.binding], body_in, node.pos)
            body_in = body_in - {node.binding}
        elif "Drop" not in node.inner.caps:
            _fail("E-LIN-DROP", node.pos, f"the previous cell content {node.inner} cannot be dropped")
        return lin(node.ref, body_in)
    if isinstance(node, T.TCycle):
        captured = free_vars(node.body)
        body_in = lin(node.body, set(captured))
        node.drops = _drops([node.acc], body_in, node.pos)
        after = _ordered(captured - live)
        for b in after:
            _require_drop(b, node.pos)
        node.after = after
        return lin(node.init, live | captured)
    if isinstance(node, T.TTry):
        handler_live = []
        for h in node.handlers:
            h_in = lin(h.body, live)
            h.drops = _drops(h.bindings, h_in, h.pos)
            handler_live.append(h_in - set(h.bindings))
        union = set(live).union(*handler_live)
        node.success_drops = _ordered(union - live)
        for b in node.success_drops:
            _require_drop(b, node.pos)
        for h, alive in zip(node.handlers, handler_live):
            extra = _ordered(union - alive)
            for b in extra:
                _require_drop(b, h.pos)
            h.drops = h.drops + extra
        return _seq(node.call.args, union)
    return _seq(T.children(node), live)


def _ordered(bindings) -> list:
    # deterministic order: by source position, then name
    return sorted(bindings, key=lambda b: (b.pos or (0, 0), b.name))


def check_function(fn: T.TFunction):
    for p in fn.params:
        check_pattern(p)
    body_in = lin(fn.body, set())
    bound = [b for p in fn.params for b in T.pattern_bindings(p)]
    fn.drops = _drops(bound, body_in, fn.pos)


def check_substructural(tm: T.TypedModule) -> list:
    diags = []
    funs = list(tm.funs) + ([tm.init] if tm.init is not None else [])
    for fn in funs:
        try:
            check_function(fn)
        except LinearFailure as exc:
            diags.append(exc.diag)
    for v in tm.vals:
        try:
            lin(v.expr, set())
        except LinearFailure as exc:
            diags.append(exc.diag)
    return diags
