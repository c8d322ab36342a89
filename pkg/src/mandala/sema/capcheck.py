"""Capability and visibility rules."""

from __future__ import annotations

from ..types import SELF, STRUCTURAL, Type, UserCap, subst
from . import tree as T
from .diagnostics import Diagnostic

NEVER_ATTACHABLE = ("Master", "Modify")


class CapFailure(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


def _fail(code, pos, msg):
    raise CapFailure(Diagnostic(code, pos, msg))


class CapChecker:
    def __init__(self, tm: T.TypedModule, registry):
        self.tm = tm
        self.registry = registry

    def type_info(self, t: Type):
        if t.adt.module == SELF:
            return self.tm.types[t.adt.index]
        return self.registry.interface(t.adt.module).types[t.adt.index]

    def cap_open(self, cap: UserCap) -> bool:
        if cap.module == SELF:
            return self.tm.caps[cap.index].open
        return self.registry.interface(cap.module).caps[cap.index].open

    def check_type_decl(self, info, pos):
        for cap in sorted(info.caps & STRUCTURAL):
            for c in info.ctors:
                for f in c.fields:
                    if cap not in f.caps:
                        _fail("E-CAP-STRUCT", pos, f"{info.name} declares {cap} but a field of {c.name} lacks it")

    def check_attach(self, node: T.TCapOp):
        cap, t = node.cap, node.arg.type
        if isinstance(cap, str):
            if cap in NEVER_ATTACHABLE:
                _fail("E-CAP-ATTACH", node.pos, f"{cap} can never be attached")
            if t.head != "Adt" or t.adt.module != SELF:
                _fail("E-CAP-ATTACH", node.pos, f"{cap} may only be attached by the module defining the type")
            if cap in STRUCTURAL:
                info = self.type_info(t)
                for c in info.ctors:
                    for f in c.fields:
                        if cap not in subst(f, t.args).caps:
                            _fail("E-CAP-STRUCT", node.pos, f"a field of {c.name} lacks {cap}")
            return
        if cap.module == SELF:
            return
        if self.cap_open(cap) and t.head == "Adt" and t.adt.module == SELF:
            return
        _fail("E-CAP-ATTACH", node.pos, f"{cap} is defined in another module and cannot be attached here")

    def check_call(self, node: T.TCall):
        sig = node.sig
        if sig.visibility == "private" and sig.ref.module != SELF:
            _fail("E-VIS-PRIVATE", node.pos, f"{sig.name} is private to its module")
        if sig.visibility == "protected":
            targ = node.targs[sig.protected]
            if targ.head != "Adt" or targ.adt.module != SELF:
                _fail(
                    "E-VIS-PROTECTED",
                    node.pos,
                    f"{sig.name} is protected by {sig.tparams[sig.protected]}, bound to a type this module does not define",
                )

    def check_tree(self, root: T.TNode):
        for n in T.walk(root):
            if isinstance(n, T.TCapOp) and n.attach:
                self.check_attach(n)
            elif isinstance(n, T.TCall):
                self.check_call(n)
            elif isinstance(n, T.TModify) and "Modify" not in n.ref.type.caps:
                _fail("E-CAP-MODIFY", n.pos, "modify needs a reference carrying Modify")


def check_capabilities(tm: T.TypedModule, registry, type_pos=None) -> list:
    chk = CapChecker(tm, registry)
    diags = []
    for i, info in enumerate(tm.types):
        try:
            pos = type_pos[i] if type_pos else (0, 0)
            chk.check_type_decl(info, pos)
        except CapFailure as exc:
            diags.append(exc.diag)
    roots = [f.body for f in tm.funs] + [v.expr for v in tm.vals]
    if tm.init is not None:
        roots.append(tm.init.body)
    for r in roots:
        try:
            chk.check_tree(r)
        except CapFailure as exc:
            diags.append(exc.diag)
    return diags
