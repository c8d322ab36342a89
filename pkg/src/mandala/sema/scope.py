"""Name resolution: imports, declaration tables and the earlier-declarations-only rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..interface import ModuleInterface, Registry
from ..syntax import ast as A
from ..types import BUILTIN_CAPS, BUILTIN_RISKS, PRIMITIVES
from .diagnostics import Diagnostic

BUILTIN_FUNS = ("derive", "read", "Context.new", "ID.new")
NAMESPACES = ("type", "ctor", "cap", "fun", "val", "risk")


@dataclass
class Entity:
    ns: str
    local: bool
    index: int  # local table index, or index in the imported interface
    iface: Optional[ModuleInterface] = None
    sub: int = 0  # constructor index for ns == "ctor"


class ResolveFailure(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


class Scope:
    """Module-level scope. Locals are visible only from later declarations."""

    def __init__(self, module: A.AstModule, registry: Registry):
        self.module = module
        self.registry = registry
        self.implicit = not module.imports
        self.imports: list[ModuleInterface] = []
        self.diags: list[Diagnostic] = []
        # (ns, name) -> (decl index, local index, sub)
        self.local: dict = {}
        self.risks: set = set()
        self.local_counts = {ns: 0 for ns in NAMESPACES}
        self._load_imports()
        self._scan_locals()

    def _load_imports(self):
        if self.implicit:
            for name in self.registry.module_names():
                iface = self.registry.interface(self.registry.address_of(name))
                if iface is not None and name != self.module.name:
                    self.imports.append(iface)
            return
        for imp in self.module.imports:
            addr = self.registry.address_of(imp.path)
            iface = self.registry.interface(addr) if addr is not None else None
            if iface is None:
                self.diags.append(
                    Diagnostic("E-IMPORT-MISSING", imp.pos, f"module {imp.path} is not deployed")
                )
                continue
            if iface not in self.imports:
                self.imports.append(iface)

    def _declare(self, ns: str, name: str, decl_index: int, pos, sub: int = 0, index=None):
        key = (ns, name)
        if key in self.local:
            self.diags.append(Diagnostic("E-NAME-DUP", pos, f"{ns} {name} declared twice"))
            return
        if index is None:
            index = self.local_counts[ns]
            self.local_counts[ns] += 1
        self.local[key] = (decl_index, index, sub)

    def _scan_locals(self):
        for di, d in enumerate(self.module.decls):
            if isinstance(d, A.TypeDecl):
                tindex = self.local_counts["type"]
                self._declare("type", d.name, di, d.pos)
                for ci, c in enumerate(d.ctors):
                    self._declare("ctor", c.name, di, c.pos, sub=ci, index=tindex)
            elif isinstance(d, A.CapabilityDecl):
                self._declare("cap", d.name, di, d.pos)
            elif isinstance(d, A.FunDecl):
                self._declare("fun", d.name, di, d.pos)
            elif isinstance(d, A.ValDecl):
                self._declare("val", d.name, di, d.pos)
            elif isinstance(d, A.InitDecl):
                if ("init", "init") in self.local:
                    self.diags.append(Diagnostic("E-NAME-DUP", d.pos, "more than one init"))
                self.local[("init", "init")] = (di, 0, 0)
            for r in getattr(d, "risks", []):
                if r not in BUILTIN_RISKS and "." not in r:
                    self.risks.add(r)

    # ---- lookup -----------------------------------------------------------------

    def _candidates(self, iface: ModuleInterface, ns: str, name: str) -> list:
        out = []
        if ns == "type":
            out = [Entity(ns, False, t.ref.index, iface) for t in iface.types if t.public and t.name == name]
        elif ns == "ctor":
            for t in iface.types:
                if not t.public:
                    continue
                for ci, c in enumerate(t.ctors):
                    if c.name == name:
                        out.append(Entity(ns, False, t.ref.index, iface, ci))
        elif ns == "cap":
            out = [Entity(ns, False, c.ref.index, iface) for c in iface.caps if c.name == name]
        elif ns == "fun":
            out = [Entity(ns, False, f.ref.index, iface) for f in iface.funs if f.name == name]
        elif ns == "val":
            out = [Entity(ns, False, v.index, iface) for v in iface.vals if v.name == name]
        elif ns == "risk":
            out = [Entity(ns, False, i, iface) for i, r in enumerate(iface.risks) if r == name]
        return out

    def try_lookup(self, ns: str, name: str, decl_index: int):
        """Return (entity | None, diagnostic-code | None, message)."""
        if "." in name:
            mod, _, short = name.rpartition(".")
            if mod == self.module.name:
                return self.try_lookup(ns, short, decl_index)
            for iface in self.imports:
                if iface.name == mod:
                    found = self._candidates(iface, ns, short)
                    if found:
                        return found[0], None, ""
                    return None, "E-NAME-UNKNOWN", f"module {mod} has no {ns} {short}"
            code = "E-IMPORT-MISSING" if self.registry.address_of(mod) is None else "E-NAME-UNKNOWN"
            return None, code, f"module {mod} is not imported"
        entry = self.local.get((ns, name))
        if entry is not None:
            di, index, sub = entry
            if ns != "risk" and di >= decl_index:
                return None, "E-REC-FORWARD", f"{name} is declared at or after this declaration"
            return Entity(ns, True, index, None, sub), None, ""
        if ns == "risk" and name in self.risks:
            return Entity(ns, True, 0), None, ""
        found = []
        for iface in self.imports:
            found.extend(self._candidates(iface, ns, name))
        if len(found) == 1:
            return found[0], None, ""
        if len(found) > 1:
            mods = ", ".join(sorted({e.iface.name for e in found}))
            return None, "E-NAME-AMBIG", f"{name} is provided by {mods}"
        code = "E-IMPORT-MISSING" if self.implicit else "E-NAME-UNKNOWN"
        return None, code, f"no {ns} named {name} in scope"

    def lookup(self, ns: str, name: str, decl_index: int, pos) -> Entity:
        ent, code, msg = self.try_lookup(ns, name, decl_index)
        if ent is None:
            raise ResolveFailure(Diagnostic(code, pos, msg))
        return ent


class _Resolver:
    def __init__(self, scope: Scope):
        self.scope = scope
        self.di = 0
        self.tvars: set = set()

    def fail(self, code, pos, msg):
        raise ResolveFailure(Diagnostic(code, pos, msg))

    def run(self):
        for di, d in enumerate(self.scope.module.decls):
            self.di = di
            try:
                self.decl(d)
            except ResolveFailure as exc:
                self.scope.diags.append(exc.diag)

    def decl(self, d):
        if isinstance(d, A.TypeDecl):
            self.tvars = set(d.params)
            for cap in d.caps:
                self.cap(cap, d.pos)
            for c in d.ctors:
                for f in c.fields:
                    self.type(f)
        elif isinstance(d, A.CapabilityDecl):
            pass
        elif isinstance(d, A.FunDecl):
            self.tvars = set(d.tparams)
            if d.visibility == "protected" and d.protected not in d.tparams:
                self.fail("E-NAME-UNKNOWN", d.pos, f"protected[{d.protected}] is not a type parameter")
            if d.default_for is not None:
                self.scope.lookup("type", d.default_for, self.di + 1, d.pos)
            env: set = set()
            for p in d.params:
                self.param(p, env)
            self.expr(d.body, env)
        elif isinstance(d, A.ValDecl):
            self.tvars = set()
            self.expr(d.expr, set())
        elif isinstance(d, A.InitDecl):
            self.tvars = set()
            env: set = set()
            self.param(d.param, env)
            self.expr(d.body, env)

    def cap(self, name, pos):
        if name in BUILTIN_CAPS:
            return
        self.scope.lookup("cap", name, self.di, pos)

    def type(self, t):
        if isinstance(t, A.TupleTypeExpr):
            for e in t.elems:
                self.type(e)
            return
        for c in t.caps:
            self.cap(c, t.pos)
        if t.name not in PRIMITIVES and t.name not in self.tvars:
            self.scope.lookup("type", t.name, self.di, t.pos)
        for a in t.args:
            self.type(a)

    def param(self, p: A.Param, env: set):
        if p.type is not None:
            self.type(p.type)
        if isinstance(p.pattern, A.PCtor):
            for c in p.pattern.caps:
                self.cap(c, p.pos)
        self.pattern(p.pattern, env)

    def pattern(self, p, env: set):
        if isinstance(p, A.PVar):
            env.add(p.name)
        elif isinstance(p, A.PTuple):
            for e in p.elems:
                self.pattern(e, env)
        elif isinstance(p, A.PCtor):
            self.scope.lookup("ctor", p.name, self.di, p.pos)
            for t in p.targs:
                self.type(t)
            for s in p.subs:
                self.pattern(s, env)

    def expr(self, e, env: set):
        if isinstance(e, A.Lit):
            return
        if isinstance(e, A.Var):
            if e.name in env:
                return
            ent, code, msg = self.scope.try_lookup("val", e.name, self.di)
            if ent is not None:
                return
            if e.name[:1].isupper() or "." in e.name:
                ctor, _, _ = self.scope.try_lookup("ctor", e.name, self.di)
                if ctor is not None:
                    return
            if code in ("E-NAME-UNKNOWN", "E-IMPORT-MISSING") and "." not in e.name:
                code, msg = "E-NAME-UNKNOWN", f"unbound variable {e.name}"
            self.fail(code, e.pos, msg)
        elif isinstance(e, A.Ctor):
            self.scope.lookup("ctor", e.name, self.di, e.pos)
            for t in e.targs:
                self.type(t)
            for a in e.args:
                self.expr(a, env)
        elif isinstance(e, A.Call):
            ent, code, msg = self.scope.try_lookup("fun", e.name, self.di)
            if ent is None and not (e.name in BUILTIN_FUNS and code != "E-REC-FORWARD"):
                self.fail(code, e.pos, msg)
            for t in e.targs:
                self.type(t)
            for a in e.args:
                self.expr(a, env)
        elif isinstance(e, A.Tuple):
            for a in e.elems:
                self.expr(a, env)
        elif isinstance(e, A.Binary):
            self.expr(e.left, env)
            self.expr(e.right, env)
        elif isinstance(e, A.Let):
            self.expr(e.bound, env)
            inner = set(env)
            self.pattern(e.pattern, inner)
            self.expr(e.body, inner)
        elif isinstance(e, A.Case):
            self.expr(e.scrutinee, env)
            for arm in e.arms:
                inner = set(env)
                self.pattern(arm.pattern, inner)
                self.expr(arm.body, inner)
        elif isinstance(e, A.Modify):
            self.expr(e.ref, env)
            inner = set(env)
            p = e.pattern
            if isinstance(p, A.PCtor):
                if p.name not in PRIMITIVES:
                    self.scope.lookup("type", p.name, self.di, p.pos)
                for t in p.targs:
                    self.type(t)
                for s in p.subs:
                    self.pattern(s, inner)
            else:
                self.pattern(p, inner)
            self.expr(e.body, inner)
        elif isinstance(e, A.AndReturn):
            self.expr(e.value, env)
            self.expr(e.result, env)
        elif isinstance(e, (A.Attach, A.Detach)):
            self.expr(e.expr, env)
            self.cap(e.cap, e.pos)
        elif isinstance(e, A.Cycle):
            self.expr(e.init, env)
            self.expr(e.body, env | {e.acc})
        elif isinstance(e, A.Try):
            self.expr(e.call, env)
            for h in e.handlers:
                if h.risk not in BUILTIN_RISKS:
                    self.scope.lookup("risk", h.risk, self.di, h.pos)
                self.expr(h.body, env | set(h.names))
        else:
            raise TypeError(type(e).__name__)


def resolve(module: A.AstModule, registry: Registry) -> Scope:
    """Bind every name; the returned scope carries any diagnostics found."""
    scope = Scope(module, registry)
    if not scope.diags:
        _Resolver(scope).run()
    return scope
