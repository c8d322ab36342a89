"""Type checking: builds the typed tree and the module's own interface tables."""

from __future__ import annotations

from ..interface import CapInfo, CtorInfo, FunSig, ModuleInterface, TypeInfo, ValInfo
from ..syntax import ast as A
from ..types import (
    BUILTIN_CAPS,
    BUILTIN_RISKS,
    INT,
    MASTER_ID,
    PRIM_ARITY,
    PRIMITIVES,
    SELF,
    STRUCTURAL,
    UINT,
    UNIT,
    AdtRef,
    Effect,
    FunRef,
    Risk,
    Type,
    UserCap,
    accepts,
    adt,
    has_vars,
    prim,
    render,
    subst,
    tuple_of,
    tvar,
    unify,
    with_caps,
)
from . import tree as T
from .diagnostics import Diagnostic
from .exhaustive import exhaustive
from .scope import Entity, ResolveFailure, Scope

EFFECTS = {"pure": Effect.PURE, "init": Effect.INIT, "dependent": Effect.DEPENDENT, "active": Effect.ACTIVE}


class TypeFailure(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(str(diag))
        self.diag = diag


class _Silent(Exception):
    """Raised when a declaration depends on one that already failed."""


class _Ctx:
    """Per-declaration state."""

    def __init__(self, tparams=(), modify_tail=None):
        self.tparams = list(tparams)
        self.modify_tail = modify_tail


class Checker:
    def __init__(self, scope: Scope, registry):
        self.scope = scope
        self.registry = registry
        self.module = scope.module
        self.types: dict = {}
        self.caps: dict = {}
        self.funs: dict = {}  # local index -> TFunction
        self.vals: dict = {}  # local index -> TValDecl
        self.broken: set = set()
        self.init = None
        self.diags: list = []
        self.di = 0
        self.local_defaults: dict = {}  # AdtRef -> FunSig
        self.type_pos: dict = {}

    # ---- helpers ----------------------------------------------------------------

    def fail(self, code, pos, msg):
        raise TypeFailure(Diagnostic(code, pos, msg))

    def mismatch(self, pos, msg):
        self.fail("E-TYPE-MISMATCH", pos, msg)

    def lookup(self, ns, name, pos) -> Entity:
        try:
            ent = self.scope.lookup(ns, name, self.di, pos)
        except ResolveFailure as exc:
            raise TypeFailure(exc.diag) from None
        if ent.local and (ns if ns != "ctor" else "type", ent.index) in self.broken:
            raise _Silent()
        return ent

    def show(self, t: Type, ctx: _Ctx | None = None) -> str:
        return render(t, tuple(ctx.tparams) if ctx else ())

    def type_info(self, ent: Entity) -> TypeInfo:
        if ent.local:
            return self.types[ent.index]
        return ent.iface.types[ent.index]

    def fun_sig(self, ent: Entity) -> FunSig:
        if ent.local:
            return self.funs[ent.index].sig
        return ent.iface.funs[ent.index]

    def val_info(self, ent: Entity) -> ValInfo:
        if ent.local:
            return self.vals[ent.index].info
        return ent.iface.vals[ent.index]

    def cap_ref(self, name: str, pos):
        if name in BUILTIN_CAPS:
            return name
        ent = self.lookup("cap", name, pos)
        if ent.local:
            return self.caps[ent.index].ref
        return ent.iface.caps[ent.index].ref

    def cap_open(self, cap) -> bool:
        if isinstance(cap, str):
            return False
        if cap.module == SELF:
            return self.caps[cap.index].open
        iface = self.registry.interface(cap.module)
        return iface.caps[cap.index].open

    def risk_ref(self, name: str, pos) -> Risk:
        if name in BUILTIN_RISKS:
            return Risk(name)
        ent = self.lookup("risk", name, pos)
        short = name.rpartition(".")[2]
        return Risk(short, SELF if ent.local else ent.iface.address)

    def default_for(self, t: Type):
        """The default function for cells holding ``t``, if any."""
        if t.head != "Adt":
            return None
        if t.adt.module == SELF:
            return self.local_defaults.get(t.adt)
        ref = self.registry.default_for(t.adt)
        if ref is None:
            return None
        iface = self.registry.interface(ref.module)
        return iface.funs[ref.index]

    # ---- type expressions -----------------------------------------------------------

    def elab_type(self, te, ctx: _Ctx, arg_position: bool = False) -> Type:
        if isinstance(te, A.TupleTypeExpr):
            return tuple_of(self.elab_type(e, ctx, True) for e in te.elems)
        caps = [self.cap_ref(c, te.pos) for c in te.caps]
        if te.name in ctx.tparams:
            if caps or te.args:
                self.fail("E-CAP-TARGET", te.pos, f"type parameter {te.name} takes no capabilities or arguments")
            return tvar(ctx.tparams.index(te.name))
        args = [self.elab_type(a, ctx, True) for a in te.args]
        if te.name in PRIMITIVES:
            if len(args) != PRIM_ARITY[te.name]:
                self.mismatch(te.pos, f"{te.name} expects {PRIM_ARITY[te.name]} type argument(s)")
            self.check_target(te.name, caps, te.pos)
            if te.name in ("Ref", "Context") and "Persist" not in args[0].caps:
                self.fail("E-PERSIST", te.pos, f"{te.name} content {self.show(args[0], ctx)} lacks Persist")
            return prim(te.name, args, caps)
        info = self.type_info(self.lookup("type", te.name, te.pos))
        if len(args) != len(info.params):
            self.mismatch(te.pos, f"{info.name} expects {len(info.params)} type argument(s)")
        self.check_target(info.name, caps, te.pos, info)
        return adt(info.ref, args, caps if caps else info.caps)

    def check_target(self, head: str, caps, pos, info: TypeInfo | None = None):
        for c in caps:
            if c == "Master" and head != "ID" or c == "Modify" and head != "Ref":
                self.fail("E-CAP-TARGET", pos, f"{c} cannot apply to {head}")
            if info is not None and c in BUILTIN_CAPS and c not in info.caps:
                self.fail("E-CAP-TARGET", pos, f"{info.name} does not declare {c}")
            if info is None and c == "Inspect":
                self.fail("E-CAP-TARGET", pos, f"Inspect cannot apply to {head}")

    # ---- declarations ---------------------------------------------------------------

    def run(self):
        for di, d in enumerate(self.module.decls):
            self.di = di
            try:
                self.decl(d)
            except TypeFailure as exc:
                self.diags.append(exc.diag)
                self.mark_broken(d)
            except _Silent:
                self.mark_broken(d)

    def mark_broken(self, d):
        kinds = {A.TypeDecl: "type", A.CapabilityDecl: "cap", A.FunDecl: "fun", A.ValDecl: "val"}
        ns = kinds.get(type(d))
        if ns is not None:
            entry = self.scope.local.get((ns, d.name))
            if entry is not None and entry[0] == self.di:
                self.broken.add((ns, entry[1]))

    def local_index(self, ns: str, name: str) -> int:
        return self.scope.local[(ns, name)][1]

    def decl(self, d):
        if isinstance(d, A.CapabilityDecl):
            i = self.local_index("cap", d.name)
            self.caps[i] = CapInfo(UserCap(SELF, i, d.name), d.name, d.open)
        elif isinstance(d, A.TypeDecl):
            self.type_decl(d)
        elif isinstance(d, A.FunDecl):
            self.fun_decl(d)
        elif isinstance(d, A.ValDecl):
            self.val_decl(d)
        elif isinstance(d, A.InitDecl):
            self.init_decl(d)

    def type_decl(self, d: A.TypeDecl):
        i = self.local_index("type", d.name)
        ref = AdtRef(SELF, i, d.name)
        ctx = _Ctx(d.params)
        caps = [self.cap_ref(c, d.pos) for c in d.caps]
        for c in caps:
            if c in ("Master", "Modify"):
                self.fail("E-CAP-TARGET", d.pos, f"{c} cannot be declared on a type")
        ctors = []
        for c in d.ctors:
            fields = tuple(self.elab_type(f, ctx) for f in c.fields)
            ctors.append(CtorInfo(c.name, fields))
        if d.open and not d.caps:
            inherited = set(STRUCTURAL)
            for c in ctors:
                for f in c.fields:
                    inherited &= f.caps
            caps = sorted(inherited)
        info = TypeInfo(ref, d.name, d.open, d.visibility != "private", frozenset(caps), tuple(d.params), ctors, d.shorthand)
        self.types[i] = info
        self.type_pos[i] = d.pos

    def param_type(self, p: A.Param, ctx: _Ctx) -> Type:
        if p.type is not None:
            return self.elab_type(p.type, ctx)
        pat = p.pattern
        if not isinstance(pat, A.PCtor):
            self.mismatch(p.pos, "parameter needs a type annotation")
        ent = self.lookup("ctor", pat.name, pat.pos)
        info = self.type_info(ent)
        targs = [self.elab_type(t, ctx, True) for t in pat.targs]
        if len(targs) != len(info.params):
            self.fail("E-GENERIC-AMBIG", pat.pos, f"parameter pattern {pat.name} needs explicit type arguments")
        caps = [self.cap_ref(c, pat.pos) for c in pat.caps]
        self.check_target(info.name, caps, pat.pos, info)
        return adt(info.ref, targs, caps)

    def fun_decl(self, d: A.FunDecl):
        i = self.local_index("fun", d.name)
        ctx = _Ctx(d.tparams)
        effect = EFFECTS[d.effect] if d.effect else Effect.PURE
        risks = frozenset(self.risk_ref(r, d.pos) for r in d.risks)
        ptypes = [self.param_type(p, ctx) for p in d.params]
        env: dict = {}
        tparams = []
        for p, pt in zip(d.params, ptypes):
            tp = self.pattern(p.pattern, pt, env, ctx, param=True)
            self.require_irrefutable(tp, p.pos)
            tparams.append(tp)
        protected = d.tparams.index(d.protected) if d.visibility == "protected" else None
        default_for = None
        if d.default_for is not None:
            default_for = self.default_target(d, ptypes)
        body = self.expr(d.body, env, ctx)
        sig = FunSig(
            FunRef(SELF, i, d.name),
            d.name,
            d.visibility or "private",
            protected,
            effect,
            risks,
            tuple(d.tparams),
            tuple(ptypes),
            body.type,
            default_for,
        )
        if default_for is not None:
            self.check_default(d, sig, default_for)
            self.local_defaults[default_for] = sig
        self.funs[i] = T.TFunction(sig, tparams, body, d.pos)

    def default_target(self, d: A.FunDecl, ptypes) -> AdtRef:
        ent = self.lookup("type", d.default_for, d.pos)
        info = self.type_info(ent)
        if ptypes:
            self.mismatch(d.pos, f"default function {d.name} must take no parameters")
        if d.effect not in (None, "pure"):
            self.mismatch(d.pos, f"default function {d.name} must be pure")
        if len(d.tparams) != len(info.params):
            self.mismatch(d.pos, f"default function {d.name} must take the type parameters of {info.name}")
        if info.ref in self.local_defaults or (
            info.ref.module != SELF and self.registry.default_for(info.ref) is not None
        ):
            self.mismatch(d.pos, f"{info.name} already has a default function")
        return info.ref

    def check_default(self, d, sig: FunSig, target: AdtRef):
        ret = sig.ret
        expect = tuple(tvar(k) for k in range(len(sig.tparams)))
        if ret.head != "Adt" or ret.adt != target or ret.args != expect:
            self.mismatch(d.pos, f"default function {d.name} must return {target.name} of its type parameters")

    def val_decl(self, d: A.ValDecl):
        i = self.local_index("val", d.name)
        ctx = _Ctx()
        expr = self.expr(d.expr, {}, ctx)
        self.vals[i] = T.TValDecl(ValInfo(SELF, i, d.name, expr.type), expr, d.pos)

    def init_decl(self, d: A.InitDecl):
        ctx = _Ctx()
        pt = self.param_type(d.param, ctx)
        if not (pt.head == "ID" and "Master" in pt.caps) or not isinstance(d.param.pattern, (A.PVar, A.PWild)):
            self.mismatch(d.pos, "init takes exactly one Master ID parameter")
        env: dict = {}
        tp = self.pattern(d.param.pattern, pt, env, ctx, param=True)
        risks = frozenset(self.risk_ref(r, d.pos) for r in d.risks)
        body = self.expr(d.body, env, ctx)
        sig = FunSig(FunRef(SELF, -1, "init"), "init", "private", None, Effect.ACTIVE, risks, (), (pt,), body.type)
        self.init = T.TFunction(sig, [tp], body, d.pos, is_init=True)

    # ---- patterns ---------------------------------------------------------------------

    def pattern(self, p, t: Type, env: dict, ctx: _Ctx, param: bool = False) -> T.TPat:
        if isinstance(p, A.PVar):
            b = T.Binding(p.name, t, p.pos)
            env[p.name] = b
            return T.TPVar(t, p.pos, b)
        if isinstance(p, A.PWild):
            return T.TPWild(t, p.pos)
        if isinstance(p, A.PTuple):
            if t.head != "Tuple" or len(t.args) != len(p.elems):
                self.mismatch(p.pos, f"tuple pattern of {len(p.elems)} against {self.show(t, ctx)}")
            return T.TPTuple(t, p.pos, [self.pattern(s, et, env, ctx) for s, et in zip(p.elems, t.args)])
        ent = self.lookup("ctor", p.name, p.pos)
        info = self.type_info(ent)
        if t.head != "Adt" or t.adt != info.ref:
            self.mismatch(p.pos, f"constructor {p.name} does not build {self.show(t, ctx)}")
        if p.targs and not param:
            targs = tuple(self.elab_type(a, ctx, True) for a in p.targs)
            if targs != t.args:
                self.mismatch(p.pos, f"type arguments of {p.name} do not match {self.show(t, ctx)}")
        ctor = info.ctors[ent.sub]
        if len(p.subs) != len(ctor.fields):
            self.mismatch(p.pos, f"{p.name} has {len(ctor.fields)} field(s), pattern gives {len(p.subs)}")
        subs = [self.pattern(s, subst(f, t.args), env, ctx) for s, f in zip(p.subs, ctor.fields)]
        return T.TPCtor(t, p.pos, info, t.args, ent.sub, subs)

    def require_irrefutable(self, tp: T.TPat, pos):
        if not exhaustive([[tp]], [tp.type], self.ctors_of):
            self.fail("E-MATCH-NONEXH", pos, "pattern does not cover every value")

    def ctors_of(self, t: Type) -> list:
        if t.adt.module == SELF:
            info = self.types[t.adt.index]
        else:
            info = self.registry.interface(t.adt.module).types[t.adt.index]
        return [tuple(subst(f, t.args) for f in c.fields) for c in info.ctors]

    # ---- expressions -------------------------------------------------------------------

    def expr(self, e, env: dict, ctx: _Ctx, expected: Type | None = None) -> T.TNode:
        if not isinstance(e, (A.Let, A.Case, A.AndReturn)):
            ctx = self.no_tail(ctx)
        if isinstance(e, A.Lit):
            return self.literal(e, expected)
        if isinstance(e, A.Var):
            return self.var(e, env, ctx)
        if isinstance(e, A.Ctor):
            return self.ctor(e.name, e.targs, e.args, e.pos, env, ctx)
        if isinstance(e, A.Call):
            return self.call(e, env, ctx)
        if isinstance(e, A.Tuple):
            exp = expected.args if expected is not None and expected.head == "Tuple" and len(expected.args) == len(e.elems) else [None] * len(e.elems)
            elems = [self.expr(x, env, ctx, et) for x, et in zip(e.elems, exp)]
            return T.TTuple(tuple_of(x.type for x in elems), e.pos, elems)
        if isinstance(e, A.Binary):
            return self.binary(e, env, ctx, expected)
        if isinstance(e, A.Let):
            bound = self.expr(e.bound, env, self.no_tail(ctx))
            inner = dict(env)
            pat = self.pattern(e.pattern, bound.type, inner, ctx)
            self.require_irrefutable(pat, e.pos)
            body = self.tail(e.body, inner, ctx, expected)
            return T.TLet(body.type, e.pos, pat, bound, body)
        if isinstance(e, A.Case):
            return self.case(e, env, ctx, expected)
        if isinstance(e, A.Modify):
            return self.modify(e, env, ctx)
        if isinstance(e, A.AndReturn):
            if ctx.modify_tail is None:
                self.mismatch(e.pos, "'& return' outside the tail of a modify body")
            return self.and_return(e, env, ctx)
        if isinstance(e, (A.Attach, A.Detach)):
            arg = self.expr(e.expr, env, ctx)
            cap = self.cap_ref(e.cap, e.pos)
            t = arg.type
            if t.head in ("Tuple", "Var"):
                self.fail("E-CAP-TARGET", e.pos, f"capabilities cannot be changed on {self.show(t, ctx)}")
            attach = isinstance(e, A.Attach)
            caps = t.caps | {cap} if attach else t.caps - {cap}
            return T.TCapOp(with_caps(t, caps), e.pos, attach, cap, arg)
        if isinstance(e, A.Cycle):
            init = self.expr(e.init, env, ctx, expected)
            acc = T.Binding(e.acc, init.type, e.pos)
            inner = dict(env)
            inner[e.acc] = acc
            body = self.expr(e.body, inner, _Ctx(ctx.tparams), init.type)
            body = self.coerce(body, init.type, e.pos, ctx, what="cycle body")
            return T.TCycle(init.type, e.pos, e.bound, init, acc, body)
        if isinstance(e, A.Try):
            return self.try_(e, env, ctx, expected)
        raise TypeError(type(e).__name__)

    def tail(self, e, env, ctx, expected):
        """Expression in tail position: keeps modify-tail mode."""
        return self.expr(e, env, ctx, expected)

    def no_tail(self, ctx: _Ctx) -> _Ctx:
        return ctx if ctx.modify_tail is None else _Ctx(ctx.tparams)

    def literal(self, e: A.Lit, expected) -> T.TNode:
        if e.kind == "unit":
            return T.TLit(UNIT, e.pos, None)
        if e.kind == "uint" and expected is not None and expected.head == "Int":
            t = INT
        else:
            t = INT if e.kind == "int" else UINT
        lo, hi = (-(2**63), 2**63 - 1) if t.head == "Int" else (0, 2**64 - 1)
        if not lo <= e.value <= hi:
            self.mismatch(e.pos, f"literal {e.value} out of range for {t.head}")
        return T.TLit(t, e.pos, e.value)

    def var(self, e: A.Var, env, ctx) -> T.TNode:
        b = env.get(e.name)
        if b is not None:
            return T.TVar(b.type, e.pos, b)
        ent, code, _ = self.scope.try_lookup("val", e.name, self.di)
        if ent is not None:
            if ent.local and ("val", ent.index) in self.broken:
                raise _Silent()
            info = self.val_info(ent)
            return T.TVal(info.type, e.pos, info)
        return self.ctor(e.name, [], [], e.pos, env, ctx)

    def ctor(self, name, targs_ast, args_ast, pos, env, ctx) -> T.TNode:
        ctx = self.no_tail(ctx)
        ent = self.lookup("ctor", name, pos)
        info = self.type_info(ent)
        if not ent.local and not info.open:
            self.fail("E-CTOR-CLOSED", pos, f"{info.name} is not open and is defined in {ent.iface.name}")
        fields = info.ctors[ent.sub].fields
        targs = self.solve(
            info.name, info.params, fields, targs_ast, args_ast, pos, env, ctx
        )
        binding, args = targs
        return T.TCtor(adt(info.ref, binding, info.caps), pos, info, tuple(binding), ent.sub, args)

    def solve(self, name, tparams, ptypes, targs_ast, args_ast, pos, env, ctx):
        """Instantiate a generic signature and check the arguments against it."""
        if len(args_ast) != len(ptypes):
            self.mismatch(pos, f"{name} expects {len(ptypes)} argument(s), got {len(args_ast)}")
        if targs_ast:
            if len(targs_ast) != len(tparams):
                self.mismatch(pos, f"{name} expects {len(tparams)} type argument(s)")
            binding = [self.elab_type(t, ctx, True) for t in targs_ast]
        else:
            binding = [None] * len(tparams)
        args = []
        for a, pt in zip(args_ast, ptypes):
            hint = subst(pt, tuple(binding))
            node = self.expr(a, env, ctx, None if has_vars(hint) else hint)
            if not targs_ast and not unify(pt, node.type, binding) and not self.numeric_pair(pt, node.type):
                self.mismatch(a.pos, f"argument of type {self.show(node.type, ctx)} does not fit {name}")
            args.append(node)
        if any(b is None for b in binding):
            missing = [tparams[k] for k, b in enumerate(binding) if b is None]
            self.fail("E-GENERIC-AMBIG", pos, f"cannot infer {', '.join(missing)} for {name}")
        binding = tuple(binding)
        out = []
        for a, node, pt in zip(args_ast, args, ptypes):
            out.append(self.coerce(node, subst(pt, binding), a.pos, ctx, what=f"argument of {name}"))
        return binding, out

    @staticmethod
    def numeric_pair(want: Type, got: Type) -> bool:
        return want.head in ("UInt", "Int") and got.head in ("UInt", "Int")

    def coerce(self, node: T.TNode, want: Type, pos, ctx, what: str) -> T.TNode:
        if accepts(want, node.type):
            return node
        if self.numeric_pair(want, node.type) and want.head != node.type.head:
            return T.TConv(want, node.pos, node)
        self.mismatch(pos, f"{what}: expected {self.show(want, ctx)}, found {self.show(node.type, ctx)}")

    def call(self, e: A.Call, env, ctx) -> T.TNode:
        ctx = self.no_tail(ctx)
        ent, code, msg = self.scope.try_lookup("fun", e.name, self.di)
        if ent is None:
            if e.name in ("derive", "read", "Context.new", "ID.new") and code != "E-REC-FORWARD":
                return self.builtin(e, env, ctx)
            self.fail(code, e.pos, msg)
        if ent.local and ("fun", ent.index) in self.broken:
            raise _Silent()
        sig = self.fun_sig(ent)
        binding, args = self.solve(sig.name, sig.tparams, sig.params, e.targs, e.args, e.pos, env, ctx)
        return T.TCall(subst(sig.ret, binding), e.pos, sig, binding, args)

    def builtin(self, e: A.Call, env, ctx) -> T.TNode:
        name = e.name
        if name in ("Context.new", "ID.new"):
            if e.args:
                self.mismatch(e.pos, f"{name} takes no arguments")
            if name == "ID.new":
                if e.targs:
                    self.mismatch(e.pos, "ID.new takes no type arguments")
                return T.TBuiltin(MASTER_ID, e.pos, "id_new", [])
            if len(e.targs) != 1:
                self.fail("E-GENERIC-AMBIG", e.pos, "Context.new needs one explicit type argument")
            inner = self.elab_type(e.targs[0], ctx, True)
            if "Persist" not in inner.caps:
                self.fail("E-PERSIST", e.pos, f"cells cannot hold {self.show(inner, ctx)}: no Persist")
            return T.TBuiltin(prim("Context", [inner]), e.pos, "context_new", [], inner)
        if e.targs:
            self.mismatch(e.pos, f"{name} takes no type arguments")
        if name == "derive":
            if len(e.args) != 2:
                self.mismatch(e.pos, "derive expects a context and an ID")
            c = self.expr(e.args[0], env, ctx)
            i = self.expr(e.args[1], env, ctx)
            if c.type.head != "Context":
                self.mismatch(e.args[0].pos, f"derive expects a Context, found {self.show(c.type, ctx)}")
            if i.type.head != "ID":
                self.mismatch(e.args[1].pos, f"derive expects an ID, found {self.show(i.type, ctx)}")
            inner = c.type.args[0]
            return T.TBuiltin(prim("Ref", [inner], ["Modify"]), e.pos, "derive", [c, i], inner)
        if len(e.args) != 1:
            self.mismatch(e.pos, "read expects one reference")
        r = self.expr(e.args[0], env, ctx)
        if r.type.head != "Ref":
            self.mismatch(e.args[0].pos, f"read expects a Ref, found {self.show(r.type, ctx)}")
        inner = r.type.args[0]
        return T.TBuiltin(inner, e.pos, "read", [r], inner, self.default_for(inner))

    def binary(self, e: A.Binary, env, ctx, expected) -> T.TNode:
        ctx = self.no_tail(ctx)
        hint = expected if expected is not None and expected.is_numeric else None
        if isinstance(e.left, A.Lit) and not isinstance(e.right, A.Lit):
            right = self.expr(e.right, env, ctx, hint)
            left = self.expr(e.left, env, ctx, right.type)
        else:
            left = self.expr(e.left, env, ctx, hint)
            right = self.expr(e.right, env, ctx, left.type)
        for side in (left, right):
            if not side.type.is_numeric:
                self.mismatch(side.pos, f"arithmetic on {self.show(side.type, ctx)}")
        if left.type != right.type:
            self.mismatch(e.pos, f"operands {self.show(left.type, ctx)} and {self.show(right.type, ctx)} differ")
        return T.TArith(left.type, e.pos, e.op, left, right)

    def case(self, e: A.Case, env, ctx, expected) -> T.TNode:
        scrut = self.expr(e.scrutinee, env, self.no_tail(ctx))
        arms = []
        rtype = None
        for arm in e.arms:
            inner = dict(env)
            pat = self.pattern(arm.pattern, scrut.type, inner, ctx)
            body = self.tail(arm.body, inner, ctx, expected if rtype is None else rtype)
            if rtype is None:
                rtype = body.type
            elif body.type != rtype:
                body = self.coerce_exact(body, rtype, arm.pos, ctx)
            arms.append(T.TArm(pat, body))
        if not exhaustive([[a.pattern] for a in arms], [scrut.type], self.ctors_of):
            self.fail("E-MATCH-NONEXH", e.pos, f"case over {self.show(scrut.type, ctx)} is not exhaustive")
        return T.TCase(rtype, e.pos, scrut, arms)

    def coerce_exact(self, node, want, pos, ctx):
        self.mismatch(pos, f"branch type {self.show(node.type, ctx)} differs from {self.show(want, ctx)}")

    def modify(self, e: A.Modify, env, ctx) -> T.TNode:
        ctx = self.no_tail(ctx)
        ref = self.expr(e.ref, env, ctx)
        if ref.type.head != "Ref":
            self.mismatch(e.ref.pos, f"modify expects a Ref, found {self.show(ref.type, ctx)}")
        inner = ref.type.args[0]
        p = e.pattern
        if isinstance(p, A.PCtor):
            if len(p.subs) != 1 or not isinstance(p.subs[0], (A.PVar, A.PWild)):
                self.mismatch(p.pos, "modify binds the cell content as Name(variable)")
            if p.name in PRIMITIVES:
                ok = inner.head == p.name
            else:
                info = self.type_info(self.lookup("type", p.name, p.pos))
                ok = inner.head == "Adt" and inner.adt == info.ref
            if not ok:
                self.mismatch(p.pos, f"cell holds {self.show(inner, ctx)}, not {p.name}")
            if p.targs and tuple(self.elab_type(a, ctx, True) for a in p.targs) != inner.args:
                self.mismatch(p.pos, f"type arguments of {p.name} do not match the cell")
            p = p.subs[0]
        inner_env = dict(env)
        pat = self.pattern(p, inner, inner_env, ctx)
        if not isinstance(pat, (T.TPVar, T.TPWild)):
            self.require_irrefutable(pat, p.pos)
        tail = {"cell": inner, "ret": None}
        body = self.expr(e.body, inner_env, _Ctx(ctx.tparams, tail))
        kinds = {isinstance(t, T.TAndReturn) for t in tails(body)}
        if len(kinds) > 1:
            self.mismatch(e.pos, "every branch of a modify body must use '& return' or none")
        returns = kinds == {True}
        result = body.type if returns else UNIT
        if not returns:
            body = self.coerce(body, inner, e.pos, ctx, what="new cell content")
        binding = pat.binding if isinstance(pat, T.TPVar) else None
        node = T.TModify(result, e.pos, ref, binding, body, inner, self.default_for(inner), returns)
        return node

    def and_return(self, e: A.AndReturn, env, ctx) -> T.TNode:
        tail = ctx.modify_tail
        inner_ctx = _Ctx(ctx.tparams)
        value = self.expr(e.value, env, inner_ctx, tail["cell"])
        value = self.coerce(value, tail["cell"], e.value.pos, ctx, what="new cell content")
        result = self.expr(e.result, env, inner_ctx)
        if tail["ret"] is not None and tail["ret"] != result.type:
            self.mismatch(e.pos, f"modify returns {self.show(tail['ret'], ctx)} and {self.show(result.type, ctx)}")
        tail["ret"] = result.type
        return T.TAndReturn(result.type, e.pos, value, result)

    def try_(self, e: A.Try, env, ctx, expected) -> T.TNode:
        ctx = self.no_tail(ctx)
        call = self.call(e.call, env, ctx)
        if not isinstance(call, T.TCall):
            self.mismatch(e.pos, "try needs a call to a declared function")
        handlers = []
        seen = set()
        for h in e.handlers:
            risk = self.risk_ref(h.risk, h.pos)
            if risk in seen:
                self.mismatch(h.pos, f"{h.risk} handled twice")
            seen.add(risk)
            if len(h.names) != len(call.args):
                self.mismatch(h.pos, f"handler binds {len(h.names)} argument(s), the call has {len(call.args)}")
            inner = dict(env)
            bindings = []
            for n, a in zip(h.names, call.args):
                b = T.Binding(n, a.type, h.pos)
                if n != "_":
                    inner[n] = b
                bindings.append(b)
            body = self.expr(h.body, inner, ctx, call.type)
            body = self.coerce(body, call.type, h.pos, ctx, what="handler result")
            handlers.append(T.THandler(risk, bindings, body, h.pos))
        return T.TTry(call.type, e.pos, call, handlers)


def tails(node: T.TNode) -> list:
    """Nodes in tail position (through let bodies and case arms)."""
    if isinstance(node, T.TLet):
        return tails(node.body)
    if isinstance(node, T.TCase):
        return [t for a in node.arms for t in tails(a.body)]
    return [node]


def check_types(scope: Scope, registry) -> tuple[T.TypedModule | None, list]:
    chk = Checker(scope, registry)
    chk.run()
    if chk.diags:
        return None, chk.diags
    tm = T.TypedModule(
        scope.module.name,
        [chk.types[i] for i in sorted(chk.types)],
        [chk.caps[i] for i in sorted(chk.caps)],
        [chk.funs[i] for i in sorted(chk.funs)],
        [chk.vals[i] for i in sorted(chk.vals)],
        chk.init,
        sorted(scope.risks),
        list(scope.imports),
        [chk.type_pos[i] for i in sorted(chk.type_pos)],
    )
    return tm, []


def interface_of(tm: T.TypedModule, address: bytes = SELF) -> ModuleInterface:
    """The interface a module exposes, with module keys still SELF."""
    return ModuleInterface(
        address,
        tm.name,
        list(tm.types),
        list(tm.caps),
        [f.sig for f in tm.funs],
        [v.info for v in tm.vals],
        list(tm.risks),
        tm.init is not None,
    )
