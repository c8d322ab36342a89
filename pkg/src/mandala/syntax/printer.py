"""Render an AST back to source text that re-parses to an equal tree."""

from __future__ import annotations

from . import ast as A

_COMPOUND = (A.Let, A.Case, A.Modify, A.Cycle, A.Try, A.AndReturn)
INDENT = "  "


def type_str(t) -> str:
    if isinstance(t, A.TupleTypeExpr):
        return "(" + ", ".join(type_str(e) for e in t.elems) + ")"
    s = t.name
    if t.args:
        s += "[" + ", ".join(type_str(a) for a in t.args) + "]"
    return " ".join([*t.caps, s])


def _targs(targs) -> str:
    return "[" + ", ".join(type_str(t) for t in targs) + "]" if targs else ""


def pattern_str(p) -> str:
    if isinstance(p, A.PVar):
        return p.name
    if isinstance(p, A.PWild):
        return "_"
    if isinstance(p, A.PTuple):
        return "(" + ", ".join(pattern_str(e) for e in p.elems) + ")"
    s = p.name + _targs(p.targs)
    if p.subs or not p.targs:
        s += "(" + ", ".join(pattern_str(e) for e in p.subs) + ")"
    return " ".join([*p.caps, s])


def _atom(e, depth: int) -> str:
    """Render ``e`` so it can stand as an operand."""
    s = expr_str(e, depth)
    if isinstance(e, (A.Binary, *_COMPOUND)):
        return "{ " + s + " }" if isinstance(e, _COMPOUND) else "(" + s + ")"
    return s


def _braced(e, depth: int) -> str:
    s = expr_str(e, depth)
    return "{ " + s + " }" if isinstance(e, _COMPOUND) else s


def expr_str(e, depth: int = 0) -> str:
    if isinstance(e, A.Lit):
        if e.kind == "unit":
            return "()"
        return f"{e.value}i" if e.kind == "int" else str(e.value)
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, (A.Ctor, A.Call)):
        return e.name + _targs(e.targs) + "(" + ", ".join(expr_str(a, depth) for a in e.args) + ")"
    if isinstance(e, A.Tuple):
        return "(" + ", ".join(expr_str(a, depth) for a in e.elems) + ")"
    if isinstance(e, A.Binary):
        left = _atom(e.left, depth) if isinstance(e.left, _COMPOUND) else expr_str(e.left, depth)
        return f"{left} {e.op} {_atom(e.right, depth)}"
    if isinstance(e, (A.Attach, A.Detach)):
        kind = "attach" if isinstance(e, A.Attach) else "detach"
        return f"{_atom(e.expr, depth)}.{kind}[{e.cap}]"
    pad = INDENT * (depth + 1)
    if isinstance(e, A.Let):
        return (
            f"let {pattern_str(e.pattern)} = {_braced(e.bound, depth + 1)} in\n"
            f"{INDENT * depth}{expr_str(e.body, depth)}"
        )
    if isinstance(e, A.Case):
        arms = []
        for arm in e.arms:
            body = expr_str(arm.body, depth + 2)
            if len(e.arms) > 1 and isinstance(arm.body, _COMPOUND):
                body = "{ " + body + " }"
            arms.append(f"{pattern_str(arm.pattern)} =>\n{INDENT * (depth + 2)}{body}")
        sep = f"\n{pad}| "
        return f"case {_braced(e.scrutinee, depth + 1)} of\n{pad}" + sep.join(arms)
    if isinstance(e, A.Modify):
        return (
            f"modify {_braced(e.ref, depth + 1)} with {pattern_str(e.pattern)} =>\n"
            f"{pad}{expr_str(e.body, depth + 1)}"
        )
    if isinstance(e, A.AndReturn):
        value = _atom(e.value, depth) if isinstance(e.value, _COMPOUND) else expr_str(e.value, depth)
        return f"{value} & return {expr_str(e.result, depth)}"
    if isinstance(e, A.Cycle):
        return (
            f"cycle {e.bound} from {_braced(e.init, depth + 1)} as {e.acc} =>\n"
            f"{pad}{expr_str(e.body, depth + 1)}"
        )
    if isinstance(e, A.Try):
        lines = [f"try {expr_str(e.call, depth)} catch {{"]
        for h in e.handlers:
            lines.append(f"{pad}{h.risk}({', '.join(h.names)}) => {_braced(h.body, depth + 2)}")
        lines.append(INDENT * depth + "}")
        return "\n".join(lines)
    raise TypeError(f"cannot print {type(e).__name__}")


def _param_str(p: A.Param) -> str:
    if p.type is None:
        return pattern_str(p.pattern)
    return f"{pattern_str(p.pattern)}: {type_str(p.type)}"


def _risks(risks, lines):
    for r in risks:
        lines.append(f"{INDENT}risk {r}")


def decl_str(d) -> list[str]:
    lines: list[str] = []
    if isinstance(d, A.TypeDecl):
        head = " ".join(
            x for x in ["open" if d.open else "", d.visibility or "", "type", *d.caps] if x
        )
        name = d.name + ("[" + ", ".join(d.params) + "]" if d.params else "")
        if d.shorthand:
            fields = ", ".join(type_str(f) for f in d.ctors[0].fields)
            lines.append(f"{INDENT}{head} {name}({fields})")
        else:
            ctors = []
            for c in d.ctors:
                fields = "(" + ", ".join(type_str(f) for f in c.fields) + ")" if c.fields else ""
                ctors.append(c.name + fields)
            lines.append(f"{INDENT}{head} {name} {{" + ", ".join(ctors) + "}")
        return lines
    if isinstance(d, A.CapabilityDecl):
        return [f"{INDENT}{'open ' if d.open else ''}capability {d.name}"]
    if isinstance(d, A.ValDecl):
        return [f"{INDENT}public val {d.name} = {_braced(d.expr, 2)}"]
    if isinstance(d, A.InitDecl):
        _risks(d.risks, lines)
        lines.append(f"{INDENT}init({_param_str(d.param)}) => {{")
        lines.append(f"{INDENT * 2}{expr_str(d.body, 2)}")
        lines.append(f"{INDENT}}}")
        return lines
    _risks(d.risks, lines)
    parts = []
    if d.visibility == "protected":
        parts.append(f"protected[{d.protected}]")
    elif d.visibility:
        parts.append(d.visibility)
    if d.effect:
        parts.append(d.effect)
    if d.default_for:
        parts.append(f"default[{d.default_for}]")
    name = d.name + ("[" + ", ".join(d.tparams) + "]" if d.tparams else "")
    params = ", ".join(_param_str(p) for p in d.params)
    parts.append(f"{name}({params}) => {{")
    lines.append(INDENT + " ".join(parts))
    lines.append(f"{INDENT * 2}{expr_str(d.body, 2)}")
    lines.append(f"{INDENT}}}")
    return lines


def pretty_print(module: A.AstModule) -> str:
    lines = []
    for imp in module.imports:
        lines.append(f"import {imp.path}{'.*' if imp.wildcard else ''}")
    lines.append(f"module {module.name} {{")
    for i, d in enumerate(module.decls):
        if i:
            lines.append("")
        lines.extend(decl_str(d))
    lines.append("}")
    return "\n".join(lines) + "\n"
