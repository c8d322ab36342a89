"""Recursive-descent parser for Mandala modules."""

from __future__ import annotations

from . import ast as A
from .lexer import Token, tokenize


class ParseError(Exception):
    def __init__(self, line: int, column: int, expected: str, found: str):
        super().__init__(f"{line}:{column}: expected {expected}, found {found}")
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found


def is_ctor_name(name: str) -> bool:
    last = name.rsplit(".", 1)[-1]
    return last[:1].isupper()


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = list(tokens)
        last = self.toks[-1] if self.toks else None
        if last is None:
            eof = Token("eof", "", 1, 1, 0)
        else:
            eof = Token("eof", "", last.line, last.column + len(last.lexeme), last.end)
        self.toks.append(eof)
        self.i = 0

    # ---- token helpers ------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, lexeme: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.lexeme == lexeme and t.kind in ("keyword", "punctuation")

    def at_ident(self, k: int = 0) -> bool:
        return self.peek(k).kind == "identifier"

    def advance(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, expected: str):
        t = self.peek()
        found = "end of input" if t.kind == "eof" else repr(t.lexeme)
        raise ParseError(t.line, t.column, expected, found)

    def expect(self, lexeme: str) -> Token:
        if not self.at(lexeme):
            self.fail(repr(lexeme))
        return self.advance()

    def accept(self, lexeme: str) -> bool:
        if self.at(lexeme):
            self.advance()
            return True
        return False

    def ident(self) -> str:
        if not self.at_ident():
            self.fail("identifier")
        return self.advance().lexeme

    def pos(self) -> tuple:
        t = self.peek()
        return (t.line, t.column)

    def qual_ident(self) -> str:
        parts = [self.ident()]
        while (
            self.at(".")
            and self.at_ident(1)
            and not (self.peek(1).lexeme in ("attach", "detach") and self.at("[", 2))
        ):
            self.advance()
            parts.append(self.advance().lexeme)
        return ".".join(parts)

    def ident_run(self) -> list[str]:
        names = [self.qual_ident()]
        while self.at_ident():
            names.append(self.qual_ident())
        return names

    # ---- module ---------------------------------------------------------------

    def module(self) -> A.AstModule:
        imports = []
        while self.at("import"):
            imports.append(self.import_())
        pos = self.pos()
        self.expect("module")
        name = self.ident()
        self.expect("{")
        decls = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.fail("'}'")
            if self.at("import"):
                imports.append(self.import_())
                continue
            decls.append(self.decl())
        self.expect("}")
        if self.peek().kind != "eof":
            self.fail("end of input")
        return A.AstModule(name, imports, decls, pos)

    def import_(self) -> A.Import:
        pos = self.pos()
        self.expect("import")
        parts = [self.ident()]
        wildcard = False
        while self.accept("."):
            if self.accept("*"):
                wildcard = True
                break
            parts.append(self.ident())
        return A.Import(".".join(parts), wildcard, pos)

    def decl(self) -> A.Decl:
        pos = self.pos()
        risks = []
        while self.accept("risk"):
            risks.append(self.qual_ident())
        if self.at("open"):
            if self.at("capability", 1):
                self._no_risks(risks)
                self.advance()
                return self.capability_decl(True, pos)
            self._no_risks(risks)
            self.advance()
            vis = None
            if self.at("public") or self.at("private"):
                vis = self.advance().lexeme
            return self.type_decl(True, vis, pos)
        if self.at("capability"):
            self._no_risks(risks)
            return self.capability_decl(False, pos)
        if self.at("type") or ((self.at("public") or self.at("private")) and self.at("type", 1)):
            self._no_risks(risks)
            vis = None
            if not self.at("type"):
                vis = self.advance().lexeme
            return self.type_decl(False, vis, pos)
        if self.at("public") and self.at("val", 1):
            self._no_risks(risks)
            self.advance()
            self.advance()
            name = self.ident()
            self.expect("=")
            return A.ValDecl(name, self.expr(), pos)
        if self.at("init") and self.at("(", 1):
            self.advance()
            self.expect("(")
            param = self.param()
            self.expect(")")
            self.expect("=>")
            return A.InitDecl(risks, param, self.expr(), pos)
        return self.fun_decl(risks, pos)

    def _no_risks(self, risks: list[str]):
        if risks:
            self.fail("function declaration after risk clause")

    def capability_decl(self, is_open: bool, pos) -> A.CapabilityDecl:
        self.expect("capability")
        return A.CapabilityDecl(is_open, self.ident(), pos)

    def type_decl(self, is_open: bool, vis, pos) -> A.TypeDecl:
        self.expect("type")
        names = self.ident_run()
        name = names[-1]
        caps = names[:-1]
        params = []
        if self.accept("["):
            params.append(self.ident())
            while self.accept(","):
                params.append(self.ident())
            self.expect("]")
        ctors: list[A.CtorDecl] = []
        shorthand = False
        if self.at("("):
            cpos = self.pos()
            shorthand = True
            ctors.append(A.CtorDecl(name, self.field_list(), cpos))
        elif self.accept("{"):
            if not self.at("}"):
                ctors.append(self.ctor_decl())
                while self.accept(","):
                    ctors.append(self.ctor_decl())
            self.expect("}")
        return A.TypeDecl(is_open, vis, caps, name, params, ctors, shorthand, pos)

    def ctor_decl(self) -> A.CtorDecl:
        pos = self.pos()
        name = self.ident()
        fields = self.field_list() if self.at("(") else []
        return A.CtorDecl(name, fields, pos)

    def field_list(self) -> list:
        self.expect("(")
        fields = []
        if not self.at(")"):
            fields.append(self.type_expr())
            while self.accept(","):
                fields.append(self.type_expr())
        self.expect(")")
        return fields

    def fun_decl(self, risks, pos) -> A.FunDecl:
        vis = protected = effect = default_for = None
        if self.at("public") or self.at("private"):
            vis = self.advance().lexeme
        elif self.accept("protected"):
            vis = "protected"
            self.expect("[")
            protected = self.ident()
            self.expect("]")
        if self.peek().lexeme in ("pure", "init", "dependent", "active") and self.peek().kind == "keyword":
            effect = self.advance().lexeme
        if self.accept("default"):
            self.expect("[")
            default_for = self.qual_ident()
            self.expect("]")
        if not self.at_ident():
            self.fail("declaration")
        name = self.ident()
        tparams = []
        if self.accept("["):
            tparams.append(self.ident())
            while self.accept(","):
                tparams.append(self.ident())
            self.expect("]")
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.param())
            while self.accept(","):
                params.append(self.param())
        self.expect(")")
        self.expect("=>")
        body = self.expr()
        return A.FunDecl(risks, vis, protected, effect, default_for, name, tparams, params, body, pos)

    def param(self) -> A.Param:
        pos = self.pos()
        if self.at_ident() and self.at(":", 1):
            name = self.advance().lexeme
            self.advance()
            pat = A.PWild(pos) if name == "_" else A.PVar(name, pos)
            return A.Param(pat, self.type_expr(), pos)
        if self.at("("):
            pat = self.pattern()
            self.expect(":")
            return A.Param(pat, self.type_expr(), pos)
        names = self.ident_run()
        if not (self.at("[") or self.at("(")):
            self.fail("'(' after constructor pattern")
        pat = self.ctor_pattern_rest(names[-1], pos)
        pat.caps = names[:-1]
        return A.Param(pat, None, pos)

    # ---- types ----------------------------------------------------------------

    def type_expr(self):
        pos = self.pos()
        if self.accept("("):
            elems = [self.type_expr()]
            while self.accept(","):
                elems.append(self.type_expr())
            self.expect(")")
            return A.TupleTypeExpr(elems, pos)
        names = self.ident_run()
        args = []
        if self.accept("["):
            args.append(self.type_expr())
            while self.accept(","):
                args.append(self.type_expr())
            self.expect("]")
        return A.TypeExpr(names[:-1], names[-1], args, pos)

    def targs(self) -> list:
        args = []
        if self.accept("["):
            args.append(self.type_expr())
            while self.accept(","):
                args.append(self.type_expr())
            self.expect("]")
        return args

    # ---- patterns -------------------------------------------------------------

    def pattern(self):
        pos = self.pos()
        if self.accept("("):
            elems = [self.pattern()]
            while self.accept(","):
                elems.append(self.pattern())
            self.expect(")")
            if len(elems) == 1:
                return elems[0]
            return A.PTuple(elems, pos)
        name = self.qual_ident()
        if name == "_":
            return A.PWild(pos)
        if is_ctor_name(name):
            return self.ctor_pattern_rest(name, pos)
        return A.PVar(name, pos)

    def ctor_pattern_rest(self, name: str, pos) -> A.PCtor:
        targs = self.targs()
        subs = []
        if self.accept("("):
            if not self.at(")"):
                subs.append(self.pattern())
                while self.accept(","):
                    subs.append(self.pattern())
            self.expect(")")
        return A.PCtor(name, targs, subs, [], pos)

    # ---- expressions ----------------------------------------------------------

    def expr(self):
        pos = self.pos()
        if self.accept("let"):
            pat = self.pattern()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            return A.Let(pat, bound, self.expr(), pos)
        if self.accept("case"):
            scrut = self.expr()
            self.expect("of")
            self.accept("|")
            arms = [self.arm()]
            while self.accept("|"):
                arms.append(self.arm())
            return A.Case(scrut, arms, pos)
        if self.accept("modify"):
            ref = self.expr()
            self.expect("with")
            pat = self.pattern()
            self.expect("=>")
            return A.Modify(ref, pat, self.expr(), pos)
        if self.accept("cycle"):
            t = self.peek()
            if t.kind != "uint-literal":
                self.fail("loop bound literal")
            self.advance()
            self.expect("from")
            init = self.expr()
            self.expect("as")
            acc = self.ident()
            self.expect("=>")
            return A.Cycle(int(t.lexeme), init, acc, self.expr(), pos)
        if self.accept("try"):
            call = self.postfix()
            if not isinstance(call, A.Call):
                raise ParseError(pos[0], pos[1], "function call after 'try'", type(call).__name__)
            self.expect("catch")
            self.expect("{")
            handlers = [self.handler()]
            while not self.at("}"):
                self.accept("|")
                handlers.append(self.handler())
            self.expect("}")
            return A.Try(call, handlers, pos)
        left = self.additive()
        if self.accept("&"):
            self.expect("return")
            return A.AndReturn(left, self.expr(), pos)
        return left

    def arm(self) -> A.Arm:
        pos = self.pos()
        pat = self.pattern()
        self.expect("=>")
        return A.Arm(pat, self.expr(), pos)

    def handler(self) -> A.Handler:
        pos = self.pos()
        risk = self.qual_ident()
        self.expect("(")
        names = []
        if not self.at(")"):
            names.append(self.ident())
            while self.accept(","):
                names.append(self.ident())
        self.expect(")")
        self.expect("=>")
        return A.Handler(risk, names, self.expr(), pos)

    def additive(self):
        left = self.postfix()
        while self.at("+") or self.at("-"):
            pos = self.pos()
            op = self.advance().lexeme
            left = A.Binary(op, left, self.postfix(), pos)
        return left

    def postfix(self):
        e = self.primary()
        while self.at(".") and self.peek(1).lexeme in ("attach", "detach") and self.at("[", 2):
            pos = self.pos()
            self.advance()
            kind = self.advance().lexeme
            self.advance()
            cap = self.qual_ident()
            self.expect("]")
            e = A.Attach(e, cap, pos) if kind == "attach" else A.Detach(e, cap, pos)
        return e

    def primary(self):
        t = self.peek()
        pos = (t.line, t.column)
        if t.kind == "uint-literal":
            self.advance()
            return A.Lit(int(t.lexeme), "uint", pos)
        if t.kind == "int-literal":
            self.advance()
            return A.Lit(int(t.lexeme[:-1]), "int", pos)
        if self.accept("("):
            if self.accept(")"):
                return A.Lit(None, "unit", pos)
            first = self.expr()
            if self.accept(")"):
                return first
            elems = [first]
            while self.accept(","):
                elems.append(self.expr())
            self.expect(")")
            return A.Tuple(elems, pos)
        if self.accept("{"):
            e = self.expr()
            self.expect("}")
            return e
        if self.at_ident():
            name = self.qual_ident()
            targs = self.targs()
            if self.accept("("):
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
                if is_ctor_name(name):
                    return A.Ctor(name, targs, args, pos)
                return A.Call(name, targs, args, pos)
            if targs:
                self.fail("'(' after type arguments")
            return A.Var(name, pos)
        self.fail("expression")


def parse_module(tokens: list[Token]) -> A.AstModule:
    return Parser(tokens).module()


def parse_source(source: str) -> A.AstModule:
    return parse_module(tokenize(source))
