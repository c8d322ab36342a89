"""Elaboration: resolve, type, then check substructural use, capabilities and effects."""

from __future__ import annotations

from ..interface import Registry
from ..syntax import ast as A
from ..syntax.lexer import LexError
from ..syntax.parser import ParseError, parse_source
from .capcheck import check_capabilities
from .diagnostics import Diagnostic, ElaborationError
from .effects import check_effects
from .linear import check_substructural
from .scope import resolve
from .tree import TypedModule
from .typecheck import check_types, interface_of

__all__ = ["elaborate", "elaborate_source", "parse_or_diagnose", "interface_of", "ElaborationError", "Diagnostic"]


def elaborate(ast: A.AstModule, registry: Registry) -> TypedModule:
    """Run every phase in order; raise ElaborationError with the first failing phase's diagnostics."""
    scope = resolve(ast, registry)
    if scope.diags:
        raise ElaborationError(scope.diags)
    tm, diags = check_types(scope, registry)
    if diags:
        raise ElaborationError(diags)
    for phase in (
        lambda: check_substructural(tm),
        lambda: check_capabilities(tm, registry, tm.type_decl_pos),
        lambda: check_effects(tm),
    ):
        diags = phase()
        if diags:
            raise ElaborationError(diags)
    return tm


def parse_or_diagnose(source) -> A.AstModule:
    try:
        return parse_source(source)
    except LexError as exc:
        raise ElaborationError([Diagnostic("E-SYNTAX", (exc.line, exc.column), exc.message)]) from None
    except ParseError as exc:
        msg = f"expected {exc.expected}, found {exc.found}"
        raise ElaborationError([Diagnostic("E-SYNTAX", (exc.line, exc.column), msg)]) from None


def elaborate_source(source, registry: Registry) -> TypedModule:
    return elaborate(parse_or_diagnose(source), registry)
