from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mandala import golden
from mandala.syntax import ast as A
from mandala.syntax.lexer import LexError, tokenize
from mandala.syntax.parser import ParseError, parse_source
from mandala.syntax.printer import pretty_print

ALL_SOURCES = {n: golden.source(n) for n in golden.CORPUS + ("overflow_supply_token",)}
ALL_SOURCES.update(golden.negative_sources())


@pytest.mark.parametrize("src", list(ALL_SOURCES.values()), ids=list(ALL_SOURCES))
def test_parse_print_roundtrip_on_corpus(src):
    ast = parse_source(src)
    text = pretty_print(ast)
    assert parse_source(text) == ast
    assert pretty_print(parse_source(text)) == text


def test_listing_shapes():
    token = parse_source(golden.source("token"))
    assert token.name == "Token"
    assert token.count(A.TypeDecl) == 1 and token.count(A.FunDecl) == 4
    storage = parse_source(golden.source("purse_storage"))
    assert [d.name for d in storage.decls if isinstance(d, A.FunDecl)] == ["getMyPurse", "getPurse", "transfer"]
    fixed = parse_source(golden.source("my_fix_supply_token"))
    assert fixed.count(A.ValDecl) == 1 and fixed.count(A.InitDecl) == 1


def test_numeric_literal_kinds():
    tokens = tokenize("5 5i")
    assert [t.kind for t in tokens[:2]] == ["uint-literal", "int-literal"]
    lit = parse_source("module M { f() => 7i }").decls[0].body
    assert lit.kind == "int" and lit.value == 7


def test_syntax_error_position():
    with pytest.raises(ParseError) as exc:
        parse_source("module M {\n  f() => (1, \n}")
    assert exc.value.line >= 2


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=st.sampled_from(list("module{}()[]<>=|&,:.;+-*/ \n\tabcXYZ019_i\"'#")), max_size=80))
def test_lexer_and_parser_fail_only_with_their_own_errors(text):
    try:
        parse_source(text)
    except (LexError, ParseError):
        pass


# ---- generated ASTs ----------------------------------------------------------------------

lower = st.sampled_from(["a", "b", "amount", "x1", "rest"])
upper = st.sampled_from(["Token", "Pair", "Box"])
funcs = st.sampled_from(["merge", "split", "go"])
types = st.builds(A.TypeExpr, st.just([]), st.sampled_from(["UInt", "Int", "ID"]), st.just([]))

patterns = st.recursive(
    st.one_of(st.builds(A.PVar, lower), st.builds(A.PWild)),
    lambda inner: st.one_of(
        st.builds(A.PTuple, st.lists(inner, min_size=2, max_size=3)),
        st.builds(A.PCtor, upper, st.just([]), st.lists(inner, min_size=1, max_size=2)),
    ),
    max_leaves=5,
)


def _exprs():
    leaf = st.one_of(
        st.builds(A.Lit, st.integers(0, 2**64 - 1), st.just("uint")),
        st.builds(A.Lit, st.integers(0, 2**63 - 1), st.just("int")),
        st.builds(A.Var, lower),
    )

    def grow(inner):
        return st.one_of(
            st.builds(A.Binary, st.sampled_from(["+", "-"]), inner, inner),
            st.builds(A.Tuple, st.lists(inner, min_size=2, max_size=3)),
            st.builds(A.Call, funcs, st.just([]), st.lists(inner, max_size=3)),
            st.builds(A.Ctor, upper, st.lists(types, max_size=1), st.lists(inner, min_size=1, max_size=2)),
            st.builds(A.Let, patterns, inner, inner),
            st.builds(A.Case, inner, st.lists(st.builds(A.Arm, patterns, inner), min_size=1, max_size=3)),
            st.builds(A.Cycle, st.integers(1, 20), inner, lower, inner),
        )

    return st.recursive(leaf, grow, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_exprs())
def test_print_then_parse_is_identity_on_generated_bodies(body):
    module = A.AstModule("Gen", [], [A.FunDecl([], "public", None, None, None, "f", [], [], body)])
    text = pretty_print(module)
    assert parse_source(text) == module
