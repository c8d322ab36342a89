from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mandala import golden
from mandala.interface import MemoryRegistry
from mandala.sema import ElaborationError, elaborate_source, interface_of
from mandala.types import BUILTIN_CAPS, STRUCTURAL, Effect, Type, accepts, prim

NEGATIVE = golden.negative_sources()
REQUIRED_CODES = {
    "E-LIN-COPY", "E-LIN-DROP", "E-INSPECT", "E-CAP-ATTACH", "E-CAP-STRUCT", "E-VIS-PROTECTED",
    "E-VIS-PRIVATE", "E-CTOR-CLOSED", "E-EFF-ESCALATE", "E-EFF-MODIFY-IMPURE", "E-VAL-EFFECT",
    "E-VAL-CAPS", "E-RISK-UNDECLARED", "E-REC-FORWARD", "E-MATCH-NONEXH",
}


def _interfaces(names):
    reg = MemoryRegistry()
    golden.compile_corpus(names, reg)
    return {reg.interface(reg.address_of(n)).name: reg.interface(reg.address_of(n)) for n in reg.module_names()}


def test_listings_elaborate_without_diagnostics():
    reg = MemoryRegistry()
    golden.compile_corpus(golden.LISTINGS, reg)
    assert reg.module_names() == ["Token", "Purse", "PurseStorage", "MyFixSupplyToken"]


def test_effects_and_risks_of_the_listings():
    ifaces = _interfaces(golden.LISTINGS)
    token = {f.name: f for f in ifaces["Token"].funs}
    assert token["merge"].effect == Effect.PURE
    assert {r.name for r in token["merge"].risks} == {"NumericOverflow"}
    assert {r.name for r in token["split"].risks} == {"NumericUnderflow"}
    assert token["mint"].visibility == "protected"
    assert token["zero"].default_for is not None
    purse = {f.name: f for f in ifaces["Purse"].funs}
    assert purse["deposit"].effect == purse["withdraw"].effect == Effect.ACTIVE
    storage = {f.name: f for f in ifaces["PurseStorage"].funs}
    assert storage["getMyPurse"].effect == Effect.PURE
    assert "Master" in storage["getMyPurse"].params[0].caps
    assert "Master" not in storage["getPurse"].params[0].caps


def test_capability_sets_of_declared_types():
    ifaces = _interfaces(golden.LISTINGS)
    assert ifaces["Token"].types[0].caps == frozenset({"Drop", "Persist"})
    # Store declares no capabilities; it inherits the structural ones its Context field has
    assert ifaces["PurseStorage"].types[0].caps == STRUCTURAL
    purse = ifaces["Purse"].types[0]
    assert {c for c in purse.caps if isinstance(c, str)} == STRUCTURAL
    user = [c for c in purse.caps if not isinstance(c, str)]
    assert len(user) == 1 and user[0].index == 0


def test_negative_corpus_covers_every_required_rule():
    codes = {golden.expected_code(src) for src in NEGATIVE.values()}
    assert len(NEGATIVE) >= 14
    assert REQUIRED_CODES <= codes


@pytest.mark.parametrize("name", sorted(NEGATIVE))
def test_negative_program_rejected_with_exactly_its_code(name, negative_registry):
    src = NEGATIVE[name]
    with pytest.raises(ElaborationError) as exc:
        elaborate_source(src, negative_registry)
    assert exc.value.codes == [golden.expected_code(src)]


def test_import_of_undeployed_module():
    with pytest.raises(ElaborationError) as exc:
        elaborate_source(golden.source("my_fix_supply_token"), MemoryRegistry())
    assert exc.value.codes[0] == "E-IMPORT-MISSING"


def test_interface_is_stable_across_elaborations():
    reg = MemoryRegistry()
    a = interface_of(elaborate_source(golden.source("token"), reg))
    b = interface_of(elaborate_source(golden.source("token"), reg))
    assert a == b


caps = st.frozensets(st.sampled_from(BUILTIN_CAPS))
heads = st.sampled_from(["UInt", "Int", "ID", "Unit"])


@given(heads, caps, caps, caps)
def test_subsumption_is_monotone_in_capabilities(head, required, actual, extra):
    req, act = Type(head, (), required), Type(head, (), actual)
    if accepts(req, act):
        assert accepts(req, Type(head, (), actual | extra))
        assert accepts(Type(head, (), required - extra), act)
    assert accepts(req, act) == (required <= actual)


@given(caps)
def test_primitives_always_carry_structural_capabilities(extra):
    assert STRUCTURAL <= prim("UInt", caps=extra).caps
