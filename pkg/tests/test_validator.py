from __future__ import annotations

import copy

import pytest

from mandala import golden
from mandala.bytecode import decode, encode, ir
from mandala.interface import MemoryRegistry
from mandala.types import Effect, FunRef
from mandala.validator import Rejection, oracle_bound, validate


def registry_with(corpus, n):
    """A registry holding the first ``n`` corpus modules."""
    reg = MemoryRegistry()
    for data in corpus[:n]:
        vm = validate(data, reg)
        reg.add(vm.interface, {vm.fun_ref(f.name): b for f, b in zip(vm.module.funs, vm.bounds)})
    return reg


def revalidate(corpus, index, edit):
    m = decode(corpus[index])
    edit(m)
    return validate(encode(m), registry_with(corpus, index))


def test_corpus_validates_with_expected_bounds(corpus_bytes):
    reg = MemoryRegistry()
    got = {}
    for data in corpus_bytes:
        vm = validate(data, reg)
        reg.add(vm.interface, {vm.fun_ref(f.name): b for f, b in zip(vm.module.funs, vm.bounds)})
        got.update({(vm.interface.name, f.name): b for f, b in zip(vm.module.funs, vm.bounds)})
        if vm.init_bound is not None:
            got[(vm.interface.name, "init")] = vm.init_bound + sum(vm.val_bounds)
    assert got[("Token", "merge")] == 12 and got[("Token", "split")] == 18
    assert got[("Token", "mint")] == 4 and got[("Token", "zero")] == 4
    assert got[("Purse", "deposit")] == 292 and got[("Purse", "withdraw")] == 305
    assert got[("PurseStorage", "getMyPurse")] == 13 and got[("PurseStorage", "getPurse")] == 14
    assert got[("PurseStorage", "transfer")] == 670
    assert got[("MyFixSupplyToken", "init")] == 366


def test_report_lines(corpus_bytes):
    vm = validate(corpus_bytes[0], MemoryRegistry())
    lines = vm.report()
    assert lines[0] == f"OK {vm.address.hex()} fn=merge bound=12"
    assert len(lines) == 4


def test_missing_dependency(corpus_bytes):
    with pytest.raises(Rejection) as exc:
        validate(corpus_bytes[1], MemoryRegistry())
    assert exc.value.code == "V-DEP-MISSING"


def test_copy_of_a_linear_token_is_rejected(corpus_bytes):
    def edit(m):
        body = m.funs[0].body  # deposit: modify ... merge(t, deposit)
        body.body.args[1] = ir.Copy(body.body.args[1].slot)

    with pytest.raises(Rejection) as exc:
        revalidate(corpus_bytes, 1, edit)
    assert exc.value.code == "V-LINEAR"


def test_effect_can_be_raised_but_not_lowered(corpus_bytes):
    def escalate(m):
        m.funs[0].effect = Effect.ACTIVE  # getMyPurse

    assert revalidate(corpus_bytes, 2, escalate)

    def lower(m):
        m.funs[0].effect = Effect.PURE  # deposit writes a cell

    with pytest.raises(Rejection) as exc:
        revalidate(corpus_bytes, 1, lower)
    assert exc.value.code == "V-EFFECT"


def test_undeclared_risk_is_rejected(corpus_bytes):
    def edit(m):
        m.funs[0].risks = ()

    with pytest.raises(Rejection) as exc:
        revalidate(corpus_bytes, 1, edit)
    assert exc.value.code == "V-RISK"


def test_duplicate_default_is_rejected(corpus_bytes):
    def edit(m):
        m.funs.append(copy.deepcopy(m.funs[3]))

    with pytest.raises(Rejection) as exc:
        revalidate(corpus_bytes, 0, edit)
    assert exc.value.code == "V-DEFAULT-DUP"


def test_validation_is_deterministic(corpus_bytes):
    a = [validate(d, registry_with(corpus_bytes, i)).report() for i, d in enumerate(corpus_bytes)]
    b = [validate(d, registry_with(corpus_bytes, i)).report() for i, d in enumerate(corpus_bytes)]
    assert a == b


def test_gas_bound_agrees_with_path_oracle(corpus_bytes):
    reg = MemoryRegistry()
    checked = 0
    for data in corpus_bytes:
        vm = validate(data, reg)
        m = vm.module
        keys = [vm.address] + list(m.imports)

        def callee(ref, vm=vm, keys=keys):
            if ref.module == 0:
                return vm.bounds[ref.index]
            return reg.gas_bound(FunRef(keys[ref.module], ref.index))

        for f, b in zip(m.funs, vm.bounds):
            assert oracle_bound(f, callee) == b, f.name
            checked += 1
        if m.init is not None:
            assert oracle_bound(m.init, callee) == vm.init_bound
        reg.add(vm.interface, {vm.fun_ref(f.name): b for f, b in zip(m.funs, vm.bounds)})
    assert checked >= 12
