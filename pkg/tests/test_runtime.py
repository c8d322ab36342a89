from __future__ import annotations

import random

import pytest

from conftest import balance, deploy_corpus, total_supply, transfer
from mandala import golden
from mandala.bytecode import compile_module, encode
from mandala.ledger import Ledger
from mandala.runtime import Arg, CallFailed, DeployError, DuplicateModule, Engine, Interpreter, TxRejected
from mandala.sema import elaborate_source
from mandala.types import AdtRef
from mandala.values import Value, uint


def token(engine: Engine, n: int) -> Value:
    addr = engine.ledger.address_of("Token")
    return Value("adt", (uint(n),), frozenset({"Drop", "Persist"}), AdtRef(addr, 0), (engine.type_arg(golden.TOKEN),))


def compile_source(engine: Engine, src: str) -> bytes:
    return encode(compile_module(elaborate_source(src, engine.ledger)))


def test_deployer_holds_the_whole_supply(engine):
    assert balance(engine, "alice") == golden.SUPPLY
    assert total_supply(engine) == golden.SUPPLY


def test_merge_and_split(engine):
    r = engine.call("Token", "merge", [token(engine, 2), token(engine, 3)], [golden.TOKEN])
    assert r.ok and r.rendered == "Token[MyToken](5)"
    r = engine.call("Token", "split", [token(engine, 10), Arg("uint", 4)], [golden.TOKEN])
    assert r.rendered == "(Token[MyToken](6), Token[MyToken](4))"
    r = engine.call("Token", "split", [token(engine, 3), Arg("uint", 4)], [golden.TOKEN])
    assert (r.status, r.risk) == ("error", "NumericUnderflow")


def test_failed_call_hands_back_its_arguments(engine):
    ledger = engine.ledger
    loaded, idx = engine.resolve("Token", "merge")
    args = (token(engine, 2**64 - 1), token(engine, 1))
    interp = Interpreter(ledger, b"\x00" * 32, engine.stats, engine.table)
    ledger.store.begin()
    try:
        with pytest.raises(CallFailed) as exc:
            interp.run(loaded, loaded.module.funs[idx], idx, loaded.record.bounds[idx], (engine.type_arg(golden.TOKEN),), args)
    finally:
        ledger.store.abort()
    assert exc.value.risk.name == "NumericOverflow"
    assert exc.value.args_back == args


def test_transfer_moves_tokens(engine):
    r = transfer(engine, "alice", "bob", 250)
    assert r.ok and r.gas_used <= r.gas_bound == 670
    assert balance(engine, "alice") == golden.SUPPLY - 250
    assert balance(engine, "bob") == 250


def test_transfer_from_an_empty_purse_changes_nothing(engine):
    before = engine.ledger.digest()
    r = transfer(engine, "carol", "bob", 1)
    assert (r.status, r.risk) == ("error", "NumericUnderflow")
    assert r.digest == before == engine.ledger.digest()
    assert balance(engine, "carol") == 0


def test_derive_is_deterministic(engine):
    args = [Arg("id", "bob"), golden.store_arg()]
    a = engine.call("PurseStorage", "getPurse", args, [golden.TOKEN])
    b = engine.call("PurseStorage", "getPurse", args, [golden.TOKEN])
    assert a.value == b.value
    c = engine.call("PurseStorage", "getPurse", [Arg("id", "carol"), golden.store_arg()], [golden.TOKEN])
    assert c.value != a.value


def test_fresh_ids_are_distinct(engine):
    src = "module Fresh {\n  public val a = ID.new()\n  public val b = ID.new()\n}"
    engine.deploy(compile_source(engine, src), signer="alice")
    addr = engine.ledger.address_of("Fresh")
    a, b = engine.ledger.get_val(addr, 0), engine.ledger.get_val(addr, 1)
    assert a.kind == b.kind == "id" and a.data != b.data


def test_failed_init_rolls_back_the_deployment(engine):
    data = compile_source(engine, golden.source("overflow_supply_token"))
    before, counter = engine.ledger.digest(), engine.ledger.tx_counter
    with pytest.raises(DeployError) as exc:
        engine.deploy(data, signer="alice")
    assert exc.value.risk == "NumericOverflow"
    assert engine.ledger.digest() == before
    assert engine.ledger.address_of("OverflowSupplyToken") is None
    assert engine.ledger.tx_counter == counter + 1


def test_duplicate_deployment(engine, corpus_bytes):
    with pytest.raises(DuplicateModule):
        engine.deploy(corpus_bytes[0], signer="alice")


def test_boundary_rejections(engine):
    counter = engine.ledger.tx_counter
    args = [Arg("id", "alice"), Arg("id", "bob"), golden.store_arg(), Arg("int", 1)]
    with pytest.raises(TxRejected) as exc:
        engine.call("PurseStorage", "transfer", args, [golden.TOKEN], signer="bob")
    assert exc.value.reason == "MissingSigner"
    with pytest.raises(TxRejected) as exc:
        engine.call("PurseStorage", "transfer", args, [golden.TOKEN], signer="alice", gas_limit=0)
    assert exc.value.reason == "InsufficientGasLimit"
    with pytest.raises(TxRejected) as exc:
        engine.call("Token", "mint", [Arg("uint", 1)], [golden.TOKEN])
    assert exc.value.reason == "NotPublic"
    with pytest.raises(TxRejected) as exc:
        engine.call("Token", "burn", [], [golden.TOKEN])
    assert exc.value.reason == "UnknownFunction"
    with pytest.raises(TxRejected) as exc:
        engine.call("PurseStorage", "transfer", args[:3] + [Arg("int", 2**63)], [golden.TOKEN], signer="alice")
    assert exc.value.reason == "ArgumentType"
    assert engine.ledger.tx_counter == counter


def test_deploy_with_init_needs_a_signer(corpus_bytes):
    e = Engine(Ledger.memory())
    for data in corpus_bytes[:3]:
        e.deploy(data)
    with pytest.raises(TxRejected) as exc:
        e.deploy(corpus_bytes[3])
    assert exc.value.reason == "MissingSigner"


def test_supply_is_conserved_under_random_transfers(engine):
    rng = random.Random(7)
    people = ["alice", "bob", "carol", "dave"]
    for _ in range(60):
        src, dst = rng.sample(people, 2)
        before = engine.ledger.digest()
        r = transfer(engine, src, dst, rng.choice([0, 1, 17, 5000, 10**9]))
        if not r.ok:
            assert r.digest == before
        assert total_supply(engine) == golden.SUPPLY
    assert not engine.stats.faults and not engine.stats.gas_violations


def test_two_engines_agree(corpus_bytes):
    lines = []
    for _ in range(2):
        e = Engine(Ledger.memory())
        deploy_corpus(e, corpus_bytes)
        lines.append([e.call(*t[:4], signer=t[4]).line() for t in golden.golden_transactions()])
    assert lines[0] == lines[1]
