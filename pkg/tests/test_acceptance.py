"""The eight acceptance criteria, one test each; every test prints a PASS/FAIL line."""

from __future__ import annotations

import dataclasses
import graphlib
import random
import time

import pytest

from conftest import balance, deploy_corpus, store_context, total_supply, transfer
from mandala import golden
from mandala.bytecode import address, compile_module, decode, encode, resolver
from mandala.interface import MemoryRegistry
from mandala.ledger import Ledger
from mandala.runtime import Arg, Engine, cell_key, external_id
from mandala.sema import ElaborationError, elaborate_source
from mandala.syntax.parser import parse_source
from mandala.syntax.printer import pretty_print
from mandala.types import FunRef
from mandala.validator import oracle_bound, validate
from mandala.validator.audit import mutation_audit

FUZZ_LENGTH = 200
FUZZ_SEED = 20240611
PEOPLE = ("alice", "bob", "carol", "dave")
AMOUNTS = (-1, 0, 1, 7, 250, 10_000, 3_000_000, 100_000_000, 2**62)


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}", flush=True)
        assert ok, detail

    return emit


def fuzz_transactions(seed: int = FUZZ_SEED, n: int = FUZZ_LENGTH) -> list:
    """Random transfers, deposits and withdrawals over four accounts."""
    rng = random.Random(seed)
    s = golden.store_arg
    txs = []
    for _ in range(n):
        kind = rng.choice(("transfer", "transfer", "tryPay", "drip", "pay2"))
        src, a, b = rng.choice(PEOPLE), rng.choice(PEOPLE), rng.choice(PEOPLE)
        x, y = rng.choice(AMOUNTS), rng.choice(AMOUNTS)
        if kind == "transfer":
            args = [Arg("id", src), Arg("id", a), s(), Arg("int", x)]
            txs.append(("PurseStorage", "transfer", args, [golden.TOKEN], src))
        elif kind == "pay2":
            args = [Arg("id", src), Arg("id", a), Arg("id", b), s(), Arg("int", x), Arg("int", y)]
            txs.append(("Teller", kind, args, [golden.TOKEN], src))
        else:
            args = [Arg("id", src), Arg("id", a), s(), Arg("int", x)]
            txs.append(("Teller", kind, args, [golden.TOKEN], src))
    return txs


def run_fuzz(corpus: list) -> dict:
    engine = Engine(Ledger.memory())
    deploy_corpus(engine, corpus)
    receipts, conserved, rollback_ok, errors = [], True, True, 0
    for module, fn, args, targs, signer in fuzz_transactions():
        before = engine.ledger.digest()
        r = engine.call(module, fn, args, targs, signer=signer)
        receipts.append(r)
        if not r.ok:
            errors += 1
            rollback_ok &= r.digest == before == engine.ledger.digest()
        conserved &= total_supply(engine) == golden.SUPPLY
    return {
        "engine": engine,
        "receipts": receipts,
        "conserved": conserved,
        "rollback_ok": rollback_ok,
        "errors": errors,
        "digest": engine.ledger.digest(),
    }


@pytest.fixture(scope="module")
def fuzz(corpus_bytes):
    return run_fuzz(corpus_bytes)


def test_criterion_1_listings_deploy(report):
    reg, engine = MemoryRegistry(), Engine(Ledger.memory())
    diagnostics, addresses = 0, []
    for name in golden.LISTINGS:
        try:
            data = encode(compile_module(elaborate_source(golden.source(name), reg)))
        except ElaborationError as exc:
            diagnostics += len(exc.diagnostics)
            continue
        vm = validate(data, reg)
        reg.add(vm.interface, {vm.fun_ref(f.name): b for f, b in zip(vm.module.funs, vm.bounds)})
        r = engine.deploy(data, signer=golden.DEPLOYER)
        addresses.append(r.rendered)
    cell = engine.ledger.get_cell(cell_key(store_context(engine), external_id(golden.DEPLOYER)))
    rendered = engine.render(cell)
    ok = diagnostics == 0 and len(set(addresses)) == 4 and rendered == "Token[MyToken](100000000)"
    report(1, ok, f"diagnostics={diagnostics} addresses={len(addresses)} deployer cell={rendered}")


def test_criterion_2_transfer_and_conservation(report, engine, fuzz):
    r = transfer(engine, "alice", "bob", 250)
    a, b = balance(engine, "alice"), balance(engine, "bob")
    ok = r.ok and (a, b) == (99_999_750, 250) and fuzz["conserved"]
    report(2, ok, f"alice={a} bob={b} supply conserved over {len(fuzz['receipts'])} fuzz txs={fuzz['conserved']}")


def test_criterion_3_negative_programs(report, negative_registry):
    negatives = golden.negative_sources()
    exact = 0
    for src in negatives.values():
        try:
            elaborate_source(src, negative_registry)
        except ElaborationError as exc:
            exact += exc.codes == [golden.expected_code(src)]
    ok = exact == len(negatives) >= 14
    report(3, ok, f"{exact}/{len(negatives)} negative programs rejected with exactly their code")


def test_criterion_4_rollback_exactness(report, fuzz):
    ok = fuzz["rollback_ok"] and fuzz["errors"] > 0
    report(4, ok, f"{fuzz['errors']} error receipts, digest unchanged on all={fuzz['rollback_ok']}")


def test_criterion_5_gas_bounds(report, corpus_bytes, fuzz):
    receipts = fuzz["receipts"]
    stats = fuzz["engine"].stats
    within = sum(r.gas_used <= r.gas_bound for r in receipts)
    reg, agree, total = MemoryRegistry(), 0, 0
    for data in corpus_bytes:
        vm = validate(data, reg)
        keys = [vm.address] + list(vm.module.imports)

        def callee(ref, vm=vm, keys=keys):
            return vm.bounds[ref.index] if ref.module == 0 else reg.gas_bound(FunRef(keys[ref.module], ref.index))

        for f, b in zip(vm.module.funs, vm.bounds):
            total += 1
            agree += oracle_bound(f, callee) == b
        reg.add(vm.interface, {vm.fun_ref(f.name): b for f, b in zip(vm.module.funs, vm.bounds)})
    ok = within == len(receipts) and not stats.gas_violations and stats.gas_checks > 0 and agree == total
    report(
        5,
        ok,
        f"gasUsed<=bound for {within}/{len(receipts)} txs, {len(stats.gas_violations)} violations in "
        f"{stats.gas_checks} invocations, oracle agrees on {agree}/{total} functions",
    )


def test_criterion_6_replay(report, corpus_bytes, fuzz):
    again = run_fuzz(corpus_bytes)
    first = [r.line() for r in fuzz["receipts"]]
    second = [r.line() for r in again["receipts"]]
    ok = first == second and fuzz["digest"] == again["digest"]
    report(6, ok, f"{len(first)} receipts identical={first == second} final digest {again['digest'].hex()}")


def _callees(fn, resolve) -> set:
    found = set()

    def walk(x):
        if isinstance(x, FunRef):
            found.add((resolve(x.module), x.index))
        elif dataclasses.is_dataclass(x) and not isinstance(x, type):
            for f in dataclasses.fields(x):
                walk(getattr(x, f.name))
        elif isinstance(x, (list, tuple)):
            for v in x:
                walk(v)

    walk(fn.body)
    return found


def test_criterion_7_reentrancy_and_call_graph(report, corpus_bytes, fuzz):
    graph = {}
    for data in corpus_bytes:
        m, addr = decode(data), address(data)
        resolve = resolver(m, addr)
        funs = list(m.funs) + ([m.init] if m.init is not None else [])
        for i, f in enumerate(funs):
            graph[(addr, i)] = _callees(f, resolve)
    try:
        order = list(graphlib.TopologicalSorter(graph).static_order())
        acyclic = True
    except graphlib.CycleError:
        order, acyclic = [], False
    fired = fuzz["engine"].stats.reentrancy
    ok = fired == 0 and acyclic
    report(7, ok, f"reentrancy assertion fired {fired} times; call graph of {len(order)} functions sorts={acyclic}")


def test_criterion_8_roundtrips_and_audit(report, corpus_bytes):
    started = time.perf_counter()
    sources = [golden.source(n) for n in golden.CORPUS] + list(golden.negative_sources().values())
    printed = all(parse_source(pretty_print(parse_source(s))) == parse_source(s) for s in sources)
    encoded = all(encode(decode(d)) == d for d in corpus_bytes)
    audit = mutation_audit(corpus_bytes, golden.golden_transactions(), golden.DEPLOYER)
    ok = printed and encoded and len(audit.outcomes) == 200 and audit.count("divergent") == 0
    report(
        8,
        ok,
        f"parse/print={printed} encode/decode={encoded} {audit.summary()} in {time.perf_counter() - started:.1f}s",
    )
