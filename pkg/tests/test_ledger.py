from __future__ import annotations

import subprocess
import sys
import textwrap

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import deploy_corpus, transfer
from mandala import golden
from mandala.ledger import GENESIS_DIGEST, Ledger, Store, StoreCorrupt, StoreLocked
from mandala.ledger.store import CELLS, VALS
from mandala.runtime import Engine

PINNED_GENESIS = "ce1a42e29e82c1ad9537af4d1785bf7b939ae0f35dee04b4159356ad22019421"


def test_genesis_digest_is_pinned(tmp_path):
    assert GENESIS_DIGEST.hex() == PINNED_GENESIS
    assert Store.memory().digest() == GENESIS_DIGEST
    with Ledger.open(tmp_path / "s") as ledger:
        assert ledger.digest() == GENESIS_DIGEST


entries = st.dictionaries(st.binary(min_size=1, max_size=8), st.binary(max_size=8), max_size=12)


@given(entries, st.randoms())
def test_digest_ignores_insertion_order(kv, rnd):
    items = list(kv.items())
    a, b = Store.memory(), Store.memory()
    a.begin()
    for k, v in items:
        a.put(CELLS, k, v)
    a.commit()
    rnd.shuffle(items)
    b.begin()
    for k, v in items:
        b.put(CELLS, k, v)
    b.commit()
    assert a.digest() == b.digest()


def test_maps_are_digested_separately():
    a, b = Store.memory(), Store.memory()
    for s, m in ((a, CELLS), (b, VALS)):
        s.begin()
        s.put(m, b"k", b"v")
        s.commit()
    assert a.digest() != b.digest()


def test_abort_and_empty_commit_keep_the_digest():
    s = Store.memory()
    s.begin()
    s.put(CELLS, b"k", b"v")
    s.abort()
    assert s.digest() == GENESIS_DIGEST
    s.begin()
    s.commit()
    assert s.digest() == GENESIS_DIGEST


def test_rollback_to_mark():
    s = Store.memory()
    s.begin()
    s.put(CELLS, b"a", b"1")
    mark = s.mark()
    s.put(CELLS, b"a", b"2")
    s.put(CELLS, b"b", b"3")
    s.rollback_to(mark)
    s.commit()
    assert s.maps[CELLS] == {b"a": b"1"}


def test_reopen_restores_the_last_receipt_digest(tmp_path, corpus_bytes):
    path = tmp_path / "s"
    with Ledger.open(path) as ledger:
        e = Engine(ledger)
        deploy_corpus(e, corpus_bytes)
        last = transfer(e, "alice", "bob", 250)
        counter = ledger.tx_counter
    with Ledger.open(path) as ledger:
        assert ledger.digest() == last.digest
        assert ledger.tx_counter == counter
        assert ledger.module_names() == ["Token", "Purse", "PurseStorage", "MyFixSupplyToken", "Teller"]
    manifest = (path / "manifest.txt").read_text().split("\n")
    assert len([line for line in manifest if line]) == 5
    assert len(list((path / "modules").glob("*.mdlc"))) == 5


def test_snapshots_compact_the_log(tmp_path, corpus_bytes):
    path = tmp_path / "s"
    with Ledger.open(path, snapshot_every=3) as ledger:
        e = Engine(ledger)
        deploy_corpus(e, corpus_bytes)
        for n in range(5):
            last = transfer(e, "alice", "bob", n + 1)
    assert (path / "snapshot.bin").exists()
    with Ledger.open(path) as ledger:
        assert ledger.digest() == last.digest


def test_store_is_locked_while_open(tmp_path):
    with Store.open(tmp_path / "s"):
        with pytest.raises(StoreLocked):
            Store.open(tmp_path / "s")


def _populated(path, corpus):
    with Ledger.open(path) as ledger:
        deploy_corpus(Engine(ledger), corpus)


def test_torn_log_is_corruption(tmp_path, corpus_bytes):
    path = tmp_path / "s"
    _populated(path, corpus_bytes)
    wal = path / "wal.log"
    wal.write_bytes(wal.read_bytes()[:-3])
    with pytest.raises(StoreCorrupt):
        Store.open(path)


def test_flipped_log_byte_is_corruption(tmp_path, corpus_bytes):
    path = tmp_path / "s"
    _populated(path, corpus_bytes)
    wal = path / "wal.log"
    data = bytearray(wal.read_bytes())
    data[len(data) // 2] ^= 0x01
    wal.write_bytes(bytes(data))
    with pytest.raises(StoreCorrupt):
        Store.open(path)


def test_tampered_module_file_is_corruption(tmp_path, corpus_bytes):
    path = tmp_path / "s"
    _populated(path, corpus_bytes)
    f = next((path / "modules").glob("*.mdlc"))
    f.write_bytes(f.read_bytes() + b"\x00")
    with pytest.raises(StoreCorrupt):
        Store.open(path)


CRASH_SCRIPT = textwrap.dedent(
    """
    import os, sys
    from mandala import golden
    from mandala.ledger import Ledger
    from mandala.runtime import Arg, Engine
    ledger = Ledger.open(sys.argv[1])
    e = Engine(ledger)
    for data in golden.compile_corpus():
        e.deploy(data, signer=golden.DEPLOYER)
    print(ledger.digest().hex(), flush=True)
    os.environ[sys.argv[2]] = "1"
    args = [Arg("id", "alice"), Arg("id", "bob"), golden.store_arg(), Arg("int", 250)]
    e.call("PurseStorage", "transfer", args, [golden.TOKEN], signer="alice")
    """
)


@pytest.mark.parametrize(
    "env,code,committed",
    [("MANDALA_CRASH_BEFORE_WAL", 86, False), ("MANDALA_CRASH_AFTER_WAL", 87, True)],
)
def test_crash_leaves_a_committed_or_clean_state(tmp_path, corpus_bytes, env, code, committed):
    path = tmp_path / "s"
    proc = subprocess.run([sys.executable, "-c", CRASH_SCRIPT, str(path), env], capture_output=True, text=True)
    assert proc.returncode == code, proc.stderr
    before = bytes.fromhex(proc.stdout.split()[0])
    e = Engine(Ledger.memory())
    deploy_corpus(e, corpus_bytes)
    assert e.ledger.digest() == before
    after = transfer(e, "alice", "bob", 250).digest
    with Ledger.open(path) as ledger:
        assert ledger.digest() == (after if committed else before)
