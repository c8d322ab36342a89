from __future__ import annotations

import pytest

from mandala import golden
from mandala.ledger import Ledger
from mandala.runtime import Arg, Engine, cell_key, external_id


@pytest.fixture(scope="session")
def corpus_bytes():
    return golden.compile_corpus()


@pytest.fixture(scope="session")
def negative_registry():
    return golden.negative_registry()


def deploy_corpus(engine: Engine, corpus: list) -> list:
    return [engine.deploy(data, signer=golden.DEPLOYER) for data in corpus]


@pytest.fixture
def engine(corpus_bytes):
    """An in-memory ledger with the whole corpus deployed by alice."""
    e = Engine(Ledger.memory())
    deploy_corpus(e, corpus_bytes)
    return e


def store_context(engine: Engine) -> bytes:
    ledger = engine.ledger
    store = ledger.get_val(ledger.address_of("MyFixSupplyToken"), 0)
    return store.data[0].data


def balance(engine: Engine, who: str) -> int:
    """Amount in ``who``'s MyToken purse; a never-written cell holds the default zero."""
    v = engine.ledger.get_cell(cell_key(store_context(engine), external_id(who)))
    return 0 if v is None else v.data[0].data


def total_supply(engine: Engine) -> int:
    return sum(v.data[0].data for v in engine.ledger.cells().values())


def transfer(engine: Engine, src: str, dst: str, amount: int):
    args = [Arg("id", src), Arg("id", dst), golden.store_arg(), Arg("int", amount)]
    return engine.call("PurseStorage", "transfer", args, [golden.TOKEN], signer=src)
