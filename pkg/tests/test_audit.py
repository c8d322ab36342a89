from __future__ import annotations

import struct

import pytest

from mandala import golden
from mandala.bytecode import address
from mandala.validator.audit import (
    Mutant,
    curated_mutants,
    is_data_mutation,
    mutation_audit,
    relink,
    semantic_mutants,
)

TXS = golden.golden_transactions()


@pytest.fixture(scope="module")
def curated(corpus_bytes):
    return curated_mutants(corpus_bytes)


def test_identity_mutation_is_equivalent(corpus_bytes):
    mu = Mutant(0, 10, corpus_bytes[0][10], "identity")
    report = mutation_audit(corpus_bytes, TXS, golden.DEPLOYER, [mu])
    assert [o.verdict for o in report.outcomes] == ["equivalent"]


def test_harness_notices_a_changed_supply(corpus_bytes):
    """A literal change is a different program: excluded from the audit, yet the harness must see it."""
    data = corpus_bytes[3]
    off = data.index(struct.pack("<Q", golden.SUPPLY))
    mu = Mutant(3, off, data[off] ^ 0x01, "data")
    assert is_data_mutation(data, mu.apply(data))
    report = mutation_audit(corpus_bytes, TXS, golden.DEPLOYER, [mu])
    assert report.count("divergent") == 1


def test_relink_rewrites_imports(corpus_bytes):
    mutated = corpus_bytes[0][:-1] + bytes([corpus_bytes[0][-1] ^ 0x80])
    linked = relink(corpus_bytes, 0, mutated)
    assert address(corpus_bytes[0]) not in linked[1]
    assert address(mutated) in linked[1]


def test_semantic_mutants_change_one_byte(corpus_bytes):
    found = semantic_mutants(1, corpus_bytes[1])
    kinds = {m.kind for m in found}
    assert "semantic:move-to-copy" in kinds and "semantic:effect" in kinds
    for m in found:
        assert m.value != corpus_bytes[1][m.offset]


def test_curated_set(curated):
    mutants = curated
    assert len(mutants) == 200
    assert len({(m.module, m.offset, m.value) for m in mutants}) == 200
    assert sum(m.kind.startswith("semantic") for m in mutants) >= 100


def test_sample_of_semantic_mutants_is_safe(corpus_bytes, curated):
    sample = [m for m in curated if m.kind.startswith("semantic")][::6]
    report = mutation_audit(corpus_bytes, TXS, golden.DEPLOYER, sample)
    assert report.count("divergent") == 0, [(o.mutant, o.detail) for o in report.divergent]
    assert report.count("rejected") > 0
