from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mandala import golden
from mandala.bytecode import DecodeError, address, decode, encode
from mandala.interface import MemoryRegistry
from mandala.validator import Rejection, validate


def test_encode_decode_roundtrip_on_corpus(corpus_bytes):
    for data in corpus_bytes:
        m = decode(data)
        assert encode(m) == data
        assert decode(encode(m)) == m


def test_address_is_a_hash_of_the_bytes(corpus_bytes):
    addrs = [address(d) for d in corpus_bytes]
    assert all(len(a) == 32 for a in addrs)
    assert len(set(addrs)) == len(addrs)


def test_compilation_is_deterministic(corpus_bytes):
    assert golden.compile_corpus() == corpus_bytes


def test_imports_are_addresses_of_earlier_modules(corpus_bytes):
    token, purse = corpus_bytes[0], corpus_bytes[1]
    assert decode(purse).imports == [address(token)]


def test_truncation_is_a_decode_error(corpus_bytes):
    data = corpus_bytes[2]
    for cut in (0, 3, 4, len(data) // 2, len(data) - 1):
        with pytest.raises(DecodeError):
            decode(data[:cut])
    with pytest.raises(DecodeError):
        decode(data + b"\x00")


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_random_bytes_never_crash_the_decoder(blob):
    try:
        decode(blob)
    except DecodeError:
        pass


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_corrupted_token_is_rejected_or_decodes_canonically(corpus_bytes, data):
    original = corpus_bytes[0]
    off = data.draw(st.integers(0, len(original) - 1))
    byte = data.draw(st.integers(0, 255))
    mutated = original[:off] + bytes([byte]) + original[off + 1 :]
    try:
        m = decode(mutated)
    except DecodeError:
        return
    assert encode(m) == mutated
    try:
        validate(mutated, MemoryRegistry())
    except Rejection as exc:
        assert exc.code.startswith("V-")
