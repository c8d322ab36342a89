from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mandala.types import STRUCTURAL, AdtRef, Type, UserCap
from mandala.values import Value, ValueDecodeError, decode_value, encode_value, id_value, int_, uint

addrs = st.binary(min_size=32, max_size=32)
user_caps = st.builds(UserCap, addrs, st.integers(0, 3))
caps = st.frozensets(st.sampled_from(sorted(STRUCTURAL) + ["Inspect", "Master", "Modify"])) | st.just(frozenset())


def _types():
    leaf = st.one_of(
        st.builds(lambda c: Type("UInt", (), c), caps),
        st.builds(lambda c: Type("ID", (), c), caps),
    )
    return st.recursive(
        leaf,
        lambda inner: st.builds(
            lambda m, i, args, c: Type("Adt", tuple(args), c, adt=AdtRef(m, i)),
            addrs,
            st.integers(0, 5),
            st.lists(inner, max_size=2),
            caps,
        ),
        max_leaves=4,
    )


def _values():
    leaf = st.one_of(
        st.integers(0, 2**64 - 1).map(uint),
        st.integers(-(2**63), 2**63 - 1).map(int_),
        st.builds(id_value, addrs, st.booleans()),
        st.builds(lambda raw, t: Value("context", raw, STRUCTURAL, inner=t), addrs, _types()),
    )

    def grow(inner):
        return st.one_of(
            st.lists(inner, min_size=2, max_size=3).map(lambda vs: Value("tuple", tuple(vs))),
            st.builds(
                lambda fields, c, u, m, i, k, targs: Value("adt", tuple(fields), c | u, AdtRef(m, i), tuple(targs), k),
                st.lists(inner, max_size=3),
                caps,
                st.frozensets(user_caps, max_size=2),
                addrs,
                st.integers(0, 7),
                st.integers(0, 3),
                st.lists(_types(), max_size=2),
            ),
        )

    return st.recursive(leaf, grow, max_leaves=8)


@given(_values())
def test_value_encoding_roundtrip(v):
    data = encode_value(v)
    assert decode_value(data) == v
    assert encode_value(decode_value(data)) == data


@given(_values(), st.data())
def test_truncated_value_is_an_error(v, data):
    blob = encode_value(v)
    cut = data.draw(st.integers(0, len(blob) - 1))
    with pytest.raises(ValueDecodeError):
        decode_value(blob[:cut])
