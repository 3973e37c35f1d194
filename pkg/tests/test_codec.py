"""Canonical encoding and digest tests.

The digest oracle is the published SHA-256 test vectors; the expected
constants below are frozen from them, not computed by the code under test.
"""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from provledger import codec
from provledger.errors import LedgerError

# Published SHA-256 vectors.
SHA256_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
SHA256_ABC = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_hash_empty_input_matches_standard_vector():
    assert codec.hash_payload(b"").hex() == SHA256_EMPTY


def test_hash_abc_matches_standard_vector():
    assert codec.hash_payload(b"abc").hex() == SHA256_ABC


def test_hash_is_deterministic_and_32_bytes():
    first = codec.hash_payload(b"raw milk")
    second = codec.hash_payload(b"raw milk")
    assert first == second
    assert len(first) == 32


def test_map_key_order_does_not_matter():
    a = {"liters": 120, "farm": "F1", "kind": "batch"}
    b = {}
    for key in reversed(list(a)):
        b[key] = a[key]
    assert list(a) != list(b)
    assert codec.encode(a) == codec.encode(b)


def test_empty_map_has_fixed_marker():
    assert codec.encode({}) == b"M\x00\x00\x00\x00"


def test_same_value_encodes_identically():
    record = {"source": "Dairy One", "receiver": "a1" * 8,
              "token": "tok:p1:f1", "product_id": "p1"}
    assert codec.encode(record) == codec.encode(record)


def test_floats_are_unencodable():
    with pytest.raises(LedgerError) as err:
        codec.encode({"liters": 99.5})
    assert err.value.code == "UNENCODABLE"


def test_non_string_map_keys_are_unencodable():
    with pytest.raises(LedgerError):
        codec.encode({1: "one"})


def test_out_of_range_int_is_unencodable():
    with pytest.raises(LedgerError):
        codec.encode(1 << 63)
    codec.encode((1 << 63) - 1)
    codec.encode(-(1 << 63))


def test_decode_rejects_trailing_bytes():
    data = codec.encode([1, 2]) + b"x"
    with pytest.raises(LedgerError):
        codec.decode(data)


def test_decode_rejects_unsorted_map_keys():
    # hand-build a map with keys out of canonical order
    data = bytearray(b"M\x00\x00\x00\x02")
    data += codec.encode("b") + codec.encode(1)
    data += codec.encode("a") + codec.encode(2)
    with pytest.raises(LedgerError):
        codec.decode(bytes(data))


def test_decode_rejects_truncation():
    data = codec.encode({"k": [1, 2, 3]})
    with pytest.raises(LedgerError):
        codec.decode(data[:-3])


def test_round_trip_nested_document():
    doc = {
        "batch_id": "b-1",
        "custody": [["farm-0001", 12], ["processor-0002", 99]],
        "recalled": False,
        "note": None,
        "rfid": "tag-éě",
        "blob": b"\x00\xff\x10",
    }
    assert codec.decode(codec.encode(doc)) == doc


_scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-(1 << 63), max_value=(1 << 63) - 1),
    st.text(max_size=20),
    st.binary(max_size=20),
)

_values = st.recursive(
    _scalars,
    lambda children: st.one_of(
        st.lists(children, max_size=5),
        st.dictionaries(st.text(max_size=8), children, max_size=5),
    ),
    max_leaves=25,
)


@given(_values)
def test_encode_decode_round_trip(value):
    decoded = codec.decode(codec.encode(value))
    assert _normalize(decoded) == _normalize(value)


def _normalize(value):
    # tuples/lists and bytearray/bytes unify through encoding
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    if isinstance(value, dict):
        return {k: _normalize(v) for k, v in value.items()}
    if isinstance(value, bytearray):
        return bytes(value)
    return value
