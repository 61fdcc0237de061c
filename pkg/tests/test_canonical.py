import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssiledger.canonical import UnsupportedType, canonical_json, canonicalize


def test_key_order_independence():
    assert canonicalize({"b": 1, "a": 2}) == canonicalize({"a": 2, "b": 1})


def test_empty_map_is_two_bytes():
    assert canonicalize({}) == b"{}"


def test_no_insignificant_whitespace():
    # independently constructed expectation: compact separators, sorted keys
    assert canonical_json({"x": [1, "y"]}) == '{"x":[1,"y"]}'
    assert canonical_json({"b": None, "a": True}) == '{"a":true,"b":null}'


def test_unicode_kept_as_utf8():
    assert canonicalize({"kâ": "ü"}) == '{"kâ":"ü"}'.encode("utf-8")


def test_floats_rejected():
    with pytest.raises(UnsupportedType):
        canonicalize({"a": 1.5})
    with pytest.raises(UnsupportedType):
        canonicalize([1, [2, [3.0]]])


def test_non_string_keys_rejected():
    with pytest.raises(UnsupportedType):
        canonicalize({1: "a"})


def test_unsupported_leaf_rejected():
    with pytest.raises(UnsupportedType):
        canonicalize({"a": b"bytes"})


def test_bool_and_int_stay_distinct():
    assert canonicalize({"a": True}) != canonicalize({"a": 1})


def test_output_parses_back():
    value = {"k": [1, "two", None, False, {"n": 0}]}
    assert json.loads(canonical_json(value)) == value


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(max_size=12),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=6), children, max_size=4),
    max_leaves=12,
)


def _same_value(a, b) -> bool:
    """Type-aware structural equality; unlike ==, never conflates 1 and True."""
    if type(a) is not type(b):
        return False
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_same_value(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(_same_value(x, y) for x, y in zip(a, b))
    return a == b


@settings(max_examples=300, deadline=None)
@given(json_values, json_values)
def test_injective_on_distinct_values(a, b):
    if _same_value(a, b):
        assert canonicalize(a) == canonicalize(b)
    else:
        assert canonicalize(a) != canonicalize(b)


def test_no_collisions_over_ten_thousand_values():
    import hashlib

    seen = set()
    for i in range(10_000):
        value = {
            "index": i,
            "nested": {"level": [i % 7, str(i), i % 2 == 0]},
            "tag": f"value-{i % 100}",
            "flag": None if i % 3 else i,
        }
        digest = hashlib.sha256(canonicalize(value)).digest()
        assert digest not in seen
        seen.add(digest)
