"""Canonical JSON serialization.

Every record that gets hashed or signed goes through ``canonicalize`` first,
so "the hash of a record" is well defined across processes and runs: map keys
sorted by UTF-8 byte order, no insignificant whitespace, UTF-8 output.

Floats are rejected outright. Timestamps are integers and amounts/dates are
strings or integers everywhere in this codebase, which keeps the encoding
unambiguous and injective.
"""

from __future__ import annotations

import json
from typing import Any


class UnsupportedType(TypeError):
    """Value contains a leaf the canonical encoding does not admit."""


def _check(value: Any, path: str) -> None:
    if value is None or isinstance(value, str):
        return
    if isinstance(value, bool):
        return
    if isinstance(value, float):
        raise UnsupportedType(f"float not allowed in canonical values at {path}")
    if isinstance(value, int):
        return
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise UnsupportedType(f"non-string map key {key!r} at {path}")
            _check(item, f"{path}.{key}")
        return
    raise UnsupportedType(f"unsupported type {type(value).__name__} at {path}")


def canonical_json(value: Any) -> str:
    """Render a structured value as its canonical JSON string.

    Accepts maps, lists/tuples, strings, ints, bools and None. Map insertion
    order never matters: keys are emitted sorted by their UTF-8 bytes (for
    ``str`` this is code-point order, which is the same thing).
    """
    _check(value, "$")
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonicalize(value: Any) -> bytes:
    """Canonical JSON encoded as UTF-8 bytes."""
    return canonical_json(value).encode("utf-8")
