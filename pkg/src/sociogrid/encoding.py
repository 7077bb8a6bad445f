"""Canonical serialization helpers.

Everything that ends up in a trace file, a state hash, or a wire message goes
through this module so that identical simulation states always produce
identical bytes:

- dict keys sorted, compact separators, ASCII-only output;
- exact rationals encoded as ints when integral, else "num/den" strings;
- floats in configs are read through their decimal repr (0.1 -> 1/10), so a
  value survives a serialize/parse round trip unchanged.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from typing import Any


def to_fraction(value: Any) -> Fraction:
    """Coerce a config/wire scalar (int, float, "20/3", "1.5") to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # repr gives the shortest decimal string, so 0.1 means one tenth
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise ValueError(f"cannot interpret {value!r} as a rational number")


def fraction_to_jsonable(value: Fraction) -> int | str:
    """Encode a Fraction losslessly: integral values as ints, else "num/den"."""
    if value.denominator == 1:
        return int(value)
    return f"{value.numerator}/{value.denominator}"


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, no whitespace, ASCII only."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def short_hash(obj: Any) -> str:
    """16-hex-digit digest of an object's canonical JSON form."""
    return sha256_hex(canonical_json(obj))[:16]
