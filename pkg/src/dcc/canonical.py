"""Canonical serialization and digests.

Canonical form: keys sorted, no insignificant whitespace, integers in base 10,
rationals as ``"num/den"`` strings. Everything that is hashed or written to
an event log goes through :func:`dumps`.
"""

from __future__ import annotations

import hashlib
import json
from enum import Enum
from fractions import Fraction
from typing import Any


def _default(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"not canonically serializable: {type(obj).__name__}")


_encoder = json.JSONEncoder(
    sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False, default=_default
)

# JSONEncoder.encode builds a fresh C encoder per call; build one up front
# (no circular-reference markers: state snapshots are trees).
_c_make = getattr(json.encoder, "c_make_encoder", None)
_fast = None
if _c_make is not None:
    _fast = _c_make(None, _default, json.encoder.encode_basestring_ascii, None, ":", ",", True, False, False)


def dumps(obj: Any) -> str:
    if _fast is None:
        return _encoder.encode(obj)
    return "".join(_fast(obj, 0))


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def state_digest(state: Any) -> str:
    """256-bit digest of the canonical serialization of ``state``."""
    return hashlib.sha256(dumps(state).encode()).hexdigest()


def encode(obj: Any) -> Any:
    """Round ``obj`` through the canonical encoder into plain JSON values."""
    return json.loads(dumps(obj))


_ATOMS = (str, int, bool, type(None))


def _plain_value(obj: Any) -> Any:
    t = type(obj)
    if t in _ATOMS:
        return obj
    if t is dict:
        out = {}
        for k, v in obj.items():
            if type(k) is not str:
                raise TypeError("non-string key")
            out[k] = _plain_value(v)
        return out
    if t is list or t is tuple:
        return [_plain_value(v) for v in obj]
    if t is Fraction:
        return f"{obj.numerator}/{obj.denominator}"
    raise TypeError("needs the encoder")


def plain(obj: Any) -> Any:
    """Same value as :func:`encode`, built directly for the common shapes."""
    try:
        return _plain_value(obj)
    except TypeError:
        return encode(obj)


def as_fraction(value: Any) -> Fraction:
    """Accept ints, Fractions, ``"n/d"`` strings, decimal strings and floats.

    Floats go through ``str`` so ``0.7`` means seven tenths, not the nearest
    binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


def quantize(value: Fraction, quantum: Fraction | None) -> Fraction:
    """Round to the nearest multiple of ``quantum`` (ties to even)."""
    if quantum is None:
        return value
    return round(value / quantum) * quantum


class RecordCache:
    """Canonical JSON for a ``{id: record}`` mapping, re-encoding only changed records.

    ``key`` must return a value that changes whenever the record's state
    does; it should be much cheaper than serializing the record.
    """

    def __init__(self, key, state):
        self._key = key
        self._state = state
        self._cache: dict[str, tuple[Any, str]] = {}
        self._ids: tuple = ()
        self._order: list[str] = []

    def render(self, records: dict) -> str:
        cache = self._cache
        ids = tuple(records)
        if ids != self._ids:
            self._ids = ids
            self._order = sorted(ids)
            for rid in [r for r in cache if r not in records]:
                del cache[rid]
        order = self._order
        key, state = self._key, self._state
        parts = []
        for rid in order:
            rec = records[rid]
            k = key(rec)
            hit = cache.get(rid)
            if hit is None or hit[0] != k:
                hit = cache[rid] = (k, dumps(rid) + ":" + dumps(state(rec)))
            parts.append(hit[1])
        return "{" + ",".join(parts) + "}"
