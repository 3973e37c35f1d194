"""Canonical binary encoding and the designated digest.

Everything that gets hashed or persisted goes through this encoding, so
independent peers produce byte-identical bytes for equal values. The format
is a tagged binary form:

    N                     null
    T / F                 booleans
    I <8 bytes>           signed 64-bit integer, big-endian
    B <u32 len> <bytes>   byte string
    S <u32 len> <utf-8>   text string
    L <u32 count> items   list
    M <u32 count> pairs   map; string keys, sorted by their UTF-8 bytes

Floats are rejected: no hashed structure may contain one. Decoding is strict
and round-trips exactly (a decoded record must consume every byte).
"""

from __future__ import annotations

import hashlib
from typing import Any

from .errors import LedgerError

HASH_LEN = 32
ZERO_HASH = b"\x00" * HASH_LEN

_INT_MIN = -(1 << 63)
_INT_MAX = (1 << 63) - 1

_TAG_NULL = 0x4E  # N
_TAG_TRUE = 0x54  # T
_TAG_FALSE = 0x46  # F
_TAG_INT = 0x49  # I
_TAG_BYTES = 0x42  # B
_TAG_STR = 0x53  # S
_TAG_LIST = 0x4C  # L
_TAG_MAP = 0x4D  # M


class Raw:
    """Already-canonical bytes, spliced verbatim into an encoding.

    Lets immutable structures cache their own encodings and be embedded in
    larger ones without re-encoding; the producer must guarantee the bytes
    came from :func:`encode`.
    """

    __slots__ = ("data",)

    def __init__(self, data: bytes):
        self.data = data


def hash_payload(data: bytes) -> bytes:
    """SHA-256 digest of a byte sequence; always exactly 32 bytes."""
    return hashlib.sha256(data).digest()


def hash_value(value: Any) -> bytes:
    """Digest of the canonical encoding of ``value``."""
    return hash_payload(encode(value))


def encode(value: Any) -> bytes:
    """Canonically encode a domain value. Raises UNENCODABLE on floats,
    non-string map keys, out-of-range integers, or unsupported types."""
    out = bytearray()
    _encode_into(out, value)
    return bytes(out)


def _sort_key(key: str) -> bytes:
    return key.encode("utf-8")


def _encode_into(out: bytearray, value: Any) -> None:
    # exact-type dispatch on the hot path; odd subclasses fall through below
    kind = type(value)
    if kind is str:
        raw = value.encode("utf-8")
        out.append(_TAG_STR)
        out += len(raw).to_bytes(4, "big")
        out += raw
    elif kind is int:
        if not _INT_MIN <= value <= _INT_MAX:
            raise LedgerError("UNENCODABLE", f"integer out of 64-bit range: {value}")
        out.append(_TAG_INT)
        out += value.to_bytes(8, "big", signed=True)
    elif kind is dict:
        keys = list(value.keys())
        for key in keys:
            if type(key) is not str:
                _encode_fallback(out, value)
                return
        keys.sort(key=_sort_key)
        out.append(_TAG_MAP)
        out += len(keys).to_bytes(4, "big")
        for key in keys:
            raw = key.encode("utf-8")
            out.append(_TAG_STR)
            out += len(raw).to_bytes(4, "big")
            out += raw
            _encode_into(out, value[key])
    elif kind is list or kind is tuple:
        out.append(_TAG_LIST)
        out += len(value).to_bytes(4, "big")
        for item in value:
            _encode_into(out, item)
    elif kind is bytes or kind is bytearray:
        out.append(_TAG_BYTES)
        out += len(value).to_bytes(4, "big")
        out += value
    elif value is None:
        out.append(_TAG_NULL)
    elif kind is bool:
        out.append(_TAG_TRUE if value else _TAG_FALSE)
    elif kind is Raw:
        out += value.data
    elif kind is float:
        raise LedgerError("UNENCODABLE", f"float values cannot be encoded: {value}")
    else:
        _encode_fallback(out, value)


def _encode_fallback(out: bytearray, value: Any) -> None:
    """Subclass-tolerant path for values whose exact type missed above."""
    if isinstance(value, bool):
        out.append(_TAG_TRUE if value else _TAG_FALSE)
    elif isinstance(value, int):
        if not _INT_MIN <= value <= _INT_MAX:
            raise LedgerError("UNENCODABLE", f"integer out of 64-bit range: {value}")
        out.append(_TAG_INT)
        out += value.to_bytes(8, "big", signed=True)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(_TAG_STR)
        out += len(raw).to_bytes(4, "big")
        out += raw
    elif isinstance(value, (bytes, bytearray)):
        out.append(_TAG_BYTES)
        out += len(value).to_bytes(4, "big")
        out += value
    elif isinstance(value, (list, tuple)):
        out.append(_TAG_LIST)
        out += len(value).to_bytes(4, "big")
        for item in value:
            _encode_into(out, item)
    elif isinstance(value, dict):
        keys = list(value.keys())
        for key in keys:
            if not isinstance(key, str):
                raise LedgerError("UNENCODABLE", f"map key is not a string: {key!r}")
        keys.sort(key=_sort_key)
        out.append(_TAG_MAP)
        out += len(keys).to_bytes(4, "big")
        for key in keys:
            _encode_into(out, str(key))
            _encode_into(out, value[key])
    elif isinstance(value, float):
        raise LedgerError("UNENCODABLE", f"float values cannot be encoded: {value}")
    else:
        raise LedgerError("UNENCODABLE", f"unsupported type: {type(value).__name__}")


def decode(data: bytes) -> Any:
    """Inverse of :func:`encode`. The input must be one complete value;
    trailing bytes are an error."""
    value, offset = _decode_at(data, 0)
    if offset != len(data):
        raise LedgerError("UNENCODABLE", f"{len(data) - offset} trailing bytes after value")
    return value


def _read(data: bytes, offset: int, n: int) -> bytes:
    end = offset + n
    if end > len(data):
        raise LedgerError("UNENCODABLE", "truncated encoding")
    return data[offset:end]


def _decode_at(data: bytes, offset: int) -> tuple[Any, int]:
    if offset >= len(data):
        raise LedgerError("UNENCODABLE", "truncated encoding")
    tag = data[offset]
    offset += 1
    if tag == _TAG_NULL:
        return None, offset
    if tag == _TAG_TRUE:
        return True, offset
    if tag == _TAG_FALSE:
        return False, offset
    if tag == _TAG_INT:
        raw = _read(data, offset, 8)
        return int.from_bytes(raw, "big", signed=True), offset + 8
    if tag == _TAG_BYTES:
        n = int.from_bytes(_read(data, offset, 4), "big")
        offset += 4
        return bytes(_read(data, offset, n)), offset + n
    if tag == _TAG_STR:
        n = int.from_bytes(_read(data, offset, 4), "big")
        offset += 4
        raw = _read(data, offset, n)
        try:
            return raw.decode("utf-8"), offset + n
        except UnicodeDecodeError as exc:
            raise LedgerError("UNENCODABLE", "invalid UTF-8 in string") from exc
    if tag == _TAG_LIST:
        n = int.from_bytes(_read(data, offset, 4), "big")
        offset += 4
        items = []
        for _ in range(n):
            item, offset = _decode_at(data, offset)
            items.append(item)
        return items, offset
    if tag == _TAG_MAP:
        n = int.from_bytes(_read(data, offset, 4), "big")
        offset += 4
        result: dict[str, Any] = {}
        prev_key: bytes | None = None
        for _ in range(n):
            key, offset = _decode_at(data, offset)
            if not isinstance(key, str):
                raise LedgerError("UNENCODABLE", "map key is not a string")
            key_bytes = key.encode("utf-8")
            if prev_key is not None and key_bytes <= prev_key:
                raise LedgerError("UNENCODABLE", "map keys out of canonical order")
            prev_key = key_bytes
            value, offset = _decode_at(data, offset)
            result[key] = value
        return result, offset
    raise LedgerError("UNENCODABLE", f"unknown tag byte 0x{tag:02x}")
