"""Tamper-evident QR payloads.

A payload binds a batch id to the header hash of the latest block that
touched the batch: ``PLV1:<batch_id>:<block_no>:<digest16>``. Consumers
verifying a payload recompute the digest against the named block; any edit
to the batch id, block number, or digest breaks the check.
"""

from __future__ import annotations

import re

from . import codec
from .errors import LedgerError

QR_PREFIX = "PLV1"
_PAYLOAD_RE = re.compile(r"^PLV1:([A-Za-z0-9_-]{1,64}):([0-9]+):([0-9a-f]{16})$")


def qr_digest(batch_id: str, anchor_header_hash: bytes) -> str:
    """First 16 hex chars of the digest over batch id and anchor hash."""
    return codec.hash_payload(batch_id.encode("utf-8") + anchor_header_hash).hex()[:16]


def format_payload(batch_id: str, block_no: int, anchor_header_hash: bytes) -> str:
    return f"{QR_PREFIX}:{batch_id}:{block_no}:{qr_digest(batch_id, anchor_header_hash)}"


def parse_payload(payload: str) -> tuple[str, int, str]:
    """Split a payload into (batch_id, block_no, digest16); the grammar is
    bit-exact and anything else is MALFORMED_PAYLOAD."""
    match = _PAYLOAD_RE.match(payload)
    if match is None:
        raise LedgerError("MALFORMED_PAYLOAD", payload[:80])
    return match.group(1), int(match.group(2)), match.group(3)
