"""Hash-chained blocks and the append-only per-channel ledger.

A block header commits to its transaction ids through a Merkle root
(``data_hash``) and to every remaining content byte through ``body_hash``;
headers are chained by ``prev_hash``. Together with strict decoding this
makes any single-byte mutation of a persisted ledger file attributable to
its containing block, with no external trust anchor.

Ledger files hold one record per block: a 4-byte big-endian length prefix
followed by the canonical block encoding. The encoding is deterministic, so
two peers with the same block sequence write byte-identical files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, BinaryIO, Iterable

from . import codec
from .errors import LedgerError
from .wire import Envelope

VALID = "VALID"
BAD_ENDORSEMENT = "BAD_ENDORSEMENT"
MVCC_CONFLICT = "MVCC_CONFLICT"
UNAUTHORIZED = "UNAUTHORIZED"
VALIDITY_FLAGS = frozenset({VALID, BAD_ENDORSEMENT, MVCC_CONFLICT, UNAUTHORIZED})


def merkle_root(tx_ids: list[bytes]) -> bytes:
    """Merkle root over transaction ids.

    Leaves are the digests of the ids; odd levels duplicate their last node.
    The root of an empty list is the digest of the empty byte sequence.
    """
    if not tx_ids:
        return codec.hash_payload(b"")
    level = [codec.hash_payload(t) for t in tx_ids]
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [
            codec.hash_payload(level[i] + level[i + 1]) for i in range(0, len(level), 2)
        ]
    return level[0]


@dataclass(frozen=True)
class BlockHeader:
    number: int
    prev_hash: bytes
    data_hash: bytes
    timestamp: int
    body_hash: bytes

    def to_doc(self) -> dict[str, Any]:
        return {
            "number": self.number,
            "prev_hash": self.prev_hash,
            "data_hash": self.data_hash,
            "timestamp": self.timestamp,
            "body_hash": self.body_hash,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "BlockHeader":
        return cls(
            number=doc["number"],
            prev_hash=doc["prev_hash"],
            data_hash=doc["data_hash"],
            timestamp=doc["timestamp"],
            body_hash=doc["body_hash"],
        )

    def hash(self) -> bytes:
        return codec.hash_value(self.to_doc())


def _body_hash(envelopes: tuple[Envelope, ...] | list[Envelope], timestamp: int) -> bytes:
    return codec.hash_value({
        "envelopes": [codec.Raw(e.encoded()) for e in envelopes],
        "timestamp": timestamp,
    })


@dataclass
class Block:
    """A batch of endorsed transactions plus per-transaction validity flags.

    The flags are not part of the header hashes: they are recomputed
    deterministically by every committing peer, and their byte integrity in
    ledger files is guaranteed by strict decoding (no two flag names share a
    length).
    """

    header: BlockHeader
    envelopes: tuple[Envelope, ...]
    validity: tuple[str, ...]

    def to_doc(self) -> dict[str, Any]:
        return {
            "header": self.header.to_doc(),
            "envelopes": [e.to_doc() for e in self.envelopes],
            "validity": list(self.validity),
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "Block":
        try:
            if set(doc) != {"header", "envelopes", "validity"}:
                raise LedgerError("UNENCODABLE", "unexpected block fields")
            return cls(
                header=BlockHeader.from_doc(doc["header"]),
                envelopes=tuple(Envelope.from_doc(e) for e in doc["envelopes"]),
                validity=tuple(doc["validity"]),
            )
        except (KeyError, TypeError) as exc:
            raise LedgerError("UNENCODABLE", f"malformed block document: {exc}") from exc

    def encode(self) -> bytes:
        cached = self.__dict__.get("_encoded")
        if cached is None:
            cached = codec.encode({
                "header": self.header.to_doc(),
                "envelopes": [codec.Raw(e.encoded()) for e in self.envelopes],
                "validity": list(self.validity),
            })
            self._encoded = cached
        return cached

    def with_validity(self, validity: Iterable[str]) -> "Block":
        flags = tuple(validity)
        if len(flags) != len(self.envelopes):
            raise LedgerError("LENGTH_MISMATCH", "one validity flag per envelope")
        return Block(header=self.header, envelopes=self.envelopes, validity=flags)


def build_block(number: int, prev_hash: bytes, envelopes: list[Envelope],
                validity: list[str], timestamp: int) -> Block:
    """Assemble a block; fields are copied verbatim, hashes are derived."""
    if len(validity) != len(envelopes):
        raise LedgerError("LENGTH_MISMATCH",
                          f"{len(envelopes)} envelopes but {len(validity)} flags")
    if number < 0:
        raise LedgerError("LENGTH_MISMATCH", "block number must be non-negative")
    header = BlockHeader(
        number=number,
        prev_hash=prev_hash,
        data_hash=merkle_root([e.tx_id for e in envelopes]),
        timestamp=timestamp,
        body_hash=_body_hash(envelopes, timestamp),
    )
    return Block(header=header, envelopes=tuple(envelopes), validity=tuple(validity))


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    first_bad_block: int | None = None


class Ledger:
    """Append-only block sequence for one peer and channel.

    If ``path`` is set every append also persists the block record; the file
    is the durable copy and replaying it reproduces the in-memory ledger.
    """

    def __init__(self, owner_peer: str, path: str | None = None):
        self.owner_peer = owner_peer
        self.path = path
        self.blocks: list[Block] = []
        self._file: BinaryIO | None = None

    def __len__(self) -> int:
        return len(self.blocks)

    def height(self) -> int:
        return len(self.blocks)

    def tip_hash(self) -> bytes:
        if not self.blocks:
            return codec.ZERO_HASH
        return self.blocks[-1].header.hash()

    def append_block(self, block: Block) -> None:
        """Append after checking sequence and chain link."""
        if block.header.number != len(self.blocks):
            raise LedgerError(
                "SEQUENCE_GAP",
                f"expected block {len(self.blocks)}, got {block.header.number}",
            )
        expected_prev = self.tip_hash()
        if block.header.prev_hash != expected_prev:
            raise LedgerError("BAD_LINK", f"bad prev_hash on block {block.header.number}")
        self.blocks.append(block)
        if self.path is not None:
            self._persist(block)

    def _persist(self, block: Block) -> None:
        if self._file is None:
            os.makedirs(os.path.dirname(self.path), exist_ok=True)
            self._file = open(self.path, "ab")
        record = block.encode()
        self._file.write(len(record).to_bytes(4, "big"))
        self._file.write(record)
        self._file.flush()

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None


def verify_chain(ledger: Ledger) -> ChainReport:
    """Check every link, Merkle root, body hash, and the genesis convention.

    Violations are reported (lowest offending block first), never raised.
    """
    prev_hash = codec.ZERO_HASH
    for index, block in enumerate(ledger.blocks):
        if not _block_intact(block, index, prev_hash):
            return ChainReport(ok=False, first_bad_block=index)
        prev_hash = block.header.hash()
    return ChainReport(ok=True)


def _block_intact(block: Block, index: int, expected_prev: bytes) -> bool:
    header = block.header
    if header.number != index or header.prev_hash != expected_prev:
        return False
    if len(block.validity) != len(block.envelopes):
        return False
    if any(flag not in VALIDITY_FLAGS for flag in block.validity):
        return False
    for env in block.envelopes:
        if env.proposal.tx_id() != env.tx_id:
            return False
    if header.data_hash != merkle_root([e.tx_id for e in block.envelopes]):
        return False
    if header.body_hash != _body_hash(block.envelopes, header.timestamp):
        return False
    return True


def write_ledger_file(path: str, blocks: Iterable[Block]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as fh:
        for block in blocks:
            record = block.encode()
            fh.write(len(record).to_bytes(4, "big"))
            fh.write(record)


def read_ledger_file(path: str, owner_peer: str = "") -> Ledger:
    """Decode a ledger file strictly; any malformed record raises."""
    ledger = Ledger(owner_peer=owner_peer)
    for number, block in _iter_records(path):
        if block is None:
            raise LedgerError("UNENCODABLE", f"malformed record for block {number}")
        ledger.blocks.append(block)
    return ledger


def verify_ledger_file(path: str, owner_peer: str = "") -> tuple[ChainReport, int]:
    """Decode and verify a persisted ledger; tolerant of malformed records.

    Returns the chain report and the number of well-formed blocks read. A
    record that fails to decode is reported as the bad block itself.
    """
    ledger = Ledger(owner_peer=owner_peer)
    for number, block in _iter_records(path):
        if block is None:
            report = verify_chain(ledger)
            if report.ok:
                report = ChainReport(ok=False, first_bad_block=number)
            elif report.first_bad_block > number:
                report = ChainReport(ok=False, first_bad_block=number)
            return report, len(ledger.blocks)
        ledger.blocks.append(block)
    return verify_chain(ledger), len(ledger.blocks)


def _iter_records(path: str):
    """Yield (record_index, Block | None); None marks an undecodable record
    and ends iteration."""
    with open(path, "rb") as fh:
        data = fh.read()
    offset = 0
    number = 0
    while offset < len(data):
        if offset + 4 > len(data):
            yield number, None
            return
        length = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        record = data[offset:offset + length]
        if len(record) < length:
            yield number, None
            return
        offset += length
        try:
            block = Block.from_doc(codec.decode(record))
        except LedgerError:
            yield number, None
            return
        yield number, block
        number += 1
