"""Transaction wire types: proposals, endorsements, envelopes.

These are the immutable messages exchanged between clients, endorsing peers,
and the orderer. Their canonical encodings double as the hashing input, so a
transaction id or result hash is the same on every peer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import codec
from .errors import LedgerError
from .statedb import Version, WriteOp


@dataclass(frozen=True)
class Proposal:
    """A client's request to run a contract operation on a channel."""

    channel: str
    contract_op: str
    args: Any
    creator: str
    nonce: bytes
    endorser_peers: tuple[str, ...]

    def to_doc(self) -> dict[str, Any]:
        return {
            "channel": self.channel,
            "contract_op": self.contract_op,
            "args": self.args,
            "creator": self.creator,
            "nonce": self.nonce,
            "endorser_peers": list(self.endorser_peers),
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "Proposal":
        return cls(
            channel=doc["channel"],
            contract_op=doc["contract_op"],
            args=doc["args"],
            creator=doc["creator"],
            nonce=doc["nonce"],
            endorser_peers=tuple(doc["endorser_peers"]),
        )

    def encoded(self) -> bytes:
        """Canonical encoding, computed once (the proposal is immutable)."""
        cached = self.__dict__.get("_encoded")
        if cached is None:
            cached = codec.encode(self.to_doc())
            object.__setattr__(self, "_encoded", cached)
        return cached

    def tx_id(self) -> bytes:
        """Content hash of the canonical proposal encoding."""
        cached = self.__dict__.get("_tx_id")
        if cached is None:
            cached = codec.hash_payload(self.encoded())
            object.__setattr__(self, "_tx_id", cached)
        return cached


def result_hash(read_set: tuple[tuple[str, Version | None], ...],
                write_set: tuple[WriteOp, ...]) -> bytes:
    """The endorsement result: a digest over the read and write sets.

    Two endorsers produced "the same result" exactly when these digests are
    equal.
    """
    return codec.hash_value({
        "reads": [[k, v.to_doc() if v is not None else None] for k, v in read_set],
        "writes": [w.to_doc() for w in write_set],
    })


@dataclass(frozen=True)
class Endorsement:
    """One peer's simulated execution: what it read, what it would write."""

    peer: str
    read_set: tuple[tuple[str, Version | None], ...]
    write_set: tuple[WriteOp, ...]
    result_hash: bytes
    signature: bytes

    def to_doc(self) -> dict[str, Any]:
        return {
            "peer": self.peer,
            "reads": [[k, v.to_doc() if v is not None else None] for k, v in self.read_set],
            "writes": [w.to_doc() for w in self.write_set],
            "result_hash": self.result_hash,
            "signature": self.signature,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "Endorsement":
        reads = tuple(
            (k, Version.from_doc(v) if v is not None else None) for k, v in doc["reads"]
        )
        writes = tuple(WriteOp.from_doc(w) for w in doc["writes"])
        return cls(
            peer=doc["peer"],
            read_set=reads,
            write_set=writes,
            result_hash=doc["result_hash"],
            signature=doc["signature"],
        )

    def recomputed_result_hash(self) -> bytes:
        """Digest over this endorsement's sets, cached for the commit-time
        re-check on every peer."""
        cached = self.__dict__.get("_recomputed")
        if cached is None:
            cached = result_hash(self.read_set, self.write_set)
            object.__setattr__(self, "_recomputed", cached)
        return cached


@dataclass(frozen=True)
class Envelope:
    """An endorsed transaction ready for ordering."""

    tx_id: bytes
    proposal: Proposal
    endorsements: tuple[Endorsement, ...] = field(default=())

    def to_doc(self) -> dict[str, Any]:
        return {
            "tx_id": self.tx_id,
            "proposal": self.proposal.to_doc(),
            "endorsements": [e.to_doc() for e in self.endorsements],
        }

    def encoded(self) -> bytes:
        """Canonical encoding with the proposal's cached bytes spliced in."""
        cached = self.__dict__.get("_encoded")
        if cached is None:
            cached = codec.encode({
                "tx_id": self.tx_id,
                "proposal": codec.Raw(self.proposal.encoded()),
                "endorsements": [e.to_doc() for e in self.endorsements],
            })
            object.__setattr__(self, "_encoded", cached)
        return cached

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "Envelope":
        try:
            return cls(
                tx_id=doc["tx_id"],
                proposal=Proposal.from_doc(doc["proposal"]),
                endorsements=tuple(Endorsement.from_doc(e) for e in doc["endorsements"]),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise LedgerError("UNENCODABLE", f"malformed envelope document: {exc}") from exc


CONFIG_OP = "__channel_config__"
CONFIG_CREATOR = "__orderer__"


def config_envelope(channel: str, members: list[str]) -> Envelope:
    """The system envelope carried by a channel's genesis block.

    It anchors the channel name and member list under the chain's hashes; it
    is not endorsed and applies no state.
    """
    proposal = Proposal(
        channel=channel,
        contract_op=CONFIG_OP,
        args={"channel": channel, "members": sorted(members)},
        creator=CONFIG_CREATOR,
        nonce=b"\x00" * 16,
        endorser_peers=(),
    )
    return Envelope(tx_id=proposal.tx_id(), proposal=proposal, endorsements=())
