"""The transaction lifecycle: endorse, assemble, order, validate, commit.

A proposal is simulated on its designated endorsing peers; an envelope is
assembled only if at least two endorsements carry the same result hash and
valid signatures. The orderer batches envelopes into blocks per channel;
each committing peer then re-checks endorsements, authorization, and read
versions, applies the valid write sets, and appends the flagged block to its
own ledger copy.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import Any, Callable

from . import codec
from .chain import (BAD_ENDORSEMENT, MVCC_CONFLICT, UNAUTHORIZED, VALID,
                    Block, Ledger, build_block)
from .contracts import ContractOp, TxContext
from .errors import LedgerError
from .membership import MembershipService
from .provenance import ProvenanceIndex
from .statedb import StateDB, Version
from .wire import CONFIG_OP, Endorsement, Envelope, Proposal, result_hash

MIN_ENDORSEMENTS = 2

ClockMs = Callable[[], int]


def wall_clock_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class SimulationResult:
    endorsement: Endorsement
    response: Any


class Peer:
    """One network participant: per-channel ledger, world state, and the
    provenance index that the commit path keeps in step with state."""

    def __init__(self, peer_id: str, identity_id: str,
                 membership: MembershipService,
                 contracts: dict[str, ContractOp],
                 directory: dict[str, str],
                 datadir: str | None = None):
        self.id = peer_id
        self.identity_id = identity_id
        self.membership = membership
        self.contracts = contracts
        self.directory = directory  # peer id -> identity id, shared per network
        self.datadir = datadir
        self._ledgers: dict[str, Ledger] = {}
        self._states: dict[str, StateDB] = {}
        self._indexes: dict[str, ProvenanceIndex] = {}

    # -- channel plumbing ----------------------------------------------------

    def channels(self) -> list[str]:
        return sorted(self._ledgers)

    def _ledger_path(self, channel: str) -> str | None:
        if self.datadir is None:
            return None
        return os.path.join(self.datadir, self.id, f"{channel}.ledger")

    def join_channel(self, channel: str, genesis: Block) -> None:
        if channel in self._ledgers:
            return
        self._ledgers[channel] = Ledger(owner_peer=self.id, path=self._ledger_path(channel))
        self._states[channel] = StateDB()
        self._indexes[channel] = ProvenanceIndex()
        self.validate_and_commit(channel, genesis)

    def ledger(self, channel: str) -> Ledger:
        if channel not in self._ledgers:
            raise LedgerError("NOT_A_MEMBER", f"{self.id} holds no ledger for {channel!r}")
        return self._ledgers[channel]

    def state(self, channel: str) -> StateDB:
        if channel not in self._states:
            raise LedgerError("NOT_A_MEMBER", f"{self.id} holds no state for {channel!r}")
        return self._states[channel]

    def index(self, channel: str) -> ProvenanceIndex:
        if channel not in self._indexes:
            raise LedgerError("NOT_A_MEMBER", f"{self.id} holds no index for {channel!r}")
        return self._indexes[channel]

    def height(self, channel: str) -> int:
        return self.ledger(channel).height()

    # -- endorsement ----------------------------------------------------------

    def simulate(self, proposal: Proposal) -> SimulationResult:
        """Run the contract against current committed state, mutating
        nothing; contract refusals propagate to the caller as typed errors
        and never produce an endorsement."""
        if self.id not in proposal.endorser_peers:
            raise LedgerError("NOT_AN_ENDORSER",
                              f"{self.id} is not a designated endorser")
        if not self.membership.authorize(self.identity_id, proposal.channel):
            raise LedgerError("NOT_AN_ENDORSER",
                              f"{self.id} is not a member of {proposal.channel!r}")
        op = self.contracts.get(proposal.contract_op)
        if op is None:
            raise LedgerError("UNKNOWN_OP", proposal.contract_op)
        ctx = TxContext(
            state=self.state(proposal.channel),
            channel=proposal.channel,
            creator=proposal.creator,
            membership=self.membership,
            args=proposal.args,
        )
        response = op(ctx)
        reads = ctx.read_set()
        writes = ctx.write_set()
        digest = result_hash(reads, writes)
        signature = self.membership.sign(self.identity_id, proposal.tx_id() + digest)
        endorsement = Endorsement(
            peer=self.id,
            read_set=reads,
            write_set=writes,
            result_hash=digest,
            signature=signature,
        )
        return SimulationResult(endorsement=endorsement, response=response)

    def endorse(self, proposal: Proposal) -> Endorsement:
        return self.simulate(proposal).endorsement

    # -- validation and commit -------------------------------------------------

    def validate_and_commit(self, channel: str, block: Block) -> list[str]:
        """Flag every envelope, apply valid write sets, append the block."""
        if not self.membership.authorize(self.identity_id, channel):
            raise LedgerError("NOT_A_MEMBER", f"{self.id} not in {channel!r}")
        ledger = self.ledger(channel)
        if block.header.number != ledger.height():
            raise LedgerError("SEQUENCE_GAP",
                              f"expected {ledger.height()}, got {block.header.number}")
        state = self.state(channel)
        flags: list[str] = []
        for tx_index, envelope in enumerate(block.envelopes):
            flag = self._validate_envelope(channel, state, envelope)
            if flag == VALID and envelope.endorsements:
                state.apply_write_set(
                    list(envelope.endorsements[0].write_set),
                    Version(block.header.number, tx_index),
                )
            flags.append(flag)
        committed = block.with_validity(flags)
        ledger.append_block(committed)
        self._indexes[channel].observe_block(committed)
        return flags

    def _validate_envelope(self, channel: str, state: StateDB,
                           envelope: Envelope) -> str:
        proposal = envelope.proposal
        if proposal.contract_op == CONFIG_OP:
            # Genesis configuration envelopes are system-issued and carry no
            # endorsements or writes.
            return VALID
        if proposal.channel != channel:
            return BAD_ENDORSEMENT
        if envelope.tx_id != proposal.tx_id():
            return BAD_ENDORSEMENT
        if len(envelope.endorsements) < MIN_ENDORSEMENTS:
            return BAD_ENDORSEMENT
        first = envelope.endorsements[0]
        for endorsement in envelope.endorsements:
            if endorsement.result_hash != first.result_hash:
                return BAD_ENDORSEMENT
            if endorsement.peer not in proposal.endorser_peers:
                return BAD_ENDORSEMENT
            if endorsement.result_hash != endorsement.recomputed_result_hash():
                return BAD_ENDORSEMENT
            signer = self.directory.get(endorsement.peer)
            if signer is None or not self.membership.authorize(signer, channel):
                return BAD_ENDORSEMENT
            payload = envelope.tx_id + endorsement.result_hash
            if not self.membership.verify(signer, payload, endorsement.signature):
                return BAD_ENDORSEMENT
        if not self.membership.authorize(proposal.creator, channel):
            return UNAUTHORIZED
        for key, version in first.read_set:
            entry = state.get(key)
            current = entry.version if entry is not None else None
            if current != version:
                return MVCC_CONFLICT
        return VALID

    # -- queries ----------------------------------------------------------------

    def state_root(self, channel: str) -> bytes:
        return self.state(channel).state_root()

    def close(self) -> None:
        for ledger in self._ledgers.values():
            ledger.close()


def assemble(proposal: Proposal, endorsements: list[Endorsement],
             membership: MembershipService,
             directory: dict[str, str]) -> Envelope:
    """Build an envelope iff the endorsement policy holds: at least two
    endorsements, all signatures valid, all result hashes equal."""
    if len(endorsements) < MIN_ENDORSEMENTS:
        raise LedgerError("INSUFFICIENT_ENDORSEMENTS",
                          f"{len(endorsements)} endorsement(s), need {MIN_ENDORSEMENTS}")
    tx_id = proposal.tx_id()
    for endorsement in endorsements:
        signer = directory.get(endorsement.peer)
        payload = tx_id + endorsement.result_hash
        if signer is None or not membership.verify(signer, payload, endorsement.signature):
            raise LedgerError("BAD_SIGNATURE", f"endorsement by {endorsement.peer}")
    hashes = {e.result_hash for e in endorsements}
    if len(hashes) != 1:
        raise LedgerError("ENDORSEMENT_MISMATCH",
                          f"{len(hashes)} distinct result hashes across endorsers")
    # equal result hashes mean equal sets; share one copy across endorsements
    first = endorsements[0]
    shared = [first] + [
        Endorsement(peer=e.peer, read_set=first.read_set,
                    write_set=first.write_set, result_hash=e.result_hash,
                    signature=e.signature)
        for e in endorsements[1:]
    ]
    return Envelope(tx_id=tx_id, proposal=proposal, endorsements=tuple(shared))


class Orderer:
    """Single consenter: total-orders envelopes per channel and cuts blocks.

    A block is cut when a channel's queue reaches ``batch_size`` or when
    ``batch_timeout_ms`` has elapsed since its oldest pending envelope;
    arrival-time ties are broken by ascending tx id.
    """

    def __init__(self, batch_size: int = 10, batch_timeout_ms: int = 500,
                 clock: ClockMs = wall_clock_ms):
        self.batch_size = batch_size
        self.batch_timeout_ms = batch_timeout_ms
        self.clock = clock
        self._pending: dict[str, list[tuple[int, bytes, Envelope]]] = {}
        self._next_number: dict[str, int] = {}
        self._prev_hash: dict[str, bytes] = {}
        self._seen: dict[str, set[bytes]] = {}

    def register_channel(self, channel: str, genesis: Block) -> None:
        self._pending[channel] = []
        self._next_number[channel] = genesis.header.number + 1
        self._prev_hash[channel] = genesis.header.hash()
        self._seen[channel] = set()

    def channels(self) -> list[str]:
        return sorted(self._pending)

    def submit(self, envelope: Envelope) -> None:
        channel = envelope.proposal.channel
        if channel not in self._pending:
            raise LedgerError("UNKNOWN_CHANNEL", channel)
        if envelope.tx_id in self._seen[channel]:
            return
        self._seen[channel].add(envelope.tx_id)
        self._pending[channel].append((self.clock(), envelope.tx_id, envelope))

    def pending_count(self, channel: str) -> int:
        return len(self._pending.get(channel, ()))

    def oldest_pending_ms(self, channel: str) -> int | None:
        pending = self._pending.get(channel)
        if not pending:
            return None
        return min(arrival for arrival, _, _ in pending)

    def cut_block(self, channel: str, force: bool = False) -> Block | None:
        """Cut the next block if a cut condition holds (or ``force``)."""
        if channel not in self._pending:
            raise LedgerError("UNKNOWN_CHANNEL", channel)
        pending = self._pending[channel]
        if not pending:
            return None
        due = force or len(pending) >= self.batch_size
        if not due:
            oldest = min(arrival for arrival, _, _ in pending)
            due = self.clock() - oldest >= self.batch_timeout_ms
        if not due:
            return None
        pending.sort(key=lambda item: (item[0], item[1]))
        taken = pending[:self.batch_size]
        self._pending[channel] = pending[self.batch_size:]
        envelopes = [envelope for _, _, envelope in taken]
        number = self._next_number[channel]
        block = build_block(
            number=number,
            prev_hash=self._prev_hash[channel],
            envelopes=envelopes,
            validity=[VALID] * len(envelopes),
            timestamp=self.clock(),
        )
        self._next_number[channel] = number + 1
        self._prev_hash[channel] = block.header.hash()
        return block

    def resume_channel(self, channel: str, height: int, tip_hash: bytes,
                       seen: set[bytes]) -> None:
        """Restore ordering state from a replayed ledger."""
        self._pending[channel] = []
        self._next_number[channel] = height
        self._prev_hash[channel] = tip_hash
        self._seen[channel] = set(seen)


def make_genesis(channel: str, members: list[str], timestamp: int) -> Block:
    """Genesis block carrying the channel configuration as its single
    system envelope."""
    from .wire import config_envelope

    envelope = config_envelope(channel, members)
    return build_block(
        number=0,
        prev_hash=codec.ZERO_HASH,
        envelopes=[envelope],
        validity=[VALID],
        timestamp=timestamp,
    )
