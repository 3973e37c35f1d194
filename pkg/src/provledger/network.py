"""An in-process peer network: membership, orderer, peers, and the domain
operations the gateway, CLI, and simulator drive.

This module runs everything synchronously (endorse, assemble, order, cut,
deliver); the virtual-time simulator wraps the same components with message
latency and loss instead.
"""

from __future__ import annotations

import json
import os
import random
import threading
from dataclasses import dataclass
from typing import Any

from .chain import VALID, Block, read_ledger_file
from .contracts import ContractOp, default_registry
from .errors import LedgerError
from .membership import MAIN_CHANNEL, MembershipService
from .provenance import RecallReport, trace_back, trace_forward
from .qr import format_payload, parse_payload, qr_digest
from .txflow import (ClockMs, Orderer, Peer, assemble, make_genesis,
                     wall_clock_ms)
from .wire import Proposal

MEMBERSHIP_FILE = "membership.json"
PEERS_FILE = "peers.json"
TOKENS_FILE = "tokens.json"


@dataclass
class TxOutcome:
    tx_id: bytes
    flag: str
    response: Any

    @property
    def valid(self) -> bool:
        return self.flag == VALID


class Network:
    """All actors of one deployment plus the channel wiring between them."""

    def __init__(self, membership: MembershipService | None = None,
                 contracts: dict[str, ContractOp] | None = None,
                 datadir: str | None = None,
                 clock: ClockMs = wall_clock_ms,
                 rng: random.Random | None = None,
                 batch_size: int = 10,
                 batch_timeout_ms: int = 500):
        self.membership = membership or MembershipService(rng=rng)
        self.contracts = contracts or default_registry()
        self.datadir = datadir
        self.clock = clock
        self.rng = rng or random.Random()
        self.directory: dict[str, str] = {}
        self.peers: dict[str, Peer] = {}
        self.orderer = Orderer(batch_size=batch_size,
                               batch_timeout_ms=batch_timeout_ms, clock=clock)
        self.tokens: dict[str, str] = {}  # bearer token -> identity id
        self._flags: dict[str, dict[bytes, str]] = {}
        self._offer_seq = 0
        self._main_open = False
        # ordering and commit are single-writer; concurrent gateway requests
        # funnel through this lock
        self._commit_lock = threading.RLock()

    # -- construction -----------------------------------------------------------

    def add_identity(self, display_name: str, role: str,
                     token: str | None = None, with_peer: bool = False,
                     identity_id: str | None = None) -> str:
        identity = self.membership.register_identity(display_name, role,
                                                     identity_id=identity_id)
        if token:
            self.tokens[token] = identity.id
        if with_peer:
            self.add_peer(identity.id, identity.id)
        self.save_membership()
        return identity.id

    def add_peer(self, peer_id: str, identity_id: str) -> Peer:
        if peer_id in self.peers:
            raise LedgerError("BAD_CONFIG", f"duplicate peer id {peer_id!r}")
        self.membership.get(identity_id)
        peer = Peer(
            peer_id=peer_id,
            identity_id=identity_id,
            membership=self.membership,
            contracts=self.contracts,
            directory=self.directory,
            datadir=self.datadir,
        )
        self.peers[peer_id] = peer
        self.directory[peer_id] = identity_id
        if self._main_open and self.membership.authorize(identity_id, MAIN_CHANNEL):
            self._catch_up(peer, MAIN_CHANNEL)
        return peer

    def open_main(self) -> None:
        """Create the public channel once the initial identities exist."""
        if self._main_open:
            return
        members = sorted(self.membership.channel(MAIN_CHANNEL).members)
        genesis = make_genesis(MAIN_CHANNEL, members, self.clock())
        self.orderer.register_channel(MAIN_CHANNEL, genesis)
        self._flags[MAIN_CHANNEL] = {}
        for peer in self.peers.values():
            if self.membership.authorize(peer.identity_id, MAIN_CHANNEL):
                peer.join_channel(MAIN_CHANNEL, genesis)
        self._main_open = True
        self.save_membership()

    def create_channel(self, name: str, member_ids: set[str]) -> None:
        """Create a confidentiality scope and hand its genesis block to the
        member peers only."""
        self.membership.create_channel(name, set(member_ids))
        genesis = make_genesis(name, sorted(member_ids), self.clock())
        self.orderer.register_channel(name, genesis)
        self._flags[name] = {}
        for peer in self.peers.values():
            if peer.identity_id in member_ids:
                peer.join_channel(name, genesis)
        self.save_membership()

    def _catch_up(self, peer: Peer, channel: str) -> None:
        source = self._any_member_peer(channel, exclude=peer.id)
        if source is None:
            raise LedgerError("UNKNOWN_CHANNEL", f"no peer holds {channel!r}")
        blocks = source.ledger(channel).blocks
        peer.join_channel(channel, blocks[0])
        for block in blocks[1:]:
            peer.validate_and_commit(
                channel, block.with_validity([VALID] * len(block.envelopes)))

    def _any_member_peer(self, channel: str, exclude: str | None = None) -> Peer | None:
        for peer_id in sorted(self.peers):
            if peer_id == exclude:
                continue
            peer = self.peers[peer_id]
            if channel in peer.channels():
                return peer
        return None

    def member_peers(self, channel: str) -> list[Peer]:
        members = self.membership.channel(channel).members
        return [self.peers[pid] for pid in sorted(self.peers)
                if self.directory[pid] in members]

    def default_endorsers(self, channel: str) -> list[str]:
        peers = self.member_peers(channel)
        if len(peers) < 2:
            raise LedgerError("INSUFFICIENT_ENDORSEMENTS",
                              f"channel {channel!r} has {len(peers)} member peer(s)")
        return [p.id for p in peers[:2]]

    # -- transaction driving ------------------------------------------------------

    def build_proposal(self, creator: str, channel: str, op: str, args: Any,
                       endorsers: list[str] | None = None) -> Proposal:
        return Proposal(
            channel=channel,
            contract_op=op,
            args=args,
            creator=creator,
            nonce=self.rng.randbytes(16),
            endorser_peers=tuple(endorsers or self.default_endorsers(channel)),
        )

    def submit_proposal(self, proposal: Proposal) -> tuple[bytes, Any]:
        """Endorse on the designated peers and queue the envelope; returns
        (tx_id, contract response) without waiting for a block."""
        simulations = []
        for peer_id in proposal.endorser_peers:
            peer = self.peers.get(peer_id)
            if peer is None:
                raise LedgerError("NOT_AN_ENDORSER", f"unknown peer {peer_id!r}")
            simulations.append(peer.simulate(proposal))
        envelope = assemble(proposal, [s.endorsement for s in simulations],
                            self.membership, self.directory)
        with self._commit_lock:
            self.orderer.submit(envelope)
        return envelope.tx_id, simulations[0].response

    def transact(self, creator: str, channel: str, op: str, args: Any,
                 endorsers: list[str] | None = None) -> TxOutcome:
        """Full synchronous round: endorse, order, commit, report the flag."""
        proposal = self.build_proposal(creator, channel, op, args, endorsers)
        with self._commit_lock:
            tx_id, response = self.submit_proposal(proposal)
            self.flush(channel)
            flag = self.flag_of(channel, tx_id)
        return TxOutcome(tx_id=tx_id, flag=flag, response=response)

    def flush(self, channel: str) -> list[Block]:
        """Force-cut every pending envelope on a channel and deliver the
        blocks to all member peers."""
        blocks = []
        with self._commit_lock:
            while True:
                block = self.orderer.cut_block(channel, force=True)
                if block is None:
                    return blocks
                self.deliver(channel, block)
                blocks.append(block)

    def flush_all(self) -> None:
        for channel in self.orderer.channels():
            self.flush(channel)

    def commit_on_peer(self, peer: Peer, channel: str, block: Block) -> list[str]:
        """Commit on one peer and record the flags for tx lookups."""
        flags = peer.validate_and_commit(channel, block)
        channel_flags = self._flags.setdefault(channel, {})
        for envelope, flag in zip(block.envelopes, flags):
            channel_flags[envelope.tx_id] = flag
        return flags

    def deliver(self, channel: str, block: Block) -> list[str]:
        """Commit a cut block on every member peer; peers must agree on the
        validity flags (they are a deterministic function of the chain)."""
        flags: list[str] | None = None
        with self._commit_lock:
            for peer in self.member_peers(channel):
                peer_flags = self.commit_on_peer(peer, channel, block)
                if flags is None:
                    flags = peer_flags
                elif flags != peer_flags:
                    raise LedgerError("DIVERGENCE",
                                      f"peers disagree on block {block.header.number}")
        if flags is None:
            raise LedgerError("UNKNOWN_CHANNEL", f"no member peers for {channel!r}")
        return flags

    def flag_of(self, channel: str, tx_id: bytes) -> str:
        flags = self._flags.get(channel, {})
        if tx_id not in flags:
            raise LedgerError("UNKNOWN_TX", tx_id.hex())
        return flags[tx_id]

    # -- domain operations ---------------------------------------------------------

    def register_animal(self, farm: str, animal_id: str, born_at: str) -> TxOutcome:
        return self.transact(farm, MAIN_CHANNEL, "register_animal",
                             {"animal_id": animal_id, "born_at": born_at})

    def record_animal_event(self, farm: str, animal_id: str, kind: str,
                            detail: str, at: str) -> TxOutcome:
        return self.transact(farm, MAIN_CHANNEL, "record_animal_event",
                             {"animal_id": animal_id, "kind": kind,
                              "detail": detail, "at": at})

    def register_batch(self, farm: str, batch_id: str,
                       source_animals: list[str], rfid: str,
                       at: int | None = None) -> TxOutcome:
        return self.transact(farm, MAIN_CHANNEL, "register_batch",
                             {"batch_id": batch_id,
                              "source_animals": sorted(source_animals),
                              "rfid": rfid, "at": self._at(at)})

    def process_batch(self, processor: str, inputs: list[str], output_id: str,
                      process_kind: str, at: int | None = None) -> TxOutcome:
        return self.transact(processor, MAIN_CHANNEL, "process_batch",
                             {"inputs": list(inputs), "output_id": output_id,
                              "process_kind": process_kind, "at": self._at(at)})

    def transfer_custody(self, holder: str, batch_id: str, to: str,
                         at: int | None = None) -> TxOutcome:
        return self.transact(holder, MAIN_CHANNEL, "transfer_custody",
                             {"batch_id": batch_id, "to": to, "at": self._at(at)})

    def publish_offer(self, seller: str, product_id: str, standard_price: int,
                      targeted: list[tuple[str, int]] | None = None,
                      settlement: str = "BANK_TRANSFER",
                      offer_id: str | None = None) -> dict[str, Any]:
        """Publish an offer; targeted terms go to a fresh private deal
        channel whose members are the seller, the targeted buyers, and the
        orderer identity."""
        targeted = list(targeted or [])
        if offer_id is None:
            self._offer_seq += 1
            offer_id = f"offer-{self._offer_seq}"
        outcome = self.transact(seller, MAIN_CHANNEL, "publish_offer", {
            "offer_id": offer_id,
            "product_id": product_id,
            "standard_price": standard_price,
            "settlement": settlement,
        })
        if not outcome.valid:
            raise LedgerError("TX_NOT_VALID", f"publish flagged {outcome.flag}")
        if targeted:
            channel = self.deal_channel_name(offer_id)
            members = {seller, *[buyer for buyer, _ in targeted]}
            members.update(i.id for i in self.membership.identities()
                           if i.role == "ORDERER")
            self.create_channel(channel, members)
            terms = self.transact(seller, channel, "publish_offer_terms", {
                "offer_id": offer_id,
                "targeted": [[buyer, price] for buyer, price in targeted],
            })
            if not terms.valid:
                raise LedgerError("TX_NOT_VALID", f"terms flagged {terms.flag}")
        return {"offer_id": offer_id, "seller": seller, "product_id": product_id,
                "standard_price": standard_price, "targeted": targeted,
                "settlement": settlement}

    @staticmethod
    def deal_channel_name(offer_id: str) -> str:
        return f"deal-{offer_id}"

    def accept_offer(self, buyer: str, offer_id: str,
                     at: int | None = None) -> tuple[int, TxOutcome]:
        """Accept at the targeted price when the buyer is in the deal
        channel, at the standard price otherwise. Custody always moves on
        the public channel; the negotiated price never does."""
        at = self._at(at)
        deal_channel = self.deal_channel_name(offer_id)
        try:
            targeted = buyer in self.membership.channel(deal_channel).members
        except LedgerError:
            targeted = False
        if targeted:
            private = self.transact(buyer, deal_channel, "accept_offer_terms",
                                    {"offer_id": offer_id, "at": at})
            if not private.valid:
                raise LedgerError("TX_NOT_VALID",
                                  f"private acceptance flagged {private.flag}")
            price = private.response["price"]
            public = self.transact(buyer, MAIN_CHANNEL, "complete_sale",
                                   {"offer_id": offer_id, "at": at})
            return price, public
        outcome = self.transact(buyer, MAIN_CHANNEL, "accept_offer",
                                {"offer_id": offer_id, "at": at})
        return outcome.response["price"], outcome

    def mark_recalled(self, auditor: str, report: RecallReport,
                      batch_ids: list[str]) -> TxOutcome:
        return self.transact(auditor, MAIN_CHANNEL, "mark_recalled", {
            "batch_ids": sorted(batch_ids),
            "report_affected": sorted(report.affected_batches),
            "origin": report.origin,
        })

    # -- read-only queries -----------------------------------------------------------

    def query_peer(self, channel: str = MAIN_CHANNEL) -> Peer:
        peer = self._any_member_peer(channel)
        if peer is None:
            raise LedgerError("UNKNOWN_CHANNEL", f"no peer holds {channel!r}")
        return peer

    def trace_back(self, batch_id: str) -> dict[str, Any]:
        peer = self.query_peer()
        return trace_back(peer.state(MAIN_CHANNEL), peer.index(MAIN_CHANNEL), batch_id)

    def trace_forward(self, origin: str) -> RecallReport:
        peer = self.query_peer()
        return trace_forward(peer.state(MAIN_CHANNEL), peer.index(MAIN_CHANNEL),
                             self.membership, origin, peer.height(MAIN_CHANNEL))

    def token_balance(self, farm_id: str) -> int:
        self.membership.get(farm_id)
        return self.query_peer().index(MAIN_CHANNEL).token_balance(farm_id)

    def token_entry(self, farm_id: str) -> dict[str, Any]:
        self.membership.get(farm_id)
        tokens = list(self.query_peer().index(MAIN_CHANNEL).tokens_by_farm.get(farm_id, ()))
        return {"farm_id": farm_id, "balance": len(tokens), "tokens": tokens}

    def encode_qr(self, batch_id: str) -> str:
        peer = self.query_peer()
        anchor = peer.index(MAIN_CHANNEL).batch_anchor.get(batch_id)
        if anchor is None:
            raise LedgerError("UNKNOWN_BATCH", batch_id)
        header = peer.ledger(MAIN_CHANNEL).blocks[anchor].header
        return format_payload(batch_id, anchor, header.hash())

    def verify_qr(self, payload: str) -> dict[str, Any] | None:
        """Full trace for a genuine payload; None when the digest does not
        match (INVALID). Grammar violations raise MALFORMED_PAYLOAD."""
        batch_id, block_no, digest = parse_payload(payload)
        peer = self.query_peer()
        ledger = peer.ledger(MAIN_CHANNEL)
        if block_no >= ledger.height():
            return None
        header = ledger.blocks[block_no].header
        if qr_digest(batch_id, header.hash()) != digest:
            return None
        if peer.state(MAIN_CHANNEL).get(f"trace:batch:{batch_id}") is None:
            return None
        return {"batch_id": batch_id, "trace": self.trace_back(batch_id)}

    # -- persistence --------------------------------------------------------------------

    def save_membership(self) -> None:
        if self.datadir is None:
            return
        os.makedirs(self.datadir, exist_ok=True)
        self.membership.save(os.path.join(self.datadir, MEMBERSHIP_FILE))
        with open(os.path.join(self.datadir, PEERS_FILE), "w", encoding="utf-8") as fh:
            json.dump(self.directory, fh, indent=2, sort_keys=True)
        with open(os.path.join(self.datadir, TOKENS_FILE), "w", encoding="utf-8") as fh:
            json.dump(self.tokens, fh, indent=2, sort_keys=True)

    def close(self) -> None:
        for peer in self.peers.values():
            peer.close()

    def _at(self, at: int | None) -> int:
        return self.clock() if at is None else at

    # -- bootstrap / load ------------------------------------------------------------------

    @classmethod
    def bootstrap(cls, config: dict[str, Any], datadir: str | None = None,
                  rng: random.Random | None = None,
                  clock: ClockMs = wall_clock_ms,
                  batch_size: int = 10, batch_timeout_ms: int = 500) -> "Network":
        """Build a network from a bootstrap document:

        ``{"identities": [{"display_name", "role", "token"?, "id"?}],
           "channels": [{"name", "members": [display names]}]}``

        Every non-consumer identity gets a peer named after its identity id.
        """
        net = cls(datadir=datadir, rng=rng, clock=clock,
                  batch_size=batch_size, batch_timeout_ms=batch_timeout_ms)
        for entry in config.get("identities", []):
            identity_id = net.add_identity(
                entry["display_name"], entry["role"],
                token=entry.get("token"), identity_id=entry.get("id"),
            )
            if entry["role"] != "CONSUMER":
                net.add_peer(identity_id, identity_id)
        net.open_main()
        for entry in config.get("channels", []):
            members = {net.membership.by_display_name(n).id for n in entry["members"]}
            net.create_channel(entry["name"], members)
        net.save_membership()
        return net

    @classmethod
    def load(cls, datadir: str, clock: ClockMs = wall_clock_ms,
             batch_size: int = 10, batch_timeout_ms: int = 500) -> "Network":
        """Rebuild a live network from persisted membership and ledger files
        by replaying every block through the normal commit path. Replay
        recomputes validity flags; a mismatch with the stored flags means
        the files and the commit rules disagree and is fatal."""
        membership = MembershipService.load(os.path.join(datadir, MEMBERSHIP_FILE))
        net = cls(membership=membership, clock=clock,
                  batch_size=batch_size, batch_timeout_ms=batch_timeout_ms)
        with open(os.path.join(datadir, PEERS_FILE), encoding="utf-8") as fh:
            directory: dict[str, str] = json.load(fh)
        tokens_path = os.path.join(datadir, TOKENS_FILE)
        if os.path.exists(tokens_path):
            with open(tokens_path, encoding="utf-8") as fh:
                net.tokens = json.load(fh)

        ledgers: dict[str, dict[str, list[Block]]] = {}
        for peer_id in sorted(directory):
            # peers replay without persistence, then re-attach their files
            net.add_peer(peer_id, directory[peer_id])
            ledgers[peer_id] = {}
            peer_dir = os.path.join(datadir, peer_id)
            if not os.path.isdir(peer_dir):
                continue
            for name in sorted(os.listdir(peer_dir)):
                if name.endswith(".ledger"):
                    channel = name[:-len(".ledger")]
                    ledgers[peer_id][channel] = read_ledger_file(
                        os.path.join(peer_dir, name), owner_peer=peer_id).blocks

        for peer_id, channels in ledgers.items():
            peer = net.peers[peer_id]
            for channel, blocks in channels.items():
                peer.join_channel(channel, blocks[0])
                for block in blocks[1:]:
                    flags = peer.validate_and_commit(
                        channel, block.with_validity([VALID] * len(block.envelopes)))
                    if tuple(flags) != block.validity:
                        raise LedgerError(
                            "DIVERGENCE",
                            f"replay flags differ on {channel!r} block "
                            f"{block.header.number}")
                peer.ledger(channel).path = os.path.join(
                    datadir, peer_id, f"{channel}.ledger")

        net.datadir = datadir
        net._main_open = True
        for peer in net.peers.values():
            peer.datadir = datadir

        seen_channels: set[str] = set()
        for peer_id, channels in ledgers.items():
            for channel, blocks in channels.items():
                if channel in seen_channels:
                    continue
                seen_channels.add(channel)
                seen_txs = {env.tx_id for block in blocks for env in block.envelopes}
                net.orderer.resume_channel(channel, len(blocks),
                                           blocks[-1].header.hash(), seen_txs)
                net._flags.setdefault(channel, {})
                for block in blocks:
                    for env, flag in zip(block.envelopes, block.validity):
                        net._flags[channel][env.tx_id] = flag
        return net
