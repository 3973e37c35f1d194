"""Deterministic virtual-time simulation of the peer network.

All message traffic (proposal delivery, endorsement replies, envelope
submission, block delivery, trace queries) moves through an event queue on a
virtual clock, with per-link latency and a uniform drop probability. A
dropped send is retried on a fixed 100 ms backoff up to 10 attempts and then
abandoned. The whole trace is a pure function of (config, scenario): one
seeded generator feeds nonces, drops, and nothing else.
"""

from __future__ import annotations

import heapq
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable

from .chain import VALID, Block
from .errors import ContractError, LedgerError
from .membership import MAIN_CHANNEL
from .network import Network
from .scenario import ADMIN_KINDS, QUERY_KINDS, Scenario, apply_admin, tx_steps
from .txflow import assemble
from .wire import Endorsement, Proposal

RETRY_BACKOFF_MS = 100
MAX_SEND_ATTEMPTS = 10


@dataclass
class SimPeer:
    peer: str
    identity: str
    role: str
    display_name: str | None = None

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "SimPeer":
        return cls(peer=doc["peer"], identity=doc["identity"], role=doc["role"],
                   display_name=doc.get("display_name"))


@dataclass
class SimConfig:
    peers: list[SimPeer]
    default_latency_ms: int = 0
    links: dict[tuple[str, str], int] = field(default_factory=dict)
    drop_probability: float = 0.0
    rng_seed: int = 0
    batch_size: int = 10
    batch_timeout_ms: int = 500

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "SimConfig":
        links = {(l["from"], l["to"]): l["ms"] for l in doc.get("links", [])}
        return cls(
            peers=[SimPeer.from_doc(p) for p in doc["peers"]],
            default_latency_ms=doc.get("default_latency_ms", 0),
            links=links,
            drop_probability=doc.get("drop_probability", 0.0),
            rng_seed=doc.get("rng_seed", 0),
            batch_size=doc.get("batch_size", 10),
            batch_timeout_ms=doc.get("batch_timeout_ms", 500),
        )


@dataclass
class Metrics:
    committed_tx: int = 0
    invalid_tx: dict[str, int] = field(default_factory=dict)
    commit_latency_ms: dict[str, int] = field(default_factory=dict)
    recall_trace_latency_ms: list[int] = field(default_factory=list)
    refused: dict[str, int] = field(default_factory=dict)
    undelivered_messages: int = 0
    total_ordered: int = 0
    end_to_end_wallclock_ms: int = 0

    def to_doc(self) -> dict[str, Any]:
        return {
            "committed_tx": self.committed_tx,
            "invalid_tx": dict(sorted(self.invalid_tx.items())),
            "commit_latency_ms": self.commit_latency_ms,
            "recall_trace_latency_ms": list(self.recall_trace_latency_ms),
            "refused": dict(sorted(self.refused.items())),
            "undelivered_messages": self.undelivered_messages,
            "total_ordered": self.total_ordered,
            "end_to_end_wallclock_ms": self.end_to_end_wallclock_ms,
        }


def _percentiles(samples: list[int]) -> dict[str, int]:
    if not samples:
        return {"p50": 0, "p95": 0, "max": 0}
    ordered = sorted(samples)
    rank = lambda q: ordered[min(len(ordered) - 1, int(q * len(ordered)))]
    return {"p50": rank(0.50), "p95": rank(0.95), "max": ordered[-1]}


class SimNetwork:
    """Peers, orderer, and membership on a virtual clock."""

    CLIENT = "__client__"
    ORDERER_NODE = "__orderer__"

    def __init__(self, config: SimConfig):
        _validate_config(config)
        self.config = config
        self.now = 0
        self._seq = 0
        self._events: list[tuple[int, int, Callable[[], None]]] = []
        self.rng = random.Random(config.rng_seed)
        self.net = Network(
            rng=self.rng,
            clock=lambda: self.now,
            batch_size=config.batch_size,
            batch_timeout_ms=config.batch_timeout_ms,
        )
        for entry in config.peers:
            self.net.add_identity(entry.display_name or f"Peer {entry.identity}",
                                  entry.role, identity_id=entry.identity)
            self.net.add_peer(entry.peer, entry.identity)
        self.net.open_main()
        self.undelivered = 0
        # per (peer, channel): blocks waiting for their predecessors
        self._reorder: dict[tuple[str, str], dict[int, Block]] = {}
        self._recorded_blocks: set[tuple[str, int]] = set()
        self._dispatch_time: dict[bytes, int] = {}
        self._latencies: list[int] = []

    # -- event machinery -------------------------------------------------------

    def schedule(self, delay_ms: int, fn: Callable[[], None]) -> None:
        self._seq += 1
        heapq.heappush(self._events, (self.now + delay_ms, self._seq, fn))

    def latency(self, src: str, dst: str) -> int:
        return self.config.links.get((src, dst), self.config.default_latency_ms)

    def send(self, src: str, dst: str, fn: Callable[[], None]) -> None:
        """Deliver after link latency; lost sends retry on a fixed backoff up
        to the attempt cap, then the message is abandoned."""
        for attempt in range(MAX_SEND_ATTEMPTS):
            if self.rng.random() >= self.config.drop_probability:
                self.schedule(attempt * RETRY_BACKOFF_MS + self.latency(src, dst), fn)
                return
        self.undelivered += 1

    def run(self) -> None:
        while self._events:
            when, _, fn = heapq.heappop(self._events)
            self.now = max(self.now, when)
            fn()

    # -- block distribution ------------------------------------------------------

    def node_of(self, identity_id: str) -> str:
        for peer in self.net.peers.values():
            if peer.identity_id == identity_id:
                return peer.id
        return self.CLIENT

    def pump_orderer(self, channel: str, metrics: Metrics) -> None:
        while True:
            block = self.net.orderer.cut_block(channel)
            if block is None:
                break
            metrics.total_ordered += len(block.envelopes)
            for peer in self.net.member_peers(channel):
                self.send(self.ORDERER_NODE, peer.id,
                          self._receiver(peer.id, channel, block, metrics))
        if self.net.orderer.pending_count(channel):
            self.schedule(self.config.batch_timeout_ms + 1,
                          lambda: self.pump_orderer(channel, metrics))

    def _receiver(self, peer_id: str, channel: str, block: Block,
                  metrics: Metrics) -> Callable[[], None]:
        def deliver() -> None:
            peer = self.net.peers[peer_id]
            waiting = self._reorder.setdefault((peer_id, channel), {})
            waiting[block.header.number] = block
            while peer.height(channel) in waiting:
                ready = waiting.pop(peer.height(channel))
                flags = self.net.commit_on_peer(peer, channel, ready)
                self._record_commit(channel, ready, flags, metrics)

        return deliver

    def _record_commit(self, channel: str, block: Block, flags: list[str],
                       metrics: Metrics) -> None:
        key = (channel, block.header.number)
        if key in self._recorded_blocks:
            return
        self._recorded_blocks.add(key)
        for envelope, flag in zip(block.envelopes, flags):
            if flag == VALID:
                metrics.committed_tx += 1
            else:
                metrics.invalid_tx[flag] = metrics.invalid_tx.get(flag, 0) + 1
            dispatched = self._dispatch_time.pop(envelope.tx_id, None)
            if dispatched is not None:
                self._latencies.append(self.now - dispatched)

    # -- scenario driving -----------------------------------------------------------

    def run_scenario(self, scenario: Scenario) -> Metrics:
        metrics = Metrics()
        self._dispatch_time = {}
        self._latencies = []
        refusals: Counter = Counter()
        started = time.perf_counter()
        for action in scenario.actions:
            self.schedule(max(0, action.get("at", 0) - self.now),
                          self._action_handler(action, metrics, refusals))
        self.run()
        metrics.undelivered_messages = self.undelivered
        metrics.commit_latency_ms = _percentiles(self._latencies)
        metrics.refused = dict(refusals)
        metrics.end_to_end_wallclock_ms = int((time.perf_counter() - started) * 1000)
        if refusals and self.config.drop_probability == 0:
            code, _ = next(iter(sorted(refusals.items())))
            raise LedgerError("SCRIPT_ERROR",
                              f"refusals under zero loss, first: {code}")
        return metrics

    def _action_handler(self, action: dict[str, Any], metrics: Metrics,
                        refusals: Counter) -> Callable[[], None]:
        def handle() -> None:
            kind = action["kind"]
            if kind in ADMIN_KINDS:
                apply_admin(self.net, action)
                return
            if kind in QUERY_KINDS:
                self._run_query(action, metrics)
                return
            try:
                steps = tx_steps(self.net, action)
            except ContractError as err:
                refusals[err.code] += 1
                return
            for step in steps:
                self._dispatch_tx(step, metrics, refusals)

        return handle

    def _run_query(self, action: dict[str, Any], metrics: Metrics) -> None:
        """Trace queries travel to a peer and back; the answer is computed
        against that peer's committed state."""
        peer = self.net.query_peer()
        asked = self.now

        def respond() -> None:
            if action["kind"] == "trace_forward":
                self.net.trace_forward(action["origin"])
            else:
                self.net.trace_back(action["batch_id"])
            self.send(peer.id, self.CLIENT,
                      lambda: metrics.recall_trace_latency_ms.append(self.now - asked))

        self.send(self.CLIENT, peer.id, respond)

    def _dispatch_tx(self, step, metrics: Metrics, refusals: Counter) -> None:
        proposal = self.net.build_proposal(step.creator, step.channel,
                                           step.op, step.args)
        tx_id = proposal.tx_id()
        self._dispatch_time[tx_id] = self.now
        source = self.node_of(step.creator)
        expected = len(proposal.endorser_peers)
        collected: list[Endorsement] = []
        state = {"refused": False}

        def on_reply(reply: Endorsement | ContractError) -> None:
            if isinstance(reply, ContractError):
                if not state["refused"]:
                    state["refused"] = True
                    refusals[reply.code] += 1
                return
            collected.append(reply)
            if state["refused"] or len(collected) != expected:
                return
            try:
                envelope = assemble(proposal, collected, self.net.membership,
                                    self.net.directory)
            except LedgerError as err:
                refusals[err.code] += 1
                return
            self.send(source, self.ORDERER_NODE,
                      lambda: self._submit(envelope, metrics))

        for peer_id in proposal.endorser_peers:
            self.send(source, peer_id,
                      self._endorser(peer_id, proposal, source, on_reply))

    def _endorser(self, peer_id: str, proposal: Proposal, source: str,
                  on_reply) -> Callable[[], None]:
        def endorse() -> None:
            peer = self.net.peers[peer_id]
            try:
                reply: Endorsement | ContractError = peer.endorse(proposal)
            except ContractError as err:
                reply = err
            self.send(peer_id, source, lambda: on_reply(reply))

        return endorse

    def _submit(self, envelope, metrics: Metrics) -> None:
        channel = envelope.proposal.channel
        self.net.orderer.submit(envelope)
        self.pump_orderer(channel, metrics)


def _validate_config(config: SimConfig) -> None:
    seen = set()
    for entry in config.peers:
        if entry.peer in seen:
            raise LedgerError("BAD_CONFIG", f"duplicate peer id {entry.peer!r}")
        seen.add(entry.peer)
    if not 0.0 <= config.drop_probability <= 1.0:
        raise LedgerError("BAD_CONFIG", "drop_probability outside [0, 1]")
    if config.batch_size < 1 or config.batch_timeout_ms < 1:
        raise LedgerError("BAD_CONFIG", "batch parameters must be positive")


def build_network(config: SimConfig) -> SimNetwork:
    """Bootstrap a simulated network: peers registered, public channel open."""
    return SimNetwork(config)


def run_scenario(sim: SimNetwork, scenario: Scenario) -> Metrics:
    return sim.run_scenario(scenario)
