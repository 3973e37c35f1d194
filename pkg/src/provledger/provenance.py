"""Provenance DAG index and trace/recall queries.

The index is an in-memory adjacency structure fed by the commit path (and
therefore rebuilt for free on replay); it exists so trace-back and
trace-forward run as graph traversals instead of state scans. Queries read
committed state directly: they never pass through endorsement.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any

from .chain import VALID, Block
from .errors import LedgerError
from .membership import MembershipService
from .statedb import StateDB
from . import contracts


@dataclass
class RecallReport:
    """The blast radius of a contamination origin at a ledger height."""

    origin: str
    affected_batches: set[str]
    holders: dict[str, str]
    generated_at_height: int

    def to_doc(self) -> dict[str, Any]:
        return {
            "origin": self.origin,
            "affected_batches": sorted(self.affected_batches),
            "holders": {b: self.holders[b] for b in sorted(self.holders)},
            "generated_at_height": self.generated_at_height,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "RecallReport":
        return cls(
            origin=doc["origin"],
            affected_batches=set(doc["affected_batches"]),
            holders=dict(doc["holders"]),
            generated_at_height=doc["generated_at_height"],
        )


@dataclass
class ProvenanceIndex:
    """Adjacency over batches plus the token and anchor bookkeeping that the
    commit path maintains for each channel."""

    forward: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    backward: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    raw_by_farm: dict[str, list[str]] = field(default_factory=dict)
    tokens_by_farm: dict[str, list[str]] = field(default_factory=dict)
    batch_anchor: dict[str, int] = field(default_factory=dict)

    def observe_block(self, block: Block) -> None:
        """Fold one committed block's valid write sets into the index."""
        for env, flag in zip(block.envelopes, block.validity):
            if flag != VALID or not env.endorsements:
                continue
            for write in env.endorsements[0].write_set:
                if write.delete:
                    continue
                self._observe_write(write.key, write.doc, block.header.number)

    def _observe_write(self, key: str, doc: Any, block_no: int) -> None:
        if key.startswith("trace:edge:"):
            self.forward.setdefault(doc["from"], []).append((doc["to"], doc["step_id"]))
            self.backward.setdefault(doc["to"], []).append((doc["from"], doc["step_id"]))
        elif key.startswith("trace:batch:"):
            batch_id = doc["batch_id"]
            if batch_id not in self.batch_anchor and doc["kind"] == contracts.RAW_MILK:
                self.raw_by_farm.setdefault(doc["origin_farms"][0], []).append(batch_id)
            self.batch_anchor[batch_id] = block_no
        elif key.startswith("trace:token:"):
            self.tokens_by_farm.setdefault(doc["farm_id"], []).append(doc["token"])

    def token_balance(self, farm_id: str) -> int:
        return len(self.tokens_by_farm.get(farm_id, ()))


def trace_back(state: StateDB, index: ProvenanceIndex, batch_id: str) -> dict[str, Any]:
    """Backward reachability from a batch to its raw-milk registrars.

    Returns the origin farms, every derived-from edge on a backward path,
    and the animal event history of each reachable raw-milk batch.
    """
    if state.get(contracts.batch_key(batch_id)) is None:
        raise LedgerError("UNKNOWN_BATCH", batch_id)
    visited = {batch_id}
    queue = deque([batch_id])
    edges: list[dict[str, str]] = []
    origin_farms: set[str] = set()
    animal_events: dict[str, Any] = {}
    while queue:
        current = queue.popleft()
        doc = state.get(contracts.batch_key(current)).doc
        if doc["kind"] == contracts.RAW_MILK:
            origin_farms.update(doc["origin_farms"])
            events = {}
            for animal_id in doc["source_animals"]:
                animal = state.get(contracts.animal_key(animal_id))
                if animal is not None:
                    events[animal_id] = animal.doc["events"]
            if events:
                animal_events[current] = events
        for parent, step_id in index.backward.get(current, ()):
            edges.append({"from": parent, "to": current, "step_id": step_id})
            if parent not in visited:
                visited.add(parent)
                queue.append(parent)
    edges.sort(key=lambda e: (e["from"], e["to"]))
    return {
        "batch_id": batch_id,
        "origin_farms": origin_farms,
        "tree": edges,
        "animal_events": animal_events,
    }


def trace_forward(state: StateDB, index: ProvenanceIndex,
                  membership: MembershipService, origin: str,
                  height: int) -> RecallReport:
    """Forward reachability from a farm or batch: the exact set of batches
    derived from it, with each batch's current holder."""
    if membership.has(origin) and membership.role(origin) == "FARM":
        seeds = list(index.raw_by_farm.get(origin, ()))
    elif state.get(contracts.batch_key(origin)) is not None:
        seeds = [origin]
    else:
        raise LedgerError("UNKNOWN_ORIGIN", origin)
    affected = set(seeds)
    queue = deque(seeds)
    while queue:
        current = queue.popleft()
        for child, _step in index.forward.get(current, ()):
            if child not in affected:
                affected.add(child)
                queue.append(child)
    holders = {}
    for batch_id in affected:
        entry = state.get(contracts.batch_key(batch_id))
        holders[batch_id] = entry.doc["owner"]
    return RecallReport(
        origin=origin,
        affected_batches=affected,
        holders=holders,
        generated_at_height=height,
    )
