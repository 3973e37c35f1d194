"""Scenario scripts: timed action lists plus a direct (synchronous) runner.

A scenario is a JSON-friendly list of timed actions. The same action
vocabulary drives both the virtual-time simulator and the direct runner
below; the direct runner executes against an in-process network with no
message modeling and commits between time groups, which is how large
workloads (and the recall benchmark) are loaded.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterator

from .chain import VALID
from .errors import ContractError, LedgerError
from .membership import MAIN_CHANNEL
from .network import Network

ADMIN_KINDS = ("identity", "channel")
QUERY_KINDS = ("trace_forward", "trace_back")


@dataclass
class Scenario:
    name: str
    actions: list[dict[str, Any]] = field(default_factory=list)

    def to_doc(self) -> dict[str, Any]:
        return {"name": self.name, "actions": self.actions}

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "Scenario":
        return cls(name=doc["name"], actions=list(doc["actions"]))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_doc(), fh)

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_doc(json.load(fh))


@dataclass
class TxStep:
    """One proposal to drive: (creator, channel, op, args)."""

    creator: str
    channel: str
    op: str
    args: dict[str, Any]


def apply_admin(net: Network, action: dict[str, Any]) -> None:
    kind = action["kind"]
    if kind == "identity":
        net.add_identity(action["display_name"], action["role"],
                         token=action.get("token"),
                         identity_id=action.get("id"),
                         with_peer=action.get("with_peer", False))
    elif kind == "channel":
        net.create_channel(action["name"], set(action["members"]))
    else:
        raise LedgerError("SCRIPT_ERROR", f"not an admin action: {kind}")


def tx_steps(net: Network, action: dict[str, Any]) -> list[TxStep]:
    """Translate one scripted action into its proposals.

    Offers create their deal channel (an administrative step) as a side
    effect; accepts consult membership to pick the targeted or standard
    path.
    """
    kind = action["kind"]
    at = action.get("at", 0)
    if kind == "animal":
        return [TxStep(action["farm"], MAIN_CHANNEL, "register_animal",
                       {"animal_id": action["animal_id"],
                        "born_at": action.get("born_at", "")})]
    if kind == "animal_event":
        return [TxStep(action["farm"], MAIN_CHANNEL, "record_animal_event",
                       {"animal_id": action["animal_id"],
                        "kind": action["event_kind"],
                        "detail": action.get("detail", ""),
                        "at": action.get("date", "")})]
    if kind == "batch":
        return [TxStep(action["farm"], MAIN_CHANNEL, "register_batch",
                       {"batch_id": action["batch_id"],
                        "source_animals": sorted(action.get("source_animals", [])),
                        "rfid": action.get("rfid", ""), "at": at})]
    if kind == "process":
        return [TxStep(action["processor"], MAIN_CHANNEL, "process_batch",
                       {"inputs": list(action["inputs"]),
                        "output_id": action["output_id"],
                        "process_kind": action.get("process_kind", ""), "at": at})]
    if kind == "transfer":
        return [TxStep(action["holder"], MAIN_CHANNEL, "transfer_custody",
                       {"batch_id": action["batch_id"], "to": action["to"],
                        "at": at})]
    if kind == "offer":
        steps = [TxStep(action["seller"], MAIN_CHANNEL, "publish_offer", {
            "offer_id": action["offer_id"],
            "product_id": action["product_id"],
            "standard_price": action["standard_price"],
            "settlement": action.get("settlement", "BANK_TRANSFER"),
        })]
        targeted = [list(t) for t in action.get("targeted", [])]
        if targeted:
            channel = net.deal_channel_name(action["offer_id"])
            members = {action["seller"], *[b for b, _ in targeted]}
            members.update(i.id for i in net.membership.identities()
                           if i.role == "ORDERER")
            net.create_channel(channel, members)
            steps.append(TxStep(action["seller"], channel, "publish_offer_terms",
                                {"offer_id": action["offer_id"],
                                 "targeted": targeted}))
        return steps
    if kind == "accept":
        offer_id = action["offer_id"]
        buyer = action["buyer"]
        deal = net.deal_channel_name(offer_id)
        try:
            targeted = buyer in net.membership.channel(deal).members
        except LedgerError:
            targeted = False
        if targeted:
            return [
                TxStep(buyer, deal, "accept_offer_terms",
                       {"offer_id": offer_id, "at": at}),
                TxStep(buyer, MAIN_CHANNEL, "complete_sale",
                       {"offer_id": offer_id, "at": at}),
            ]
        return [TxStep(buyer, MAIN_CHANNEL, "accept_offer",
                       {"offer_id": offer_id, "at": at})]
    if kind == "recall":
        report = net.trace_forward(action["origin"])
        return [TxStep(action["auditor"], MAIN_CHANNEL, "mark_recalled", {
            "batch_ids": sorted(action["batch_ids"]),
            "report_affected": sorted(report.affected_batches),
            "origin": action["origin"],
        })]
    raise LedgerError("SCRIPT_ERROR", f"unknown action kind {kind!r}")


def _time_groups(actions: list[dict[str, Any]]) -> Iterator[list[dict[str, Any]]]:
    group: list[dict[str, Any]] = []
    current: int | None = None
    for action in actions:
        at = action.get("at", 0)
        if current is not None and at != current:
            yield group
            group = []
        current = at
        group.append(action)
    if group:
        yield group


@dataclass
class DirectRunResult:
    committed: int = 0
    invalid: Counter = field(default_factory=Counter)
    queries: int = 0

    @property
    def total_ordered(self) -> int:
        return self.committed + sum(self.invalid.values())


def run_scenario_direct(net: Network, scenario: Scenario) -> DirectRunResult:
    """Execute a scenario synchronously: actions of one timestamp are
    endorsed and submitted together, then every touched channel is flushed
    before the next group. A contract refusal aborts the run (the script's
    preconditions are wrong)."""
    result = DirectRunResult()
    for group in _time_groups(scenario.actions):
        touched: dict[str, list[bytes]] = {}
        for action in group:
            kind = action["kind"]
            if kind in ADMIN_KINDS:
                apply_admin(net, action)
                continue
            if kind in QUERY_KINDS:
                if kind == "trace_forward":
                    net.trace_forward(action["origin"])
                else:
                    net.trace_back(action["batch_id"])
                result.queries += 1
                continue
            for step in tx_steps(net, action):
                proposal = net.build_proposal(step.creator, step.channel,
                                              step.op, step.args)
                try:
                    tx_id, _ = net.submit_proposal(proposal)
                except ContractError as err:
                    raise LedgerError(
                        "SCRIPT_ERROR",
                        f"{kind} at t={action.get('at', 0)} refused: {err.code}",
                    ) from err
                touched.setdefault(step.channel, []).append(tx_id)
        for channel, tx_ids in touched.items():
            net.flush(channel)
            for tx_id in tx_ids:
                flag = net.flag_of(channel, tx_id)
                if flag == VALID:
                    result.committed += 1
                else:
                    result.invalid[flag] += 1
    return result
