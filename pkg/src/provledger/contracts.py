"""Dairy traceability contract operations.

Contract ops run only inside endorsement simulations: they read and write
through a :class:`TxContext` that records every state read (with version)
and every intended write, without mutating anything. All state they touch
lives in the world state; keys are namespaced ``<contract>:<kind>:<id>``.

Ops must be deterministic functions of (args, state, membership): no clocks,
no randomness. Timestamps and dates always arrive in the args.
"""

from __future__ import annotations

import re
import sys
from typing import Any, Callable

from .errors import ContractError
from .membership import MembershipService
from .statedb import StateDB, Version, WriteOp

ANIMAL_EVENT_KINDS = ("BIRTH", "VACCINATION", "MEDICINE", "LOCATION")
RAW_MILK = "RAW_MILK"
PROCESSED_PRODUCT = "PROCESSED_PRODUCT"
SETTLEMENTS = ("VIRTUAL_CURRENCY", "BANK_TRANSFER")
CUSTODY_ROLES = ("PROCESSOR", "TRANSPORTER", "SHOP")

_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


def animal_key(animal_id: str) -> str:
    return f"trace:animal:{animal_id}"


def batch_key(batch_id: str) -> str:
    return f"trace:batch:{batch_id}"


def edge_key(from_batch: str, to_batch: str) -> str:
    return f"trace:edge:{from_batch}:{to_batch}"


def token_key(farm_id: str, token: str) -> str:
    return f"trace:token:{farm_id}:{token}"


def transfer_key(token: str) -> str:
    return f"trace:transfer:{token}"


def offer_key(offer_id: str) -> str:
    return f"trace:offer:{offer_id}"


def acceptance_key(offer_id: str) -> str:
    return f"trace:acceptance:{offer_id}"


def deal_terms_key(offer_id: str) -> str:
    return f"deal:terms:{offer_id}"


def deal_acceptance_key(offer_id: str) -> str:
    return f"deal:acceptance:{offer_id}"


class TxContext:
    """Simulated execution context for one proposal on one peer.

    Reads go against the peer's committed state and are recorded with the
    version seen; writes are buffered (read-your-own-writes within the
    transaction) and become the endorsement's write set.
    """

    def __init__(self, state: StateDB, channel: str, creator: str,
                 membership: MembershipService, args: Any):
        self.channel = channel
        self.creator = creator
        self.membership = membership
        self.args = args
        self._state = state
        self._reads: dict[str, Version | None] = {}
        self._writes: dict[str, WriteOp] = {}

    def get(self, key: str) -> Any:
        if key in self._writes:
            w = self._writes[key]
            return None if w.delete else w.doc
        entry = self._state.get(key)
        if key not in self._reads:
            self._reads[key] = entry.version if entry is not None else None
        return entry.doc if entry is not None else None

    def put(self, key: str, doc: Any) -> None:
        # interned: the same key string recurs across endorsers and state
        key = sys.intern(key)
        self._writes[key] = WriteOp(key=key, doc=doc)

    def delete(self, key: str) -> None:
        key = sys.intern(key)
        self._writes[key] = WriteOp(key=key, delete=True)

    def read_set(self) -> tuple[tuple[str, Version | None], ...]:
        return tuple(self._reads.items())

    def write_set(self) -> tuple[WriteOp, ...]:
        return tuple(self._writes.values())

    # convenience used by most ops
    def role(self) -> str:
        return self.membership.role(self.creator)


ContractOp = Callable[[TxContext], Any]


def _require_id(value: Any, what: str) -> str:
    if not isinstance(value, str) or not _ID_RE.match(value):
        raise ContractError("BAD_ID", f"{what} must match [A-Za-z0-9_-]{{1,64}}: {value!r}")
    return value


def _require_role(ctx: TxContext, role: str) -> None:
    if ctx.role() != role:
        raise ContractError("WRONG_ROLE", f"{ctx.creator} has role {ctx.role()}, needs {role}")


def _get_batch(ctx: TxContext, batch_id: str) -> dict[str, Any]:
    doc = ctx.get(batch_key(batch_id))
    if doc is None:
        raise ContractError("UNKNOWN_BATCH", batch_id)
    return doc


def register_animal(ctx: TxContext) -> None:
    _require_role(ctx, "FARM")
    animal_id = _require_id(ctx.args.get("animal_id"), "animal_id")
    born_at = ctx.args.get("born_at", "")
    if ctx.get(animal_key(animal_id)) is not None:
        raise ContractError("DUPLICATE_ANIMAL", animal_id)
    ctx.put(animal_key(animal_id), {
        "animal_id": animal_id,
        "farm_id": ctx.creator,
        "born_at": born_at,
        "events": [{"kind": "BIRTH", "detail": "", "at": born_at}],
    })


def record_animal_event(ctx: TxContext) -> None:
    animal_id = _require_id(ctx.args.get("animal_id"), "animal_id")
    kind = ctx.args.get("kind")
    if kind == "BIRTH":
        raise ContractError("BIRTH_IMMUTABLE", "birth is recorded once, at registration")
    if kind not in ANIMAL_EVENT_KINDS:
        raise ContractError("BAD_EVENT_KIND", repr(kind))
    doc = ctx.get(animal_key(animal_id))
    if doc is None:
        raise ContractError("UNKNOWN_ANIMAL", animal_id)
    if doc["farm_id"] != ctx.creator:
        raise ContractError("NOT_OWNER", f"{animal_id} belongs to {doc['farm_id']}")
    at = ctx.args.get("at", "")
    events = doc["events"]
    if events and str(at) < str(events[-1]["at"]):
        raise ContractError("EVENT_OUT_OF_ORDER",
                            f"{at!r} precedes last event at {events[-1]['at']!r}")
    updated = dict(doc)
    updated["events"] = events + [{"kind": kind, "detail": ctx.args.get("detail", ""), "at": at}]
    ctx.put(animal_key(animal_id), updated)


def register_batch(ctx: TxContext) -> None:
    _require_role(ctx, "FARM")
    batch_id = _require_id(ctx.args.get("batch_id"), "batch_id")
    if ctx.get(batch_key(batch_id)) is not None:
        raise ContractError("DUPLICATE_BATCH", batch_id)
    source_animals = sorted(ctx.args.get("source_animals", []))
    for animal_id in source_animals:
        doc = ctx.get(animal_key(animal_id))
        if doc is None:
            raise ContractError("UNKNOWN_ANIMAL", animal_id)
        if doc["farm_id"] != ctx.creator:
            raise ContractError("NOT_OWNER", f"{animal_id} belongs to {doc['farm_id']}")
    at = ctx.args.get("at", 0)
    ctx.put(batch_key(batch_id), {
        "batch_id": batch_id,
        "kind": RAW_MILK,
        "owner": ctx.creator,
        "origin_farms": [ctx.creator],
        "source_animals": source_animals,
        "rfid": ctx.args.get("rfid", ""),
        "recalled": False,
        "custody": [[ctx.creator, at]],
    })


def process_batch(ctx: TxContext) -> dict[str, Any]:
    """Mint a processed batch from input batches.

    Credits one token per distinct origin farm to that farm's personal
    ledger and writes one transfer record per token: true-name source,
    anonymized receiver, token, product identifier.
    """
    _require_role(ctx, "PROCESSOR")
    output_id = _require_id(ctx.args.get("output_id"), "output_id")
    inputs = list(ctx.args.get("inputs", []))
    if not inputs:
        raise ContractError("EMPTY_INPUTS", "a processing step needs at least one input")
    if ctx.get(batch_key(output_id)) is not None:
        raise ContractError("DUPLICATE_BATCH", output_id)

    origin: set[str] = set()
    for input_id in inputs:
        doc = _get_batch(ctx, input_id)
        if doc["owner"] != ctx.creator:
            raise ContractError("NOT_CUSTODIAN", f"{input_id} held by {doc['owner']}")
        if doc["recalled"]:
            raise ContractError("INPUT_RECALLED", input_id)
        origin.update(doc["origin_farms"])

    at = ctx.args.get("at", 0)
    ctx.put(batch_key(output_id), {
        "batch_id": output_id,
        "kind": PROCESSED_PRODUCT,
        "owner": ctx.creator,
        "origin_farms": sorted(origin),
        "source_animals": [],
        "rfid": ctx.args.get("rfid", ""),
        "recalled": False,
        "custody": [[ctx.creator, at]],
    })
    for input_id in sorted(set(inputs)):
        ctx.put(edge_key(input_id, output_id), {
            "from": input_id,
            "to": output_id,
            "step_id": output_id,
        })

    # The receiver is the output's next custodian (the processor itself at
    # mint time), anonymized within the transaction's channel.
    source = ctx.membership.get(ctx.creator).display_name
    receiver = ctx.membership.pseudonym(ctx.creator, ctx.channel)
    records = []
    for farm_id in sorted(origin):
        token = f"tok:{output_id}:{farm_id}"
        ctx.put(token_key(farm_id, token), {
            "farm_id": farm_id,
            "token": token,
            "step_id": output_id,
        })
        record = {
            "source": source,
            "receiver": receiver,
            "token": token,
            "product_id": output_id,
        }
        ctx.put(transfer_key(token), record)
        records.append(record)
    return {"output_id": output_id, "origin_farms": sorted(origin),
            "transfer_records": records}


def transfer_custody(ctx: TxContext) -> None:
    batch_id = _require_id(ctx.args.get("batch_id"), "batch_id")
    doc = _get_batch(ctx, batch_id)
    if doc["owner"] != ctx.creator:
        raise ContractError("NOT_CUSTODIAN", f"{batch_id} held by {doc['owner']}")
    if doc["recalled"]:
        raise ContractError("BATCH_RECALLED", batch_id)
    to = ctx.args.get("to", "")
    if not ctx.membership.has(to) or ctx.membership.role(to) not in CUSTODY_ROLES:
        raise ContractError("BAD_RECIPIENT", f"{to!r} cannot take custody")
    updated = dict(doc)
    updated["owner"] = to
    updated["custody"] = doc["custody"] + [[to, ctx.args.get("at", 0)]]
    ctx.put(batch_key(batch_id), updated)


def publish_offer(ctx: TxContext) -> None:
    offer_id = _require_id(ctx.args.get("offer_id"), "offer_id")
    if ctx.get(offer_key(offer_id)) is not None:
        raise ContractError("DUPLICATE_OFFER", offer_id)
    product_id = _require_id(ctx.args.get("product_id"), "product_id")
    doc = _get_batch(ctx, product_id)
    if doc["owner"] != ctx.creator:
        raise ContractError("NOT_CUSTODIAN", f"{product_id} held by {doc['owner']}")
    if doc["recalled"]:
        raise ContractError("BATCH_RECALLED", product_id)
    price = ctx.args.get("standard_price")
    if not isinstance(price, int) or isinstance(price, bool) or price < 0:
        raise ContractError("BAD_PRICE", repr(price))
    settlement = ctx.args.get("settlement", "BANK_TRANSFER")
    if settlement not in SETTLEMENTS:
        raise ContractError("BAD_SETTLEMENT", repr(settlement))
    ctx.put(offer_key(offer_id), {
        "offer_id": offer_id,
        "seller": ctx.creator,
        "product_id": product_id,
        "standard_price": price,
        "settlement": settlement,
        "sold": False,
        "sold_to": None,
    })


def publish_offer_terms(ctx: TxContext) -> None:
    """Private half of an offer, written only on the deal channel: the
    per-buyer targeted prices."""
    offer_id = _require_id(ctx.args.get("offer_id"), "offer_id")
    if ctx.get(deal_terms_key(offer_id)) is not None:
        raise ContractError("DUPLICATE_OFFER", offer_id)
    targeted = []
    for buyer, price in ctx.args.get("targeted", []):
        if not ctx.membership.has(buyer):
            raise ContractError("UNKNOWN_MEMBER", buyer)
        if not isinstance(price, int) or isinstance(price, bool) or price < 0:
            raise ContractError("BAD_PRICE", repr(price))
        targeted.append([buyer, price])
    ctx.put(deal_terms_key(offer_id), {"offer_id": offer_id, "targeted": targeted})


def _complete_sale(ctx: TxContext, offer_id: str, record_price: bool) -> int:
    doc = ctx.get(offer_key(offer_id))
    if doc is None:
        raise ContractError("UNKNOWN_OFFER", offer_id)
    if doc["sold"]:
        raise ContractError("ALREADY_SOLD", offer_id)
    batch = _get_batch(ctx, doc["product_id"])
    if batch["owner"] != doc["seller"]:
        raise ContractError("NOT_CUSTODIAN", f"seller no longer holds {doc['product_id']}")
    if batch["recalled"]:
        raise ContractError("BATCH_RECALLED", doc["product_id"])
    at = ctx.args.get("at", 0)
    updated_offer = dict(doc)
    updated_offer["sold"] = True
    updated_offer["sold_to"] = ctx.creator
    ctx.put(offer_key(offer_id), updated_offer)
    updated_batch = dict(batch)
    updated_batch["owner"] = ctx.creator
    updated_batch["custody"] = batch["custody"] + [[ctx.creator, at]]
    ctx.put(batch_key(doc["product_id"]), updated_batch)
    acceptance: dict[str, Any] = {"offer_id": offer_id, "buyer": ctx.creator, "at": at}
    if record_price:
        acceptance["price"] = doc["standard_price"]
    ctx.put(acceptance_key(offer_id), acceptance)
    return doc["standard_price"]


def accept_offer(ctx: TxContext) -> dict[str, Any]:
    """Untargeted acceptance on the public channel, at the standard price."""
    offer_id = _require_id(ctx.args.get("offer_id"), "offer_id")
    price = _complete_sale(ctx, offer_id, record_price=True)
    return {"offer_id": offer_id, "price": price}


def complete_sale(ctx: TxContext) -> dict[str, Any]:
    """Public completion of a targeted deal: moves custody and marks the
    offer sold without disclosing the negotiated price."""
    offer_id = _require_id(ctx.args.get("offer_id"), "offer_id")
    _complete_sale(ctx, offer_id, record_price=False)
    return {"offer_id": offer_id}


def accept_offer_terms(ctx: TxContext) -> dict[str, Any]:
    """Private acceptance on the deal channel; returns the targeted price."""
    offer_id = _require_id(ctx.args.get("offer_id"), "offer_id")
    terms = ctx.get(deal_terms_key(offer_id))
    if terms is None:
        raise ContractError("UNKNOWN_OFFER", offer_id)
    if ctx.get(deal_acceptance_key(offer_id)) is not None:
        raise ContractError("ALREADY_SOLD", offer_id)
    price = None
    for buyer, targeted_price in terms["targeted"]:
        if buyer == ctx.creator:
            price = targeted_price
            break
    if price is None:
        raise ContractError("NOT_TARGETED", f"{ctx.creator} has no targeted price")
    ctx.put(deal_acceptance_key(offer_id), {
        "offer_id": offer_id,
        "buyer": ctx.creator,
        "price": price,
        "at": ctx.args.get("at", 0),
    })
    return {"offer_id": offer_id, "price": price}


def mark_recalled(ctx: TxContext) -> None:
    """Flag a chosen subset of a recall report's batches as recalled."""
    _require_role(ctx, "AUDITOR")
    affected = set(ctx.args.get("report_affected", []))
    batch_ids = list(ctx.args.get("batch_ids", []))
    for batch_id in batch_ids:
        if batch_id not in affected:
            raise ContractError("NOT_IN_REPORT", batch_id)
    for batch_id in sorted(set(batch_ids)):
        doc = _get_batch(ctx, batch_id)
        updated = dict(doc)
        updated["recalled"] = True
        ctx.put(batch_key(batch_id), updated)


def default_registry() -> dict[str, ContractOp]:
    """Operation table shared by every peer in a network."""
    return {
        "register_animal": register_animal,
        "record_animal_event": record_animal_event,
        "register_batch": register_batch,
        "process_batch": process_batch,
        "transfer_custody": transfer_custody,
        "publish_offer": publish_offer,
        "publish_offer_terms": publish_offer_terms,
        "accept_offer": accept_offer,
        "complete_sale": complete_sale,
        "accept_offer_terms": accept_offer_terms,
        "mark_recalled": mark_recalled,
    }
