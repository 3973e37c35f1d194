"""HTTP facade over a running network.

Every mutating endpoint builds a proposal for the bearer token's identity,
drives the full endorse/order/commit round synchronously, and answers with
the transaction id and its validity flag. Read endpoints answer from
committed state. QR verification is unauthenticated; everything else that
mutates requires a bearer token from the bootstrap table.

The gateway never widens permissions: its role guards mirror the contract
layer's own preconditions, so any request rejected here would also be
refused by a contract op or flagged at commit.
"""

from __future__ import annotations

import os
from typing import Any

from fastapi import Body, FastAPI, Header, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import ContractError, LedgerError
from .membership import MAIN_CHANNEL
from .network import Network, TxOutcome

_STATUS_BY_CODE = {
    "UNKNOWN_IDENTITY": 404, "UNKNOWN_ANIMAL": 404, "UNKNOWN_BATCH": 404,
    "UNKNOWN_OFFER": 404, "UNKNOWN_ORIGIN": 404, "UNKNOWN_CHANNEL": 404,
    "UNKNOWN_OP": 404, "UNKNOWN_TX": 404, "UNKNOWN_MEMBER": 404,
    "DUPLICATE_ANIMAL": 409, "DUPLICATE_BATCH": 409, "DUPLICATE_OFFER": 409,
    "DUPLICATE_CHANNEL": 409, "ALREADY_SOLD": 409, "BATCH_RECALLED": 409,
    "INPUT_RECALLED": 409, "VERSION_REGRESSION": 409, "TX_NOT_VALID": 409,
    "WRONG_ROLE": 403, "NOT_OWNER": 403, "NOT_CUSTODIAN": 403,
    "NOT_IN_REPORT": 403, "NOT_TARGETED": 403, "NOT_A_MEMBER": 403,
    "NOT_AN_ENDORSER": 403, "UNAUTHORIZED": 403,
    "MALFORMED_PAYLOAD": 400, "MALFORMED_SELECTOR": 400, "BAD_ID": 400,
    "BAD_PRICE": 400, "BAD_SETTLEMENT": 400, "BAD_EVENT_KIND": 400,
    "BAD_RECIPIENT": 422, "BIRTH_IMMUTABLE": 422, "EVENT_OUT_OF_ORDER": 422,
    "EMPTY_INPUTS": 422,
}


def jsonify(value: Any) -> Any:
    """Make a domain document JSON-safe (bytes become hex strings)."""
    if isinstance(value, (bytes, bytearray)):
        return value.hex()
    if isinstance(value, dict):
        return {k: jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonify(v) for v in value]
    if isinstance(value, set):
        return sorted(jsonify(v) for v in value)
    return value


def _outcome_doc(outcome: TxOutcome) -> dict[str, Any]:
    return {"tx_id": outcome.tx_id.hex(), "validity": outcome.flag}


def create_app(net: Network, console_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="provledger gateway", docs_url=None, redoc_url=None)
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.exception_handler(LedgerError)
    async def _ledger_error(_request: Request, err: LedgerError) -> JSONResponse:
        status = _STATUS_BY_CODE.get(err.code, 400)
        return JSONResponse(status_code=status,
                            content={"error": err.code, "detail": err.detail})

    def actor(authorization: str | None) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401,
                                detail={"error": "NO_TOKEN", "detail": "bearer token required"})
        token = authorization.removeprefix("Bearer ").strip()
        identity_id = net.tokens.get(token)
        if identity_id is None:
            raise HTTPException(status_code=401,
                                detail={"error": "BAD_TOKEN", "detail": "unknown token"})
        return identity_id

    def require_role(identity_id: str, role: str) -> None:
        if net.membership.role(identity_id) != role:
            raise HTTPException(status_code=403,
                                detail={"error": "WRONG_ROLE",
                                        "detail": f"requires role {role}"})

    def field(body: dict, name: str) -> Any:
        if name not in body:
            raise HTTPException(status_code=400,
                                detail={"error": "MISSING_FIELD", "detail": name})
        return body[name]

    # -- mutations -------------------------------------------------------------

    @app.post("/animals")
    def post_animal(body: dict = Body(...),
                    authorization: str | None = Header(default=None)):
        farm = actor(authorization)
        require_role(farm, "FARM")
        outcome = net.register_animal(farm, field(body, "animal_id"),
                                      field(body, "born_at"))
        return _outcome_doc(outcome)

    @app.post("/animals/{animal_id}/events")
    def post_animal_event(animal_id: str, body: dict = Body(...),
                          authorization: str | None = Header(default=None)):
        farm = actor(authorization)
        require_role(farm, "FARM")
        outcome = net.record_animal_event(farm, animal_id, field(body, "kind"),
                                          body.get("detail", ""), field(body, "at"))
        return _outcome_doc(outcome)

    @app.post("/batches")
    def post_batch(body: dict = Body(...),
                   authorization: str | None = Header(default=None)):
        farm = actor(authorization)
        require_role(farm, "FARM")
        outcome = net.register_batch(farm, field(body, "batch_id"),
                                     body.get("source_animals", []),
                                     body.get("rfid", ""))
        return _outcome_doc(outcome)

    @app.post("/process")
    def post_process(body: dict = Body(...),
                     authorization: str | None = Header(default=None)):
        processor = actor(authorization)
        require_role(processor, "PROCESSOR")
        outcome = net.process_batch(processor, field(body, "inputs"),
                                    field(body, "output_id"),
                                    body.get("process_kind", ""))
        doc = _outcome_doc(outcome)
        doc["result"] = jsonify(outcome.response)
        return doc

    @app.post("/transfers")
    def post_transfer(body: dict = Body(...),
                      authorization: str | None = Header(default=None)):
        holder = actor(authorization)
        outcome = net.transfer_custody(holder, field(body, "batch_id"),
                                       field(body, "to"))
        return _outcome_doc(outcome)

    @app.post("/offers")
    def post_offer(body: dict = Body(...),
                   authorization: str | None = Header(default=None)):
        seller = actor(authorization)
        offer = net.publish_offer(
            seller,
            field(body, "product_id"),
            field(body, "standard_price"),
            targeted=[tuple(t) for t in body.get("targeted", [])],
            settlement=body.get("settlement", "BANK_TRANSFER"),
            offer_id=body.get("offer_id"),
        )
        return jsonify(offer)

    @app.post("/offers/{offer_id}/accept")
    def post_accept(offer_id: str, authorization: str | None = Header(default=None)):
        buyer = actor(authorization)
        if not net.membership.authorize(buyer, MAIN_CHANNEL):
            raise HTTPException(status_code=403,
                                detail={"error": "NOT_A_MEMBER",
                                        "detail": "buyer must be a main member"})
        price, outcome = net.accept_offer(buyer, offer_id)
        doc = _outcome_doc(outcome)
        doc["price"] = price
        return doc

    @app.post("/recalls")
    def post_recall(body: dict = Body(...),
                    authorization: str | None = Header(default=None)):
        auditor = actor(authorization)
        require_role(auditor, "AUDITOR")
        report = net.trace_forward(field(body, "origin"))
        outcome = net.mark_recalled(auditor, report, field(body, "batch_ids"))
        doc = _outcome_doc(outcome)
        doc["report"] = jsonify(report.to_doc())
        return doc

    # -- reads ----------------------------------------------------------------

    @app.get("/trace/back/{batch_id}")
    def get_trace_back(batch_id: str):
        return jsonify(net.trace_back(batch_id))

    @app.get("/trace/forward/{origin}")
    def get_trace_forward(origin: str):
        return jsonify(net.trace_forward(origin).to_doc())

    @app.get("/tokens/{farm_id}")
    def get_tokens(farm_id: str):
        return jsonify(net.token_entry(farm_id))

    @app.get("/qr/{payload:path}")
    def get_qr(payload: str):
        result = net.verify_qr(payload)
        if result is None:
            return JSONResponse(status_code=422,
                                content={"error": "INVALID",
                                         "detail": "digest mismatch"})
        return jsonify(result)

    @app.get("/offers/{offer_id}")
    def get_offer(offer_id: str):
        entry = net.query_peer().state(MAIN_CHANNEL).get(f"trace:offer:{offer_id}")
        if entry is None:
            raise LedgerError("UNKNOWN_OFFER", offer_id)
        return jsonify(entry.doc)

    @app.get("/batches/{batch_id}")
    def get_batch(batch_id: str):
        entry = net.query_peer().state(MAIN_CHANNEL).get(f"trace:batch:{batch_id}")
        if entry is None:
            raise LedgerError("UNKNOWN_BATCH", batch_id)
        return jsonify(entry.doc)

    @app.get("/ledger/{channel}/blocks/{number}")
    def get_block(channel: str, number: int):
        peer = net.query_peer(channel)
        ledger = peer.ledger(channel)
        if number < 0 or number >= ledger.height():
            raise LedgerError("UNKNOWN_TX", f"no block {number} on {channel!r}")
        return jsonify(ledger.blocks[number].to_doc())

    @app.get("/health")
    def get_health():
        return {"status": "ok",
                "channels": net.orderer.channels(),
                "peers": sorted(net.peers)}

    @app.get("/whoami")
    def get_whoami(authorization: str | None = Header(default=None)):
        identity = net.membership.get(actor(authorization))
        return {"id": identity.id, "display_name": identity.display_name,
                "role": identity.role}

    if console_dir and os.path.isdir(console_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console_dir, html=True),
                  name="console")

    return app
