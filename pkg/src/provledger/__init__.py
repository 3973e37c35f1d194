"""ProvLedger: a permissioned-ledger engine for dairy supply-chain
traceability, with an endorse/order/validate transaction lifecycle,
confidential deal channels, provenance tracing, recall reports, token
crediting, and tamper-evident QR payloads."""

from .chain import (BAD_ENDORSEMENT, MVCC_CONFLICT, UNAUTHORIZED, VALID,
                    Block, BlockHeader, ChainReport, Ledger, build_block,
                    merkle_root, verify_chain)
from .codec import decode, encode, hash_payload, hash_value
from .errors import ContractError, LedgerError
from .membership import Channel, Identity, MembershipService
from .network import Network, TxOutcome
from .provenance import ProvenanceIndex, RecallReport, trace_back, trace_forward
from .statedb import Selector, StateDB, StateEntry, Version, WriteOp
from .txflow import Orderer, Peer, assemble, make_genesis
from .wire import Endorsement, Envelope, Proposal

__version__ = "0.1.0"

__all__ = [
    "BAD_ENDORSEMENT", "MVCC_CONFLICT", "UNAUTHORIZED", "VALID",
    "Block", "BlockHeader", "ChainReport", "Channel", "ContractError",
    "Endorsement", "Envelope", "Identity", "Ledger", "LedgerError",
    "MembershipService", "Network", "Orderer", "Peer", "Proposal",
    "ProvenanceIndex", "RecallReport", "Selector", "StateDB", "StateEntry",
    "TxOutcome", "Version", "WriteOp", "assemble", "build_block", "decode",
    "encode", "hash_payload", "hash_value", "make_genesis", "merkle_root",
    "trace_back", "trace_forward", "verify_chain",
]
