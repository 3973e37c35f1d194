"""Typed errors with stable machine-readable codes.

Every refusal surfaced to callers (and over the HTTP gateway) carries one of
these codes, so tests and clients can match on the code rather than on
message text.
"""

from __future__ import annotations


class LedgerError(Exception):
    """Base error: a stable ``code`` plus a human-readable detail string."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class ContractError(LedgerError):
    """Typed refusal raised by a contract operation during simulation.

    Refusals surface at endorsement time and never reach the orderer.
    """
