"""Identities, roles, channels, and receiver anonymization.

The membership service is the authority every signature check goes through:
signatures are keyed digests under a per-identity secret, so verifying one
requires looking the identity up here. Channels scope confidentiality; each
carries a random salt that domain-separates the pseudonyms used to anonymize
receivers on that channel.
"""

from __future__ import annotations

import hmac
import json
import os
import random
import threading
from dataclasses import dataclass, field

from . import codec
from .errors import LedgerError

ROLES = ("FARM", "PROCESSOR", "TRANSPORTER", "BANK", "SHOP", "CONSUMER", "AUDITOR", "ORDERER")
MAIN_CHANNEL = "main"


@dataclass
class Identity:
    id: str
    display_name: str
    role: str
    secret_key: bytes = field(repr=False)
    channels: set[str] = field(default_factory=set)


@dataclass
class Channel:
    name: str
    members: set[str]
    salt: bytes = field(repr=False)


class MembershipService:
    """Registry of identities and channels.

    Registrations and channel creations are serialized; lookups are plain
    dict reads. Secret keys and channel salts never enter ledger content;
    they persist only in the service's own JSON file.
    """

    def __init__(self, rng: random.Random | None = None):
        self._rng = rng or random.Random()
        self._lock = threading.Lock()
        self._identities: dict[str, Identity] = {}
        self._channels: dict[str, Channel] = {}
        self._counter = 0
        self._channels[MAIN_CHANNEL] = Channel(
            name=MAIN_CHANNEL, members=set(), salt=self._rng.randbytes(16)
        )

    # -- identities ---------------------------------------------------------

    def register_identity(self, display_name: str, role: str,
                          identity_id: str | None = None) -> Identity:
        """Register a participant; non-consumers auto-join the main channel."""
        if not display_name:
            raise LedgerError("UNKNOWN_IDENTITY", "display_name must be nonempty")
        if role not in ROLES:
            raise LedgerError("UNKNOWN_IDENTITY", f"unknown role {role!r}")
        with self._lock:
            if identity_id is None:
                self._counter += 1
                identity_id = f"{role.lower()}-{self._counter:04d}"
            if identity_id in self._identities:
                raise LedgerError("UNKNOWN_IDENTITY", f"identity id {identity_id!r} taken")
            identity = Identity(
                id=identity_id,
                display_name=display_name,
                role=role,
                secret_key=self._rng.randbytes(32),
            )
            self._identities[identity.id] = identity
            if role != "CONSUMER":
                self._channels[MAIN_CHANNEL].members.add(identity.id)
                identity.channels.add(MAIN_CHANNEL)
        return identity

    def get(self, identity_id: str) -> Identity:
        identity = self._identities.get(identity_id)
        if identity is None:
            raise LedgerError("UNKNOWN_IDENTITY", identity_id)
        return identity

    def has(self, identity_id: str) -> bool:
        return identity_id in self._identities

    def identities(self) -> list[Identity]:
        return list(self._identities.values())

    def by_display_name(self, display_name: str) -> Identity:
        hits = [i for i in self._identities.values() if i.display_name == display_name]
        if len(hits) != 1:
            raise LedgerError("UNKNOWN_IDENTITY",
                              f"{len(hits)} identities named {display_name!r}")
        return hits[0]

    def role(self, identity_id: str) -> str:
        return self.get(identity_id).role

    # -- signing ------------------------------------------------------------

    def sign(self, identity_id: str, payload: bytes) -> bytes:
        """Keyed digest of the payload under the identity's secret."""
        identity = self.get(identity_id)
        return hmac.digest(identity.secret_key, payload, "sha256")

    def verify(self, identity_id: str, payload: bytes, tag: bytes) -> bool:
        if identity_id not in self._identities:
            return False
        return hmac.compare_digest(self.sign(identity_id, payload), tag)

    # -- channels -----------------------------------------------------------

    def create_channel(self, name: str, members: set[str]) -> Channel:
        with self._lock:
            if name in self._channels:
                raise LedgerError("DUPLICATE_CHANNEL", name)
            for member in members:
                if member not in self._identities:
                    raise LedgerError("UNKNOWN_MEMBER", member)
            channel = Channel(name=name, members=set(members), salt=self._rng.randbytes(16))
            self._channels[name] = channel
            for member in members:
                self._identities[member].channels.add(name)
        return channel

    def channel(self, name: str) -> Channel:
        ch = self._channels.get(name)
        if ch is None:
            raise LedgerError("UNKNOWN_CHANNEL", name)
        return ch

    def channels(self) -> list[Channel]:
        return list(self._channels.values())

    def authorize(self, identity_id: str, channel_name: str) -> bool:
        ch = self._channels.get(channel_name)
        return ch is not None and identity_id in ch.members

    def pseudonym(self, identity_id: str, channel: Channel | str) -> str:
        """Deterministic 16-hex-char tag for an identity within a channel.

        Without the channel salt the tag cannot feasibly be linked back to
        the identity; holders of the salt (the channel members) can recompute
        it, which keeps records joinable for auditors inside the deal.
        """
        self.get(identity_id)
        if isinstance(channel, str):
            channel = self.channel(channel)
        return codec.hash_payload(channel.salt + identity_id.encode("utf-8")).hex()[:16]

    # -- persistence --------------------------------------------------------

    def save(self, path: str) -> None:
        doc = {
            "counter": self._counter,
            "identities": [
                {
                    "id": i.id,
                    "display_name": i.display_name,
                    "role": i.role,
                    "secret_key": i.secret_key.hex(),
                    "channels": sorted(i.channels),
                }
                for i in self._identities.values()
            ],
            "channels": [
                {"name": c.name, "members": sorted(c.members), "salt": c.salt.hex()}
                for c in self._channels.values()
            ],
        }
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "MembershipService":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        service = cls()
        service._counter = doc["counter"]
        service._channels = {}
        for c in doc["channels"]:
            service._channels[c["name"]] = Channel(
                name=c["name"], members=set(c["members"]), salt=bytes.fromhex(c["salt"])
            )
        for i in doc["identities"]:
            service._identities[i["id"]] = Identity(
                id=i["id"],
                display_name=i["display_name"],
                role=i["role"],
                secret_key=bytes.fromhex(i["secret_key"]),
                channels=set(i["channels"]),
            )
        return service
