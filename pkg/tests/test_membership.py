"""Identity registry, signing, channels, and pseudonym tests."""

from __future__ import annotations

import hashlib
import random

import pytest

from provledger.errors import LedgerError
from provledger.membership import MAIN_CHANNEL, MembershipService


@pytest.fixture
def service() -> MembershipService:
    return MembershipService(rng=random.Random(42))


def test_farm_registration_joins_main(service):
    farm = service.register_identity("Ferma Alba", "FARM")
    assert farm.role == "FARM"
    assert MAIN_CHANNEL in farm.channels
    assert service.authorize(farm.id, MAIN_CHANNEL)


def test_consumer_has_no_channels(service):
    ana = service.register_identity("Ana", "CONSUMER")
    assert ana.channels == set()
    assert not service.authorize(ana.id, MAIN_CHANNEL)


def test_same_display_name_two_distinct_ids(service):
    a = service.register_identity("Ferma Alba", "FARM")
    b = service.register_identity("Ferma Alba", "FARM")
    assert a.id != b.id


def test_sign_verify_round_trip(service):
    farm = service.register_identity("Ferma Alba", "FARM")
    tag = service.sign(farm.id, b"payload")
    assert len(tag) == 32
    assert service.verify(farm.id, b"payload", tag)


def test_verify_fails_on_flipped_payload_byte(service):
    farm = service.register_identity("Ferma Alba", "FARM")
    tag = service.sign(farm.id, b"payload")
    assert not service.verify(farm.id, b"paxload", tag)


def test_verify_fails_under_other_identity(service):
    a = service.register_identity("Ferma Alba", "FARM")
    b = service.register_identity("Ferma Bistra", "FARM")
    tag = service.sign(a.id, b"payload")
    assert not service.verify(b.id, b"payload", tag)


def test_sign_unknown_identity_raises(service):
    with pytest.raises(LedgerError) as err:
        service.sign("ghost", b"payload")
    assert err.value.code == "UNKNOWN_IDENTITY"


def test_create_channel_of_three(service):
    seller = service.register_identity("Dairy One", "PROCESSOR")
    buyer = service.register_identity("Shop One", "SHOP")
    orderer = service.register_identity("Orderer", "ORDERER")
    channel = service.create_channel("deal-42", {seller.id, buyer.id, orderer.id})
    assert channel.members == {seller.id, buyer.id, orderer.id}
    assert service.authorize(buyer.id, "deal-42")


def test_duplicate_channel_name_is_refused(service):
    a = service.register_identity("Dairy One", "PROCESSOR")
    service.create_channel("deal-42", {a.id})
    with pytest.raises(LedgerError) as err:
        service.create_channel("deal-42", {a.id})
    assert err.value.code == "DUPLICATE_CHANNEL"


def test_unknown_member_is_refused(service):
    with pytest.raises(LedgerError) as err:
        service.create_channel("deal-43", {"ghost"})
    assert err.value.code == "UNKNOWN_MEMBER"


def test_authorize_non_member_and_unknown_channel(service):
    a = service.register_identity("Dairy One", "PROCESSOR")
    b = service.register_identity("Big Bank", "BANK")
    service.create_channel("deal-42", {a.id})
    assert not service.authorize(b.id, "deal-42")
    assert not service.authorize(a.id, "no-such-channel")


def test_pseudonym_matches_digest_oracle(service):
    # oracle: first 16 hex chars of SHA-256(salt || identity id)
    shop = service.register_identity("Shop One", "SHOP")
    channel = service.create_channel("deal-42", {shop.id})
    expected = hashlib.sha256(channel.salt + shop.id.encode()).hexdigest()[:16]
    assert service.pseudonym(shop.id, channel) == expected
    assert service.pseudonym(shop.id, channel) == expected  # deterministic


def test_pseudonym_differs_across_channels(service):
    shop = service.register_identity("Shop One", "SHOP")
    c1 = service.create_channel("deal-1", {shop.id})
    c2 = service.create_channel("deal-2", {shop.id})
    assert c1.salt != c2.salt
    assert service.pseudonym(shop.id, c1) != service.pseudonym(shop.id, c2)


def test_pseudonyms_distinct_per_identity(service):
    a = service.register_identity("Shop One", "SHOP")
    b = service.register_identity("Shop Two", "SHOP")
    channel = service.create_channel("deal-1", {a.id, b.id})
    assert service.pseudonym(a.id, channel) != service.pseudonym(b.id, channel)


def test_pseudonym_never_contains_display_name(service):
    shop = service.register_identity("Shop One", "SHOP")
    channel = service.create_channel("deal-1", {shop.id})
    tag = service.pseudonym(shop.id, channel)
    assert len(tag) == 16
    assert "Shop" not in tag


def test_persistence_round_trip_keeps_salts_and_keys(service, tmp_path):
    farm = service.register_identity("Ferma Alba", "FARM")
    shop = service.register_identity("Shop One", "SHOP")
    channel = service.create_channel("deal-1", {farm.id, shop.id})
    before = service.pseudonym(shop.id, channel)
    tag = service.sign(farm.id, b"payload")

    path = tmp_path / "membership.json"
    service.save(str(path))
    restored = MembershipService.load(str(path))

    assert restored.pseudonym(shop.id, "deal-1") == before
    assert restored.verify(farm.id, b"payload", tag)
    assert restored.channel("deal-1").members == {farm.id, shop.id}
