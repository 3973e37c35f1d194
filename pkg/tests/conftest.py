"""Shared fixtures: a small dairy network with one peer per participant."""

from __future__ import annotations

import random
from typing import Iterator

import pytest

from provledger.network import Network

DAIRY_CONFIG = {
    "identities": [
        {"display_name": "Ferma Alba", "role": "FARM", "token": "tok-farm-a"},
        {"display_name": "Ferma Bistra", "role": "FARM", "token": "tok-farm-b"},
        {"display_name": "Dairy One", "role": "PROCESSOR", "token": "tok-proc"},
        {"display_name": "Coldvan", "role": "TRANSPORTER", "token": "tok-trans"},
        {"display_name": "Shop One", "role": "SHOP", "token": "tok-shop-1"},
        {"display_name": "Shop Two", "role": "SHOP", "token": "tok-shop-2"},
        {"display_name": "Big Bank", "role": "BANK", "token": "tok-bank"},
        {"display_name": "Food Authority", "role": "AUDITOR", "token": "tok-auditor"},
        {"display_name": "Ordering Service", "role": "ORDERER"},
        {"display_name": "Ana", "role": "CONSUMER", "token": "tok-ana"},
    ],
}


class Actors:
    """Identity ids of the standard cast, resolved by display name."""

    def __init__(self, net: Network):
        self.net = net
        by_name = net.membership.by_display_name
        self.farm_a = by_name("Ferma Alba").id
        self.farm_b = by_name("Ferma Bistra").id
        self.processor = by_name("Dairy One").id
        self.transporter = by_name("Coldvan").id
        self.shop1 = by_name("Shop One").id
        self.shop2 = by_name("Shop Two").id
        self.bank = by_name("Big Bank").id
        self.auditor = by_name("Food Authority").id
        self.orderer = by_name("Ordering Service").id


def make_network(datadir: str | None = None, seed: int = 7,
                 batch_size: int = 10) -> Network:
    clock = _ticker()
    return Network.bootstrap(DAIRY_CONFIG, datadir=datadir,
                             rng=random.Random(seed), clock=clock,
                             batch_size=batch_size)


def _ticker():
    # deterministic millisecond clock for reproducible block timestamps
    state = {"now": 1_700_000_000_000}

    def clock() -> int:
        state["now"] += 1
        return state["now"]

    return clock


@pytest.fixture
def net() -> Iterator[Network]:
    network = make_network()
    yield network
    network.close()


@pytest.fixture
def actors(net) -> Actors:
    return Actors(net)


def seed_milk_chain(net: Network, actors: Actors) -> dict[str, str]:
    """Animals, two milk batches, one cheese, one packed product."""
    net.register_animal(actors.farm_a, "cow-001", "2024-03-01")
    net.register_animal(actors.farm_b, "cow-101", "2024-02-15")
    net.register_batch(actors.farm_a, "milk-a1", ["cow-001"], "rfid-a1")
    net.register_batch(actors.farm_b, "milk-b1", ["cow-101"], "rfid-b1")
    net.transfer_custody(actors.farm_a, "milk-a1", actors.processor)
    net.transfer_custody(actors.farm_b, "milk-b1", actors.processor)
    net.process_batch(actors.processor, ["milk-a1", "milk-b1"], "cheese-1", "cheesemaking")
    net.process_batch(actors.processor, ["cheese-1"], "pack-1", "packaging")
    return {"milk_a": "milk-a1", "milk_b": "milk-b1",
            "cheese": "cheese-1", "pack": "pack-1"}
