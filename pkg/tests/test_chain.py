"""Block construction, chain verification, and ledger file tamper tests."""

from __future__ import annotations

import hashlib
import random

import pytest

from provledger import chain, codec
from provledger.chain import (VALID, Ledger, build_block, merkle_root,
                              read_ledger_file, verify_chain,
                              verify_ledger_file, write_ledger_file)
from provledger.errors import LedgerError
from provledger.wire import Envelope, Proposal


def _envelope(n: int, channel: str = "main") -> Envelope:
    proposal = Proposal(
        channel=channel,
        contract_op="register_batch",
        args={"batch_id": f"b{n}", "rfid": f"tag-{n}"},
        creator="farm-0001",
        nonce=n.to_bytes(16, "big"),
        endorser_peers=("p1", "p2"),
    )
    return Envelope(tx_id=proposal.tx_id(), proposal=proposal)


def _oracle_merkle(tx_ids: list[bytes]) -> bytes:
    """Independent Merkle construction used to freeze expected roots."""
    if not tx_ids:
        return hashlib.sha256(b"").digest()
    level = [hashlib.sha256(t).digest() for t in tx_ids]
    while len(level) > 1:
        if len(level) % 2:
            level = level + [level[-1]]
        level = [hashlib.sha256(level[i] + level[i + 1]).digest()
                 for i in range(0, len(level), 2)]
    return level[0]


def test_merkle_of_empty_list_is_hash_of_empty_bytes():
    assert merkle_root([]) == hashlib.sha256(b"").digest()


def test_merkle_of_single_txid_is_hash_of_its_bytes():
    tx = _envelope(1).tx_id
    assert merkle_root([tx]) == hashlib.sha256(tx).digest()


def test_merkle_order_matters():
    a, b = _envelope(1).tx_id, _envelope(2).tx_id
    assert merkle_root([a, b]) == _oracle_merkle([a, b])
    assert merkle_root([a, b]) != merkle_root([b, a])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 7, 8, 9])
def test_merkle_matches_oracle_for_odd_and_even_counts(n):
    tx_ids = [_envelope(i).tx_id for i in range(n)]
    assert merkle_root(tx_ids) == _oracle_merkle(tx_ids)


def test_genesis_block_convention():
    block = build_block(0, codec.ZERO_HASH, [], [], timestamp=0)
    assert block.header.number == 0
    assert block.header.prev_hash == codec.ZERO_HASH
    assert block.header.data_hash == hashlib.sha256(b"").digest()


def test_build_block_data_hash_is_merkle_of_txids():
    envs = [_envelope(1), _envelope(2)]
    block = build_block(3, b"\x01" * 32, envs, [VALID, VALID], timestamp=17)
    assert block.header.data_hash == _oracle_merkle([e.tx_id for e in envs])


def test_build_block_rejects_flag_count_mismatch():
    with pytest.raises(LedgerError) as err:
        build_block(0, codec.ZERO_HASH, [_envelope(1)], [], timestamp=0)
    assert err.value.code == "LENGTH_MISMATCH"


def _small_ledger(n_blocks: int = 3, path: str | None = None) -> Ledger:
    ledger = Ledger(owner_peer="p1", path=path)
    prev = codec.ZERO_HASH
    counter = 0
    for number in range(n_blocks):
        envs = [_envelope(counter + i) for i in range(2)]
        counter += 2
        block = build_block(number, prev, envs, [VALID] * 2, timestamp=number * 1000)
        ledger.append_block(block)
        prev = block.header.hash()
    return ledger


def test_append_and_verify_fresh_chain():
    ledger = _small_ledger(3)
    report = verify_chain(ledger)
    assert report.ok and report.first_bad_block is None


def test_verify_genesis_only_ledger():
    ledger = _small_ledger(1)
    assert verify_chain(ledger).ok


def test_append_out_of_sequence_is_rejected():
    ledger = _small_ledger(1)
    block = build_block(2, ledger.tip_hash(), [], [], timestamp=5)
    with pytest.raises(LedgerError) as err:
        ledger.append_block(block)
    assert err.value.code == "SEQUENCE_GAP"


def test_append_with_wrong_prev_hash_is_rejected():
    ledger = _small_ledger(1)
    block = build_block(1, b"\x07" * 32, [], [], timestamp=5)
    with pytest.raises(LedgerError) as err:
        ledger.append_block(block)
    assert err.value.code == "BAD_LINK"


def test_mutated_envelope_is_reported():
    ledger = _small_ledger(3)
    target = ledger.blocks[1]
    bad_env = _envelope(999)
    ledger.blocks[1] = chain.Block(header=target.header,
                                   envelopes=(bad_env, target.envelopes[1]),
                                   validity=target.validity)
    report = verify_chain(ledger)
    assert not report.ok
    assert report.first_bad_block == 1


def test_identical_block_sequences_write_identical_files(tmp_path):
    a = tmp_path / "a.ledger"
    b = tmp_path / "b.ledger"
    write_ledger_file(str(a), _small_ledger(4).blocks)
    write_ledger_file(str(b), _small_ledger(4).blocks)
    assert a.read_bytes() == b.read_bytes()


def test_file_round_trip_verifies(tmp_path):
    path = tmp_path / "p1" / "main.ledger"
    _small_ledger(4, path=str(path)).close()
    ledger = read_ledger_file(str(path))
    assert len(ledger.blocks) == 4
    assert verify_chain(ledger).ok


def _record_ranges(data: bytes) -> list[tuple[int, int]]:
    """Byte range of each record (including its length prefix)."""
    ranges = []
    offset = 0
    while offset < len(data):
        length = int.from_bytes(data[offset:offset + 4], "big")
        ranges.append((offset, offset + 4 + length))
        offset += 4 + length
    return ranges


def test_every_single_byte_flip_is_attributed_to_its_block(tmp_path):
    path = tmp_path / "main.ledger"
    _small_ledger(3, path=str(path)).close()
    data = bytearray(path.read_bytes())
    ranges = _record_ranges(bytes(data))
    rng = random.Random(20260810)
    for _ in range(300):
        position = rng.randrange(len(data))
        original = data[position]
        data[position] = original ^ (1 << rng.randrange(8))
        path.write_bytes(bytes(data))
        containing = next(i for i, (lo, hi) in enumerate(ranges) if lo <= position < hi)
        report, _ = verify_ledger_file(str(path))
        assert not report.ok, f"flip at {position} went undetected"
        assert report.first_bad_block == containing
        data[position] = original
