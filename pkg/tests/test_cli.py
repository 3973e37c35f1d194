"""CLI surface tests via click's runner."""

from __future__ import annotations

import json
import random

import pytest
from click.testing import CliRunner

from provledger.cli import main
from provledger.membership import MAIN_CHANNEL

from conftest import make_network


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def datadir(tmp_path) -> str:
    path = tmp_path / "plvdata"
    net = make_network(datadir=str(path))
    farm = net.tokens["tok-farm-a"]
    processor = net.tokens["tok-proc"]
    net.register_animal(farm, "cow-001", "2024-03-01")
    net.register_batch(farm, "milk-1", ["cow-001"], "rfid-1")
    net.transfer_custody(farm, "milk-1", processor)
    net.process_batch(processor, ["milk-1"], "cheese-1", "cheesemaking")
    net.close()
    return str(path)


def test_ledger_verify_ok(runner, datadir):
    farm_peer = json.load(open(f"{datadir}/tokens.json"))["tok-farm-a"]
    result = runner.invoke(main, ["ledger", "verify",
                                  f"{datadir}/{farm_peer}/main.ledger"])
    assert result.exit_code == 0, result.output
    assert result.output.startswith("OK ")


def test_ledger_verify_reports_bad_block(runner, datadir, tmp_path):
    farm_peer = json.load(open(f"{datadir}/tokens.json"))["tok-farm-a"]
    path = tmp_path / "tampered.ledger"
    data = bytearray(open(f"{datadir}/{farm_peer}/main.ledger", "rb").read())
    data[len(data) // 2] ^= 0x40
    path.write_bytes(bytes(data))
    result = runner.invoke(main, ["ledger", "verify", str(path)])
    assert result.exit_code == 1
    assert result.output.startswith("BAD block=")


def test_state_dump_emits_sorted_json_lines(runner, datadir):
    farm_peer = json.load(open(f"{datadir}/tokens.json"))["tok-farm-a"]
    result = runner.invoke(main, ["--data", datadir, "state", "dump",
                                  "--peer", farm_peer, "--channel", MAIN_CHANNEL])
    assert result.exit_code == 0, result.output
    lines = [json.loads(line) for line in result.output.splitlines()]
    keys = [line["key"] for line in lines]
    assert keys == sorted(keys)
    assert all(set(line) == {"key", "version", "doc"} for line in lines)


def test_tx_submit_prints_txid_and_flag(runner, datadir):
    result = runner.invoke(main, [
        "--data", datadir, "tx", "submit",
        "--op", "register_animal",
        "--args", json.dumps({"animal_id": "cow-002", "born_at": "2024-05-01"}),
        "--as", "Ferma Alba",
    ])
    assert result.exit_code == 0, result.output
    tx_id, flag = result.output.split()
    assert len(bytes.fromhex(tx_id)) == 32
    assert flag == "VALID"


def test_trace_and_recall_round_trip(runner, datadir, tmp_path):
    report_path = tmp_path / "report.json"
    result = runner.invoke(main, ["--data", datadir, "trace", "forward",
                                  "Ferma Alba", "--out", str(report_path)])
    assert result.exit_code == 0, result.output
    report = json.loads(report_path.read_text())
    assert "cheese-1" in report["affected_batches"]

    result = runner.invoke(main, ["--data", datadir, "recall", "cheese-1",
                                  "--report", str(report_path)])
    assert result.exit_code == 0, result.output
    assert result.output.strip().endswith("VALID")

    result = runner.invoke(main, ["--data", datadir, "trace", "back", "cheese-1"])
    assert result.exit_code == 0
    assert "origin_farms" in result.output


def test_tokens_command(runner, datadir):
    result = runner.invoke(main, ["--data", datadir, "tokens", "Ferma Alba"])
    assert result.exit_code == 0, result.output
    entry = json.loads(result.output)
    assert entry["balance"] == 1 == len(entry["tokens"])


def test_qr_encode_verify_and_tamper(runner, datadir):
    result = runner.invoke(main, ["--data", datadir, "qr", "encode", "cheese-1"])
    assert result.exit_code == 0, result.output
    payload = result.output.strip()

    result = runner.invoke(main, ["--data", datadir, "qr", "verify", payload])
    assert result.exit_code == 0, result.output

    bad = payload[:-1] + ("0" if payload[-1] != "0" else "1")
    result = runner.invoke(main, ["--data", datadir, "qr", "verify", bad])
    assert result.exit_code == 1
    assert "INVALID" in result.output

    result = runner.invoke(main, ["--data", datadir, "qr", "verify", "PLV1|x"])
    assert result.exit_code == 2
    assert "MALFORMED_PAYLOAD" in result.output


def test_sim_run_writes_metrics(runner, tmp_path):
    config = {
        "peers": [
            {"peer": "p1", "identity": "proc-1", "role": "PROCESSOR"},
            {"peer": "p2", "identity": "proc-2", "role": "PROCESSOR"},
        ],
        "rng_seed": 4,
    }
    scenario = {
        "name": "tiny",
        "actions": [
            {"at": 0, "kind": "identity", "id": "farm-001",
             "display_name": "Farm 1", "role": "FARM"},
            {"at": 5, "kind": "animal", "farm": "farm-001",
             "animal_id": "cow-1", "born_at": "2024-01-01"},
        ],
    }
    config_path = tmp_path / "config.json"
    scenario_path = tmp_path / "scenario.json"
    out_path = tmp_path / "metrics.json"
    config_path.write_text(json.dumps(config))
    scenario_path.write_text(json.dumps(scenario))
    result = runner.invoke(main, ["sim", "run", "--config", str(config_path),
                                  "--scenario", str(scenario_path),
                                  "--out", str(out_path)])
    assert result.exit_code == 0, result.output
    metrics = json.loads(out_path.read_text())
    assert metrics["committed_tx"] == 1
    assert metrics["invalid_tx"] == {}


def test_demo_seeds_a_usable_network(runner, tmp_path):
    datadir = str(tmp_path / "demo")
    result = runner.invoke(main, ["--data", datadir, "demo"])
    assert result.exit_code == 0, result.output
    assert "sample QR payload: PLV1:pack-1:" in result.output
    result = runner.invoke(main, ["--data", datadir, "tokens", "Ferma Alba"])
    assert json.loads(result.output)["balance"] == 3
