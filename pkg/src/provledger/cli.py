"""The ``plv`` command line: ledger verification, state dumps, transaction
submission, traces, recalls, QR codecs, simulation runs, and the gateway."""

from __future__ import annotations

import json
import os
import sys

import click

from .errors import LedgerError
from .gateway import create_app, jsonify
from .membership import MAIN_CHANNEL
from .netsim import SimConfig, build_network
from .network import Network
from .provenance import RecallReport
from .scenario import Scenario
from .chain import verify_ledger_file


def _load_network(datadir: str) -> Network:
    if not os.path.isdir(datadir):
        raise click.ClickException(f"no data directory at {datadir!r}; "
                                   f"run `plv net init` first")
    return Network.load(datadir)


def _resolve(net: Network, who: str) -> str:
    if net.membership.has(who):
        return who
    return net.membership.by_display_name(who).id


def _default_auditor(net: Network) -> str:
    auditors = [i.id for i in net.membership.identities() if i.role == "AUDITOR"]
    if len(auditors) != 1:
        raise click.ClickException("pass --as: network has "
                                   f"{len(auditors)} auditor identities")
    return auditors[0]


@click.group()
@click.option("--data", "datadir", default=lambda: os.environ.get("PLV_DATA", "plvdata"),
              show_default="plvdata", help="Network data directory.")
@click.pass_context
def main(ctx: click.Context, datadir: str) -> None:
    ctx.obj = datadir


# -- net ------------------------------------------------------------------------


@main.group()
def net() -> None:
    """Network lifecycle."""


@net.command("init")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def net_init(datadir: str, config_path: str) -> None:
    """Bootstrap identities, peers, and channels from a config file."""
    with open(config_path, encoding="utf-8") as fh:
        config = json.load(fh)
    network = Network.bootstrap(config, datadir=datadir)
    network.close()
    click.echo(f"initialized {len(network.peers)} peers in {datadir}")


# -- ledger ----------------------------------------------------------------------


@main.group()
def ledger() -> None:
    """Ledger files."""


@ledger.command("verify")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def ledger_verify(path: str) -> None:
    """Check chain links, Merkle roots, and body hashes of a ledger file."""
    report, blocks = verify_ledger_file(path)
    if report.ok:
        click.echo(f"OK {blocks} blocks")
    else:
        click.echo(f"BAD block={report.first_bad_block}")
        sys.exit(1)


# -- state -----------------------------------------------------------------------


@main.group()
def state() -> None:
    """World state."""


@state.command("dump")
@click.option("--peer", required=True)
@click.option("--channel", default=MAIN_CHANNEL, show_default=True)
@click.pass_obj
def state_dump(datadir: str, peer: str, channel: str) -> None:
    """Emit a peer's state entries as JSON lines, sorted by key."""
    network = _load_network(datadir)
    try:
        if peer not in network.peers:
            raise click.ClickException(f"unknown peer {peer!r}")
        for entry in network.peers[peer].state(channel).items():
            click.echo(json.dumps({"key": entry.key,
                                   "version": entry.version.to_doc(),
                                   "doc": jsonify(entry.doc)}, sort_keys=True))
    finally:
        network.close()


# -- tx ---------------------------------------------------------------------------


@main.group()
def tx() -> None:
    """Transactions."""


@tx.command("submit")
@click.option("--channel", default=MAIN_CHANNEL, show_default=True)
@click.option("--op", "op_name", required=True)
@click.option("--args", "args_json", required=True)
@click.option("--endorsers", default=None,
              help="Comma-separated peer ids; defaults to the channel policy.")
@click.option("--as", "creator", required=True,
              help="Creator identity (id or display name).")
@click.pass_obj
def tx_submit(datadir: str, channel: str, op_name: str, args_json: str,
              endorsers: str | None, creator: str) -> None:
    """Endorse, order, and commit one transaction; print id and flag."""
    network = _load_network(datadir)
    try:
        outcome = network.transact(
            _resolve(network, creator), channel, op_name, json.loads(args_json),
            endorsers=endorsers.split(",") if endorsers else None,
        )
        click.echo(f"{outcome.tx_id.hex()} {outcome.flag}")
        if outcome.flag != "VALID":
            sys.exit(1)
    finally:
        network.close()


# -- trace / recall / tokens --------------------------------------------------------


@main.group()
def trace() -> None:
    """Provenance traces."""


@trace.command("back")
@click.argument("batch_id")
@click.pass_obj
def trace_back_cmd(datadir: str, batch_id: str) -> None:
    network = _load_network(datadir)
    try:
        result = network.trace_back(batch_id)
        click.echo(json.dumps(jsonify({
            "batch_id": result["batch_id"],
            "origin_farms": sorted(result["origin_farms"]),
            "tree": result["tree"],
            "animal_events": result["animal_events"],
        }), indent=2, sort_keys=True))
    finally:
        network.close()


@trace.command("forward")
@click.argument("origin")
@click.option("--out", "out_path", default=None,
              type=click.Path(dir_okay=False, writable=True),
              help="Also write the recall report to a file.")
@click.pass_obj
def trace_forward_cmd(datadir: str, origin: str, out_path: str | None) -> None:
    network = _load_network(datadir)
    try:
        report = network.trace_forward(_resolve(network, origin))
        doc = report.to_doc()
        click.echo(json.dumps(jsonify(doc), indent=2, sort_keys=True))
        if out_path:
            with open(out_path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
    finally:
        network.close()


@main.command("recall")
@click.argument("batch_ids", nargs=-1, required=True)
@click.option("--report", "report_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Recall report produced by `plv trace forward --out`.")
@click.option("--as", "auditor", default=None,
              help="Auditor identity; defaults to the network's only auditor.")
@click.pass_obj
def recall_cmd(datadir: str, batch_ids: tuple[str, ...], report_path: str,
               auditor: str | None) -> None:
    """Mark a subset of a recall report's batches as recalled."""
    network = _load_network(datadir)
    try:
        with open(report_path, encoding="utf-8") as fh:
            report = RecallReport.from_doc(json.load(fh))
        who = _resolve(network, auditor) if auditor else _default_auditor(network)
        outcome = network.mark_recalled(who, report, list(batch_ids))
        click.echo(f"{outcome.tx_id.hex()} {outcome.flag}")
        if outcome.flag != "VALID":
            sys.exit(1)
    finally:
        network.close()


@main.command("tokens")
@click.argument("farm")
@click.pass_obj
def tokens_cmd(datadir: str, farm: str) -> None:
    """Print a farm's token balance and token ids."""
    network = _load_network(datadir)
    try:
        entry = network.token_entry(_resolve(network, farm))
        click.echo(json.dumps(entry, indent=2, sort_keys=True))
    finally:
        network.close()


# -- qr -------------------------------------------------------------------------------


@main.group()
def qr() -> None:
    """Tamper-evident QR payloads."""


@qr.command("encode")
@click.argument("batch_id")
@click.pass_obj
def qr_encode(datadir: str, batch_id: str) -> None:
    network = _load_network(datadir)
    try:
        click.echo(network.encode_qr(batch_id))
    finally:
        network.close()


@qr.command("verify")
@click.argument("payload")
@click.pass_obj
def qr_verify(datadir: str, payload: str) -> None:
    network = _load_network(datadir)
    try:
        try:
            result = network.verify_qr(payload)
        except LedgerError as err:
            if err.code != "MALFORMED_PAYLOAD":
                raise
            click.echo("MALFORMED_PAYLOAD")
            sys.exit(2)
        if result is None:
            click.echo("INVALID")
            sys.exit(1)
        click.echo(json.dumps(jsonify({
            "batch_id": result["batch_id"],
            "origin_farms": sorted(result["trace"]["origin_farms"]),
            "tree": result["trace"]["tree"],
            "animal_events": result["trace"]["animal_events"],
        }), indent=2, sort_keys=True))
    finally:
        network.close()


# -- sim -------------------------------------------------------------------------------


@main.group()
def sim() -> None:
    """Virtual-time simulation."""


@sim.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", default=None,
              type=click.Path(dir_okay=False, writable=True))
def sim_run(config_path: str, scenario_path: str, out_path: str | None) -> None:
    """Run a scenario on the simulated network and report metrics."""
    with open(config_path, encoding="utf-8") as fh:
        config = SimConfig.from_doc(json.load(fh))
    scenario = Scenario.load(scenario_path)
    simnet = build_network(config)
    metrics = simnet.run_scenario(scenario)
    doc = metrics.to_doc()
    click.echo(json.dumps(doc, indent=2, sort_keys=True))
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)


# -- serve ------------------------------------------------------------------------------


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8420, show_default=True)
@click.option("--console-dir", default=None,
              help="Serve a built console bundle at /console.")
@click.pass_obj
def serve(datadir: str, host: str, port: int, console_dir: str | None) -> None:
    """Serve the HTTP gateway over a loaded network."""
    import uvicorn

    network = _load_network(datadir)
    app = create_app(network, console_dir=console_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        network.close()


# -- demo -------------------------------------------------------------------------------


DEMO_CONFIG = {
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
    ],
}


@main.command("demo")
@click.pass_obj
def demo(datadir: str) -> None:
    """Bootstrap a small dairy network with a seeded supply chain."""
    network = Network.bootstrap(DEMO_CONFIG, datadir=datadir)
    try:
        by_name = network.membership.by_display_name
        farm_a = by_name("Ferma Alba").id
        farm_b = by_name("Ferma Bistra").id
        processor = by_name("Dairy One").id
        network.register_animal(farm_a, "cow-001", "2024-03-01")
        network.register_animal(farm_a, "cow-002", "2024-04-11")
        network.register_animal(farm_b, "cow-101", "2024-02-15")
        network.record_animal_event(farm_a, "cow-001", "VACCINATION",
                                    "IBR dose 1", "2024-03-20")
        network.register_batch(farm_a, "milk-a1", ["cow-001", "cow-002"], "rfid-a1")
        network.register_batch(farm_a, "milk-a2", ["cow-001"], "rfid-a2")
        network.register_batch(farm_b, "milk-b1", ["cow-101"], "rfid-b1")
        for farm, batch in ((farm_a, "milk-a1"), (farm_a, "milk-a2"),
                            (farm_b, "milk-b1")):
            network.transfer_custody(farm, batch, processor)
        network.process_batch(processor, ["milk-a1", "milk-b1"], "cheese-1",
                              "cheesemaking")
        network.process_batch(processor, ["cheese-1"], "pack-1", "packaging")
        network.process_batch(processor, ["milk-a2"], "butter-1", "churning")
        payload = network.encode_qr("pack-1")
        click.echo(f"demo network in {datadir}")
        click.echo("tokens: " + ", ".join(sorted(network.tokens)))
        click.echo(f"sample QR payload: {payload}")
    finally:
        network.close()


if __name__ == "__main__":
    main()
