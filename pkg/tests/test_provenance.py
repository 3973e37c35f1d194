"""Trace queries against a brute-force reachability oracle on random DAGs."""

from __future__ import annotations

import random

from provledger.contracts import PROCESSED_PRODUCT, RAW_MILK, batch_key
from provledger.membership import MembershipService
from provledger.provenance import ProvenanceIndex, trace_back, trace_forward
from provledger.statedb import StateDB, Version, WriteOp


def _random_dag(rng: random.Random, n_nodes: int, n_farms: int):
    """Random provenance DAG: edges only from earlier to later nodes."""
    farms = [f"farm-{i}" for i in range(n_farms)]
    n_raw = max(1, rng.randint(1, max(1, n_nodes // 2)))
    nodes = []
    edges = []
    for i in range(n_nodes):
        node = f"b{i:03d}"
        if i < n_raw:
            nodes.append((node, RAW_MILK, rng.choice(farms)))
        else:
            fan_in = rng.randint(1, min(3, i))
            parents = rng.sample([n for n, _, _ in nodes], fan_in)
            nodes.append((node, PROCESSED_PRODUCT, None))
            edges.extend((p, node) for p in parents)
    return nodes, edges, farms


def _build_state(nodes, edges):
    state = StateDB()
    index = ProvenanceIndex()
    origin_of: dict[str, set[str]] = {}
    parents: dict[str, list[str]] = {}
    for frm, to in edges:
        parents.setdefault(to, []).append(frm)
    writes = []
    for i, (node, kind, farm) in enumerate(nodes):
        if kind == RAW_MILK:
            origin = {farm}
        else:
            origin = set()
            for p in parents.get(node, []):
                origin |= origin_of[p]
        origin_of[node] = origin
        doc = {
            "batch_id": node,
            "kind": kind,
            "owner": "holder-x",
            "origin_farms": sorted(origin),
            "source_animals": [],
            "rfid": "",
            "recalled": False,
            "custody": [["holder-x", 0]],
        }
        writes.append(WriteOp(key=batch_key(node), doc=doc))
        index._observe_write(batch_key(node), doc, block_no=1)
    for frm, to in edges:
        doc = {"from": frm, "to": to, "step_id": to}
        writes.append(WriteOp(key=f"trace:edge:{frm}:{to}", doc=doc))
        index._observe_write(f"trace:edge:{frm}:{to}", doc, block_no=1)
    state.apply_write_set(writes, Version(1, 0))
    return state, index


def _oracle_forward(edges, seeds):
    children: dict[str, set[str]] = {}
    for frm, to in edges:
        children.setdefault(frm, set()).add(to)
    reach = set(seeds)
    frontier = list(seeds)
    while frontier:
        node = frontier.pop()
        for child in children.get(node, ()):
            if child not in reach:
                reach.add(child)
                frontier.append(child)
    return reach


def _oracle_backward(edges, seed):
    parents: dict[str, set[str]] = {}
    for frm, to in edges:
        parents.setdefault(to, set()).add(frm)
    reach = {seed}
    frontier = [seed]
    while frontier:
        node = frontier.pop()
        for parent in parents.get(node, ()):
            if parent not in reach:
                reach.add(parent)
                frontier.append(parent)
    return reach


def _membership_with_farms(farms):
    service = MembershipService(rng=random.Random(0))
    for farm in farms:
        service.register_identity(farm, "FARM", identity_id=farm)
    return service


def test_traces_equal_reachability_oracle_on_random_dags():
    rng = random.Random(20260810)
    checked_back = checked_fwd = 0
    for _ in range(300):
        nodes, edges, farms = _random_dag(rng, rng.randint(1, 50), rng.randint(1, 5))
        state, index = _build_state(nodes, edges)
        membership = _membership_with_farms(farms)
        raw = {n: f for n, k, f in nodes if k == RAW_MILK}

        probe = rng.choice(nodes)[0]
        back = trace_back(state, index, probe)
        reachable = _oracle_backward(edges, probe)
        assert back["origin_farms"] == {raw[n] for n in reachable if n in raw}
        tree_edges = {(e["from"], e["to"]) for e in back["tree"]}
        assert tree_edges == {(f, t) for f, t in edges
                              if t in reachable and f in reachable}
        checked_back += 1

        fwd = trace_forward(state, index, membership, probe, height=1)
        assert fwd.affected_batches == _oracle_forward(edges, [probe])
        checked_fwd += 1

        farm = rng.choice(farms)
        farm_report = trace_forward(state, index, membership, farm, height=1)
        seeds = [n for n, f in raw.items() if f == farm]
        assert farm_report.affected_batches == _oracle_forward(edges, seeds)
        assert set(farm_report.holders) == farm_report.affected_batches
    assert checked_back == 300 and checked_fwd == 300


def test_dag_is_acyclic_by_construction(net, actors):
    from conftest import seed_milk_chain

    seed_milk_chain(net, actors)
    index = net.query_peer().index("main")
    # Kahn's algorithm residue must be empty
    indegree: dict[str, int] = {}
    for frm, outs in index.forward.items():
        indegree.setdefault(frm, 0)
        for to, _ in outs:
            indegree[to] = indegree.get(to, 0) + 1
    queue = [n for n, d in indegree.items() if d == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for to, _ in index.forward.get(node, ()):
            indegree[to] -= 1
            if indegree[to] == 0:
                queue.append(to)
    assert seen == len(indegree)
