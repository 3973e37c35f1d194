"""Deterministic provenance-DAG workload generation.

The generated scenario registers farms, raw milk batches, custody transfers
to a processor, and then processing steps arranged in topological waves:
every step's inputs are committed strictly before the step is dispatched, so
the script is conflict-free under pipelined ordering. One farm is given a
deliberately large raw share so the workload always contains a wide recall
blast radius to measure.
"""

from __future__ import annotations

import random

from .scenario import Scenario

WAVE_MS = 1000
PROCESSED_PARENT_BIAS = 0.5  # chance an extra input is a processed batch


def generate_chain_workload(seed: int, n_farms: int, n_batches: int,
                            fanout: int, processor: str = "proc-1",
                            n_trace_queries: int = 0) -> Scenario:
    """Build a scenario whose provenance DAG has exactly ``n_batches`` nodes
    with processing fan-in ``fanout``."""
    if n_farms < 1 or n_batches < 1 or fanout < 1:
        raise ValueError("workload parameters must be positive")
    rng = random.Random(seed)
    fan = int(fanout)
    n_raw = min(n_batches, max(n_farms, n_batches // 5))
    n_steps = n_batches - n_raw
    farms = [f"farm-{i:03d}" for i in range(n_farms)]

    actions: list[dict] = []
    for i, farm in enumerate(farms):
        actions.append({"at": 0, "kind": "identity", "id": farm,
                        "display_name": f"Farm {i}", "role": "FARM"})

    raws: list[str] = []
    heavy_share = n_raw // 5  # one farm dominates, guaranteeing a wide radius
    raw_farm: dict[str, str] = {}
    for i in range(n_raw):
        batch_id = f"raw-{i:05d}"
        farm = farms[0] if i < heavy_share else farms[i % n_farms]
        raw_farm[batch_id] = farm
        actions.append({"at": WAVE_MS, "kind": "batch", "farm": farm,
                        "batch_id": batch_id, "rfid": f"rfid-{i:05d}"})
        raws.append(batch_id)
    for batch_id in raws:
        actions.append({"at": 2 * WAVE_MS, "kind": "transfer",
                        "holder": raw_farm[batch_id], "batch_id": batch_id,
                        "to": processor})

    wave_of: dict[str, int] = {r: 0 for r in raws}
    processed: list[str] = []
    for i in range(n_steps):
        inputs = [rng.choice(raws)]
        for _ in range(fan - 1):
            candidate = inputs[0]
            for _attempt in range(4):
                if processed and rng.random() < PROCESSED_PARENT_BIAS:
                    candidate = rng.choice(processed)
                else:
                    candidate = rng.choice(raws)
                if candidate not in inputs:
                    break
            if candidate in inputs:
                continue
            inputs.append(candidate)
        output_id = f"prod-{i:05d}"
        wave = 1 + max(wave_of[p] for p in inputs)
        wave_of[output_id] = wave
        processed.append(output_id)
        actions.append({"at": (2 + wave) * WAVE_MS, "kind": "process",
                        "processor": processor, "inputs": inputs,
                        "output_id": output_id, "process_kind": "process"})

    if n_trace_queries:
        last = (3 + max(wave_of.values(), default=0)) * WAVE_MS
        for i in range(n_trace_queries):
            actions.append({"at": last, "kind": "trace_forward",
                            "origin": farms[i % n_farms]})

    actions.sort(key=lambda a: a["at"])
    return Scenario(name=f"chain-workload-{seed}", actions=actions)
