import os
from typing import Any, Dict, List, Sequence, Tuple

import pytest

from definitions import DIAGRAMS_DIR
from rcrskit import diagram
from rcrskit.blocks import BlockSpec, instantiate
from rcrskit.settings import AnalysisSettings


def diagram_path(name: str) -> str:
    return os.path.join(DIAGRAMS_DIR, name)


def load_sample(name: str) -> diagram.Diagram:
    return diagram.load(diagram_path(name))


def chain_document(gains: Sequence[int], with_loop: bool, name: str = "chain") -> Dict[str, Any]:
    """
    x -> Gain ... Gain -> y.  With a loop the chain is fed by Add(previous state, x) and its
    result also goes through a UnitDelay back into the Add.
    """
    blocks: List[Dict[str, Any]] = [
        {"id": f"g_{i}", "type": "Gain", "params": {"k": k}} for i, k in enumerate(gains)
    ]
    wires: List[Dict[str, str]] = []
    if with_loop:
        blocks.insert(0, {"id": "add", "type": "Add"})
        blocks.append({"id": "delay", "type": "UnitDelay", "init": [0]})
        wires += [
            {"from": "in.0", "to": "add.1"},
            {"from": "delay.0", "to": "add.0"},
            {"from": "add.0", "to": "g_0.0"},
        ]
    else:
        wires.append({"from": "in.0", "to": "g_0.0"})
    for i in range(1, len(gains)):
        wires.append({"from": f"g_{i - 1}.0", "to": f"g_{i}.0"})
    last = f"g_{len(gains) - 1}.0"
    wires.append({"from": last, "to": "out.0"})
    if with_loop:
        wires.append({"from": last, "to": "delay.0"})
    return {
        "name": name,
        "inputs": [{"name": "x"}],
        "outputs": [{"name": "y"}],
        "blocks": blocks,
        "wires": wires,
    }


def large_document(
    units: int = 8,
    gains_per_unit: int = 9,
    tail_gains: int = 2,
    tail_delays: int = 6,
    name: str = "large",
    ports: Tuple[str, str] = ("x", "y"),
    first_unit: int = 0,
) -> Dict[str, Any]:
    """
    units accumulator loops in series (Add, Gains, UnitDelay, explicit Split each), followed by
    a tail of Gains and UnitDelays.  With the defaults: 104 blocks, 8 loops, 14 states.
    """
    blocks: List[Dict[str, Any]] = []
    wires: List[Dict[str, str]] = []
    feed = "in.0"
    for u in range(first_unit, first_unit + units):
        blocks.append({"id": f"u{u}_add", "type": "Add"})
        wires.append({"from": feed, "to": f"u{u}_add.1"})
        previous = f"u{u}_add.0"
        for i in range(gains_per_unit):
            blocks.append({"id": f"u{u}_g{i}", "type": "Gain", "params": {"k": 1 + (i + u) % 3}})
            wires.append({"from": previous, "to": f"u{u}_g{i}.0"})
            previous = f"u{u}_g{i}.0"
        blocks.append({"id": f"u{u}_split", "type": "Split"})
        blocks.append({"id": f"u{u}_delay", "type": "UnitDelay", "init": [u]})
        wires += [
            {"from": previous, "to": f"u{u}_split.0"},
            {"from": f"u{u}_split.0", "to": f"u{u}_delay.0"},
            {"from": f"u{u}_delay.0", "to": f"u{u}_add.0"},
        ]
        feed = f"u{u}_split.1"
    for i in range(tail_gains):
        blocks.append({"id": f"tail_g{i}", "type": "Gain", "params": {"k": "1/2"}})
        wires.append({"from": feed, "to": f"tail_g{i}.0"})
        feed = f"tail_g{i}.0"
    for i in range(tail_delays):
        blocks.append({"id": f"tail_d{i}", "type": "UnitDelay"})
        wires.append({"from": feed, "to": f"tail_d{i}.0"})
        feed = f"tail_d{i}.0"
    wires.append({"from": feed, "to": "out.0"})
    return {
        "name": name,
        "inputs": [{"name": ports[0]}],
        "outputs": [{"name": ports[1]}],
        "blocks": blocks,
        "wires": wires,
    }


def series_document(
    name: str,
    ports: Tuple[str, str],
    subsystems: Sequence[Dict[str, Any]],
    blocks: Sequence[Dict[str, Any]] = (),
) -> Dict[str, Any]:
    """in -> subsystems in order -> blocks in order -> out; every node has one input and output."""
    names = [document["name"] for document in subsystems] + [block["id"] for block in blocks]
    stops = ["in"] + names + ["out"]
    return {
        "name": name,
        "inputs": [{"name": ports[0]}],
        "outputs": [{"name": ports[1]}],
        "blocks": list(blocks),
        "subsystems": [{"name": d["name"], "diagram": d} for d in subsystems],
        "wires": [{"from": f"{a}.0", "to": f"{b}.0"} for a, b in zip(stops, stops[1:])],
    }


def hierarchical_large_document() -> Dict[str, Any]:
    """
    large_document() spread over three levels: two stages of two pairs of accumulator loops,
    then the tail at the top.  Still 104 blocks, 8 loops, 14 states.
    """
    stages = []
    for s in range(2):
        pairs = [
            large_document(
                units=2,
                tail_gains=0,
                tail_delays=0,
                name=f"pair{s}{p}",
                ports=(f"pair{s}{p}_in", f"pair{s}{p}_out"),
                first_unit=4 * s + 2 * p,
            )
            for p in range(2)
        ]
        stages.append(series_document(f"stage{s}", (f"stage{s}_in", f"stage{s}_out"), pairs))
    tail = [{"id": f"tail_g{i}", "type": "Gain", "params": {"k": "1/2"}} for i in range(2)]
    tail += [{"id": f"tail_d{i}", "type": "UnitDelay"} for i in range(6)]
    return series_document("hierarchical", ("x", "y"), stages, tail)


@pytest.fixture
def summation():
    return load_sample("summation.json")


@pytest.fixture
def nested():
    return load_sample("nested.json")


@pytest.fixture
def quick_settings():
    return AnalysisSettings(samples=500, seed=7)


@pytest.fixture
def library():
    """One untagged instance of the blocks used across the component tests."""
    return {
        name: instantiate(BlockSpec(name, params))
        for name, params in (
            ("Add", {}),
            ("Gain", {"k": 2}),
            ("SqrRoot", {}),
            ("NonDetSqrt", {}),
            ("ReceptiveSqrt", {}),
            ("UnitDelay", {}),
            ("Saturation", {"lo": 0, "hi": 10}),
        )
    }
