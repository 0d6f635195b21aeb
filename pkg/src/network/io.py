"""Network file reading and writing"""

import json
from pathlib import Path
from typing import Any, Dict, Union

from loguru import logger
from pydantic import ValidationError as SchemaError

from src.shared.error_handler import FormatError
from src.shared.money import format_money, to_money
from src.shared.validators import NetworkFile

from .model import Consumer, Producer, TaskDependencyNetwork


def network_from_dict(data: Dict[str, Any]) -> TaskDependencyNetwork:
    try:
        doc = NetworkFile.model_validate(data)
    except SchemaError as e:
        raise FormatError(f"Invalid network file: {e.errors()[0]['msg']}") from e

    def policy(block):
        return block.model_dump(exclude_none=True) if block else None

    consumers = tuple(
        Consumer(c.id, {g: to_money(v) for g, v in c.values.items()}, policy(c.policy))
        for c in doc.consumers
    )
    producers = tuple(
        Producer(
            p.id,
            p.output,
            tuple((i.good, i.units) for i in p.inputs),
            to_money(p.cost),
            policy(p.policy),
        )
        for p in doc.producers
    )
    return TaskDependencyNetwork(
        goods=tuple(doc.goods),
        consumers=consumers,
        producers=producers,
        resolution=to_money(doc.resolution),
        protocol=policy(doc.protocol),
        provenance=doc.provenance,
    )


def network_to_dict(net: TaskDependencyNetwork) -> Dict[str, Any]:
    def money(amount):
        return format_money(amount, net.resolution)

    data: Dict[str, Any] = {}
    if net.provenance:
        data["provenance"] = net.provenance
    data["resolution"] = format_money(net.resolution, net.resolution)
    if net.protocol:
        data["protocol"] = dict(net.protocol)
    data["goods"] = list(net.goods)
    data["consumers"] = []
    for c in net.consumers:
        entry = {"id": c.id, "values": {g: money(v) for g, v in c.values.items()}}
        if c.policy:
            entry["policy"] = dict(c.policy)
        data["consumers"].append(entry)
    data["producers"] = []
    for p in net.producers:
        entry = {
            "id": p.id,
            "output": p.output,
            "inputs": [{"good": g, "units": n} for g, n in p.inputs],
            "cost": money(p.cost),
        }
        if p.policy:
            entry["policy"] = dict(p.policy)
        data["producers"].append(entry)
    return data


def load_network(path: Union[str, Path]) -> TaskDependencyNetwork:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"Cannot read network file: {e}", path=str(path)) from e
    net = network_from_dict(data)
    logger.debug(f"Loaded network {path} with {len(net.agents)} agents and {len(net.goods)} goods")
    return net


def save_network(net: TaskDependencyNetwork, path: Union[str, Path]):
    Path(path).write_text(dumps_network(net), encoding="utf-8")


def dumps_network(net: TaskDependencyNetwork) -> str:
    return json.dumps(network_to_dict(net), indent=2) + "\n"
