#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Bundled topologies and random network generators

Named fixtures are fixed networks with a provenance header describing
which facts they reproduce and which parts are reconstructed. Random
generators take a numpy Generator and are deterministic given its seed.
"""

from fractions import Fraction
from typing import Callable, Dict, List, Optional

import numpy as np

from src.shared.error_handler import NotFoundError, ValidationError
from src.shared.money import DEFAULT_RESOLUTION, to_money

from .model import Consumer, Producer, TaskDependencyNetwork


def grid_uniform(rng: np.random.Generator, low, high, resolution: Fraction = DEFAULT_RESOLUTION) -> Fraction:
    """Uniform draw on the grid points of [low, high]"""
    low, high = to_money(low), to_money(high)
    steps = int((high - low) / resolution)
    return low + int(rng.integers(0, steps + 1)) * resolution


def _network(goods, consumers, producers, provenance, protocol=None, resolution=DEFAULT_RESOLUTION):
    return TaskDependencyNetwork(
        goods=tuple(goods),
        consumers=tuple(consumers),
        producers=tuple(producers),
        resolution=resolution,
        protocol=protocol,
        provenance=provenance,
    )


def _producer(pid, output, inputs=(), cost=0):
    return Producer(pid, output, tuple((g, n) for g, n in inputs), to_money(cost))


# ========== NAMED FIXTURES ==========

GREEDY_BAD_PROVENANCE = (
    "greedy-bad (reconstruction). Reproduced facts: a6 needs goods 2, 3 and 4 and "
    "competes with a5 for good 5; a3 costs 1; good 4 has one seller (a4) and is "
    "wanted by both a6 and a7; with the consumer's value at 9 no competitive "
    "equilibrium exists because p(6) >= 10 clashes with p(6) <= 9; at prices "
    "(3, 1, 1, 5, 8, 15) producer a6 could earn 1. Costs of a1, a2, a4, a5, a6 and "
    "a7 are reconstructed."
)


def greedy_bad(value="16") -> TaskDependencyNetwork:
    """Resource contention over good 4; value 9 has no equilibrium, 16 has one"""
    producers = [
        _producer("a1", "1", cost=3),
        _producer("a2", "2", cost=1),
        _producer("a3", "3", cost=1),
        _producer("a4", "4", cost=1),
        _producer("a5", "5", [("1", 1), ("2", 1)], cost=1),
        _producer("a6", "5", [("2", 1), ("3", 1), ("4", 1)], cost=0),
        _producer("a7", "6", [("4", 1), ("5", 1)], cost=2),
    ]
    consumers = [Consumer("cons", {"6": to_money(value)})]
    return _network(["1", "2", "3", "4", "5", "6"], consumers, producers, GREEDY_BAD_PROVENANCE)


EXPONENTIAL_PROVENANCE = (
    "exponential (reconstruction). Reproduced facts: producer 'start' makes a "
    "one-time offer to sell one unit of good 0 at 2; every stage i has producers "
    "i-1, i-2 and i-3; i-3 reprices its output whenever a quote on either of its "
    "inputs changes; the consumer wants good n; under adversarial delivery the "
    "bids grow exponentially in n, under synchronous delivery only linearly. "
    "Reconstructed: i-1 and i-2 both buy good i-1 and i-3 assembles their outputs "
    "into good i; each stage also has an unsupplied good i-R, bought by i-1 and "
    "i-2, whose only consumer i-E raises once. Auctions open only after every "
    "adjacent agent has bid, so without that late price change each stage would "
    "reprice once; with it i-3 updates 2k+1 times for k updates of the previous "
    "stage (3, 7, 15, ... rather than 2, 4, 8, ...)."
)


def exponential(stages: int = 3) -> TaskDependencyNetwork:
    if stages < 1:
        raise ValidationError("exponential needs at least one stage", field="size")
    goods = ["0"]
    producers = [_producer("start", "0", cost=2)]
    consumers = []
    for i in range(1, stages + 1):
        prev, a, b, late, out = str(i - 1), f"{i}-A", f"{i}-B", f"{i}-R", str(i)
        goods += [a, b, late, out]
        producers += [
            _producer(f"{i}-1", a, [(prev, 1), (late, 1)]),
            _producer(f"{i}-2", b, [(prev, 1), (late, 1)]),
            _producer(f"{i}-3", out, [(a, 1), (b, 1)]),
        ]
        consumers.append(Consumer(f"{i}-E", {late: Fraction(1, 100)}))
    consumers.append(Consumer("cons", {str(stages): Fraction(1, 100)}))
    return _network(goods, consumers, producers, EXPONENTIAL_PROVENANCE)


NO_CONVERGE_PROVENANCE = (
    "no-converge (reconstruction). Reproduced facts: a6 offers good 4 at no less "
    "than p(2) + 20; a8 needs two units of good 4; the protocol runs with a buy "
    "increment of 40 and a sell increment of 0. Remaining producers and costs are "
    "reconstructed."
)


def no_converge() -> TaskDependencyNetwork:
    producers = [
        _producer("a1", "1", cost=1),
        _producer("a2", "2", cost=1),
        _producer("a3", "3", cost=3),
        _producer("a4", "4", [("3", 1)], cost=1),
        _producer("a5", "3", [("1", 1)], cost=1),
        _producer("a6", "4", [("2", 1)], cost=20),
        _producer("a7", "5", [("2", 2)], cost=0),
        _producer("a8", "5", [("4", 2)], cost=0),
    ]
    consumers = [Consumer("cons", {"5": to_money(100)})]
    protocol = {"delta_buy": "40", "delta_sell": "0"}
    return _network(["1", "2", "3", "4", "5"], consumers, producers, NO_CONVERGE_PROVENANCE, protocol)


def chain(length: int = 1, cost="0.4", value="1") -> TaskDependencyNetwork:
    """p1 makes g1, each later producer turns the previous good into the next"""
    if length < 1:
        raise ValidationError("chain needs at least one producer", field="size")
    goods = [f"g{i}" for i in range(1, length + 1)]
    producers = [_producer("p1", "g1", cost=cost)]
    for i in range(2, length + 1):
        producers.append(_producer(f"p{i}", f"g{i}", [(f"g{i - 1}", 1)], cost=cost))
    consumers = [Consumer("cons", {goods[-1]: to_money(value)})]
    return _network(goods, consumers, producers, f"chain of {length} producer(s)")


def two_parallel(cost_a="0.5", cost_b="0.5", value="1") -> TaskDependencyNetwork:
    """Two alternative input-less producers of the consumer's good"""
    producers = [_producer("pa", "g", cost=cost_a), _producer("pb", "g", cost=cost_b)]
    return _network(["g"], [Consumer("cons", {"g": to_money(value)})], producers, "two parallel producers")


# ========== RANDOM GENERATORS ==========


class _Builder:
    """Accumulates goods, consumers and producers with fresh identifiers"""

    def __init__(self, rng: np.random.Generator, max_value, resolution: Fraction):
        self.rng = rng
        self.max_value = to_money(max_value)
        self.resolution = resolution
        self.goods: List[str] = []
        self.consumers: List[Consumer] = []
        self.producers: List[Producer] = []

    def good(self) -> str:
        name = f"g{len(self.goods)}"
        self.goods.append(name)
        return name

    def cost(self) -> Fraction:
        return grid_uniform(self.rng, 0, 1, self.resolution)

    def value(self) -> Fraction:
        return grid_uniform(self.rng, self.resolution, self.max_value, self.resolution)

    def consumer(self, goods) -> Consumer:
        consumer = Consumer(f"c{len(self.consumers)}", {g: self.value() for g in goods})
        self.consumers.append(consumer)
        return consumer

    def producer(self, output, inputs=()) -> Producer:
        producer = Producer(f"p{len(self.producers)}", output, tuple(inputs), self.cost())
        self.producers.append(producer)
        return producer

    def agent_count(self) -> int:
        return len(self.consumers) + len(self.producers)

    def projected(self) -> int:
        """Agents once every unsold good gets an input-less seller"""
        sold = {p.output for p in self.producers}
        return self.agent_count() + sum(1 for g in self.goods if g not in sold)

    def supply_unsold(self):
        sold = {p.output for p in self.producers}
        for good in list(self.goods):
            if good not in sold:
                self.producer(good)

    def build(self, provenance: str) -> TaskDependencyNetwork:
        return _network(self.goods, self.consumers, self.producers, provenance, resolution=self.resolution)


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(0, len(items)))]


def random_tree(
    rng: np.random.Generator, max_agents: int = 12, max_value="2", resolution=DEFAULT_RESOLUTION
) -> TaskDependencyNetwork:
    """One consumer; every good hangs off exactly one undirected path to it"""
    builder = _Builder(rng, max_value, resolution)
    wanted = [builder.good() for _ in range(int(rng.integers(1, 3)))]
    builder.consumer(wanted)
    target = int(rng.integers(2, max(3, max_agents)))
    while builder.projected() < target:
        output = _pick(rng, builder.goods)
        inputs = [(builder.good(), 1) for _ in range(int(rng.integers(0, 3)))]
        builder.producer(output, inputs)
    builder.supply_unsold()
    return builder.build("random tree")


def random_polytree(
    rng: np.random.Generator, max_agents: int = 14, max_value="2", resolution=DEFAULT_RESOLUTION
) -> TaskDependencyNetwork:
    """Several consumers; each new agent attaches to the graph at exactly one vertex"""
    builder = _Builder(rng, max_value, resolution)
    builder.consumer([builder.good()])
    target = int(rng.integers(3, max(4, max_agents)))
    while builder.projected() < target:
        step = int(rng.integers(0, 4))
        anchor = _pick(rng, builder.goods)
        if step <= 1:
            inputs = [(builder.good(), 1) for _ in range(int(rng.integers(0, 3)))]
            builder.producer(anchor, inputs)
        elif step == 2:
            builder.consumer([anchor])
        else:
            fresh = builder.good()
            builder.producer(fresh, [(anchor, 1)])
            builder.consumer([fresh])
    builder.supply_unsold()
    return builder.build("random polytree")


def random_single_input(
    rng: np.random.Generator, max_agents: int = 12, max_value="2", resolution=DEFAULT_RESOLUTION
) -> TaskDependencyNetwork:
    """Every producer needs at most one unit of one input; any DAG shape"""
    builder = _Builder(rng, max_value, resolution)
    goods = [builder.good() for _ in range(int(rng.integers(2, 5)))]
    for index, good in enumerate(goods):
        for _ in range(int(rng.integers(1, 3))):
            if index and rng.random() < 0.6:
                builder.producer(good, [(goods[int(rng.integers(0, index))], 1)])
            else:
                builder.producer(good)
    for _ in range(int(rng.integers(1, 3))):
        count = int(rng.integers(1, min(3, len(goods)) + 1))
        picks = rng.choice(len(goods), size=count, replace=False)
        builder.consumer([goods[int(i)] for i in sorted(picks)])
    while builder.agent_count() > max_agents and len(builder.producers) > len(goods):
        builder.producers.pop()
    return builder.build("random single-input network")


def random_general(
    rng: np.random.Generator, max_agents: int = 12, max_value="3", resolution=DEFAULT_RESOLUTION
) -> TaskDependencyNetwork:
    """Producers with up to three inputs, occasionally two units of one"""
    builder = _Builder(rng, max_value, resolution)
    goods = [builder.good() for _ in range(int(rng.integers(2, 6)))]
    budget = max(len(goods) + 1, max_agents - 2)
    for index, good in enumerate(goods):
        for _ in range(int(rng.integers(1, 3))):
            if len(builder.producers) >= budget:
                break
            inputs = []
            if index:
                count = int(rng.integers(0, min(3, index) + 1))
                for i in sorted(rng.choice(index, size=count, replace=False)):
                    units = 2 if rng.random() < 0.15 else 1
                    inputs.append((goods[int(i)], units))
            builder.producer(good, inputs)
    builder.supply_unsold()
    for _ in range(int(rng.integers(1, 3))):
        count = int(rng.integers(1, min(2, len(goods)) + 1))
        picks = rng.choice(len(goods), size=count, replace=False)
        builder.consumer([goods[int(i)] for i in sorted(picks)])
    return builder.build("random general network")


# ========== REGISTRY ==========

NAMED_FIXTURES: Dict[str, Callable[..., TaskDependencyNetwork]] = {
    "greedy-bad": greedy_bad,
    "exponential": exponential,
    "no-converge": no_converge,
    "chain": chain,
    "two-parallel": two_parallel,
}

RANDOM_FIXTURES: Dict[str, Callable[..., TaskDependencyNetwork]] = {
    "random-tree": random_tree,
    "random-polytree": random_polytree,
    "random-single-input": random_single_input,
    "random-general": random_general,
}


def make_fixture(
    name: str, size: Optional[int] = None, seed: int = 0, value: Optional[str] = None
) -> TaskDependencyNetwork:
    """Build a bundled topology by name; size and seed apply where the family takes them"""
    if name in RANDOM_FIXTURES:
        kwargs = {"max_agents": size} if size else {}
        if value is not None:
            kwargs["max_value"] = value
        return RANDOM_FIXTURES[name](np.random.default_rng(seed), **kwargs)
    if name == "greedy-bad":
        return greedy_bad(value or "16")
    if name == "exponential":
        return exponential(size or 3)
    if name == "chain":
        return chain(size or 1, value=value or "1")
    if name == "two-parallel":
        return two_parallel(value=value or "1")
    if name == "no-converge":
        return no_converge()
    raise NotFoundError(f"Fixture {name}")


def fixture_names() -> List[str]:
    return sorted([*NAMED_FIXTURES, *RANDOM_FIXTURES])
