#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Constructive equilibrium prices

Two procedures that build supporting prices for a known efficient
allocation: a fixed-point iteration for networks whose producers take at
most one input unit, and a bound propagation over polytrees that prices
each good exactly once.
"""

from fractions import Fraction
from typing import Dict, Optional, Set

import networkx as nx
from loguru import logger

from src.network.model import (
    Allocation,
    Consumer,
    PriceSystem,
    Producer,
    TaskDependencyNetwork,
    input_edge,
    output_edge,
)
from src.shared.error_handler import NoSolutionError, PreconditionError
from src.shared.money import ZERO

from .efficient import efficient_allocation
from .structure import has_input_complementarities, is_polytree

MAX_ROUNDS = 100_000


def _held_good(alloc: Allocation, consumer_id: str) -> Optional[str]:
    held = alloc.acquired.get(consumer_id, ())
    return held[0].good if held else None


# ========== SINGLE-INPUT NETWORKS ==========


def equilibrium_no_input_complementarities(net: TaskDependencyNetwork, alloc: Allocation) -> PriceSystem:
    """Raise prices from zero until no rule fires"""
    if has_input_complementarities(net):
        raise PreconditionError("Every producer must take at most one input unit")

    prices: Dict[str, Fraction] = {g: ZERO for g in net.goods}
    served = {c.id: _held_good(alloc, c.id) for c in net.consumers}

    for _ in range(MAX_ROUNDS):
        changed = False

        for consumer in net.consumers:
            held = served[consumer.id]
            for good, value in sorted(consumer.values.items()):
                if held is None:
                    if value > prices[good]:  # (a)
                        prices[good] = value
                        changed = True
                elif good != held:
                    kept = consumer.values[held] - prices[held]
                    if kept >= 0 and value - prices[good] > kept:  # (b)
                        prices[good] = value - kept
                        changed = True

        for producer in net.producers:
            output = producer.output
            source = producer.inputs[0][0] if producer.inputs else None
            if alloc.is_active(producer.id):
                floor = producer.cost + (prices[source] if source else ZERO)
                if prices[output] < floor:  # (c), (d)
                    prices[output] = floor
                    changed = True
            elif source is not None and prices[output] > prices[source] + producer.cost:  # (e)
                prices[source] = prices[output] - producer.cost
                changed = True

        if not changed:
            return PriceSystem(prices)
    raise PreconditionError("Prices did not settle; the allocation is not efficient")


# ========== POLYTREES ==========


def single_good_form(net: TaskDependencyNetwork, alloc: Allocation):
    """Replace each multi-good consumer by one wanted good fed by auxiliary producers

    The auxiliary producer for good g costs v_c - v_c(g), where v_c is the
    consumer's best value, so choosing g keeps the consumer's net value.
    """
    goods = list(net.goods)
    consumers, producers = [], list(net.producers)
    edges = set(alloc.edges)
    for consumer in net.consumers:
        if len(consumer.values) == 1:
            consumers.append(consumer)
            continue
        wanted = f"want:{consumer.id}"
        best = max(consumer.values.values())
        goods.append(wanted)
        consumers.append(Consumer(consumer.id, {wanted: best}))
        held = _held_good(alloc, consumer.id)
        for good, value in sorted(consumer.values.items()):
            aux = Producer(f"aux:{consumer.id}:{good}", wanted, ((good, 1),), best - value)
            producers.append(aux)
            if good == held:
                edges.discard(input_edge(good, consumer.id))
                edges.update({input_edge(good, aux.id), output_edge(aux.id, wanted), input_edge(wanted, consumer.id)})
    rewritten = TaskDependencyNetwork(tuple(goods), tuple(consumers), tuple(producers), net.resolution)
    return rewritten, Allocation.of(edges)


class _PolytreePricer:
    def __init__(self, net: TaskDependencyNetwork, alloc: Allocation):
        self.net = net
        self.alloc = alloc
        self.graph = nx.Graph()
        for edge in net.edges:
            self.graph.add_edge(edge.source, edge.target)
        for good in net.goods:
            self.graph.add_node(good)
        # stands in for an unbounded ceiling
        self.ceiling = 1 + 2 * (
            sum((v for c in net.consumers for v in c.values.values()), ZERO)
            + sum((p.cost for p in net.producers), ZERO)
        )
        self.low: Dict[str, Fraction] = {g: ZERO for g in net.goods}
        self.high: Dict[str, Fraction] = {g: self.ceiling for g in net.goods}
        self.prices: Dict[str, Fraction] = {}
        self.goods: Set[str] = set(net.goods)

    def price(self, good: str, amount: Fraction):
        if self.low[good] > self.high[good]:
            raise PreconditionError(f"Price bounds crossed at good {good}")
        self.prices[good] = amount

    def run(self) -> PriceSystem:
        for component in nx.connected_components(self.graph):
            goods = sorted(component & self.goods)
            if not goods:
                continue
            root = goods[0]
            self.set_bounds(root, None)
            self.price(root, self.low[root])
        return PriceSystem({g: self.prices.get(g, self.low[g]) for g in self.net.goods})

    def set_bounds(self, node: str, parent: Optional[str]):
        for neighbour in sorted(self.graph.neighbors(node)):
            if neighbour != parent:
                self.set_bounds(neighbour, node)
        if node in self.goods or parent is None:
            return
        if node in self.net.consumer_map:
            value = self.net.consumer_map[node].values[parent]
            if self.alloc.acquired.get(node):
                self.high[parent] = min(self.high[parent], value)
            else:
                self.low[parent] = max(self.low[parent], value)
            return

        producer = self.net.producer_map[node]
        inputs = [g for g, _ in producer.inputs]
        active = self.alloc.is_active(node)
        for good in [*inputs, producer.output]:
            if good == parent:
                continue
            is_input = good in inputs
            self.price(good, self.high[good] if is_input != active else self.low[good])

        others = [g for g in inputs if g != parent]
        if not active:
            if parent in inputs:
                gain = self.low[producer.output] - sum((self.high[g] for g in others), ZERO) - producer.cost
                self.low[parent] = max(self.low[parent], gain)
            else:
                self.high[parent] = min(self.high[parent], sum((self.high[g] for g in inputs), ZERO) + producer.cost)
        else:
            if parent in inputs:
                room = self.high[producer.output] - sum((self.low[g] for g in others), ZERO) - producer.cost
                self.high[parent] = min(self.high[parent], room)
            else:
                self.low[parent] = max(self.low[parent], sum((self.low[g] for g in inputs), ZERO) + producer.cost)


def equilibrium_polytree(net: TaskDependencyNetwork, alloc: Allocation) -> PriceSystem:
    if not is_polytree(net):
        raise PreconditionError("Network is not a polytree")
    rewritten, mapped = single_good_form(net, alloc)
    prices = _PolytreePricer(rewritten, mapped).run()
    logger.debug(f"Polytree prices set for {len(prices.prices)} good(s)")
    return PriceSystem({g: prices[g] for g in net.goods})


# ========== SUFFICIENT VALUE ==========


def sufficient_value_polytree(
    net: TaskDependencyNetwork, consumer_id: str, good: str, delta_buy: Fraction, delta_sell: Fraction
) -> Fraction:
    """A value for (consumer, good) at which the protocol is sure to serve the consumer"""
    if not is_polytree(net):
        raise PreconditionError("Network is not a polytree")
    consumer = net.consumer_map.get(consumer_id)
    if consumer is None or good not in consumer.values:
        raise NoSolutionError(f"{consumer_id} does not want {good}")

    costs = sum((p.cost for p in net.producers), ZERO)
    alone = net.restricted_to_consumers([consumer_id]).with_values({consumer_id: {good: costs + 1}})
    alloc, value = efficient_allocation(alone)
    if not alloc.acquired.get(consumer_id):
        raise NoSolutionError(f"No solution delivers {good} to {consumer_id}")

    supply_cost = costs + 1 - value
    others = [
        v for c in net.consumers for g, v in c.values.items() if (c.id, g) != (consumer_id, good)
    ]
    gamma = max([supply_cost, *others])
    producers = len(net.producers)
    return (gamma + (2 * delta_buy + delta_sell) * producers) * producers + delta_buy
