#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Validation, feasibility, value and surplus predicates over allocations
"""

from collections import Counter
from fractions import Fraction
from typing import List, Set

import networkx as nx
from loguru import logger

from src.shared.error_handler import ValidationError
from src.shared.money import ZERO, on_grid

from .graph import directed_graph
from .model import Allocation, AgentId, PriceSystem, TaskDependencyNetwork, Violation


# ========== NETWORK VALIDATION ==========


def validate_network(net: TaskDependencyNetwork) -> List[Violation]:
    """Every invariant breach as data; empty list iff the network is well formed"""
    violations: List[Violation] = []
    goods = set(net.goods)

    if net.resolution <= 0:
        violations.append(Violation("resolution", "network", "resolution must be positive"))

    for good, n in Counter(net.goods).items():
        if n > 1:
            violations.append(Violation("duplicate-good", good, "good declared more than once"))

    agent_ids = [a.id for a in (*net.consumers, *net.producers)]
    for agent_id, n in Counter(agent_ids).items():
        if n > 1:
            violations.append(Violation("duplicate-agent", agent_id, "agent declared more than once"))
    for agent_id in sorted(set(agent_ids) & goods):
        violations.append(Violation("id-clash", agent_id, "identifier used for both a good and an agent"))

    def check_amount(subject, what, amount, allow_zero=True):
        if amount < 0 or (amount == 0 and not allow_zero):
            violations.append(Violation(f"nonpositive-{what}", subject, f"{what} {amount} out of range"))
        elif net.resolution > 0 and not on_grid(amount, net.resolution):
            violations.append(Violation("off-grid", subject, f"{what} {amount} is not a multiple of the resolution"))

    for consumer in net.consumers:
        if not consumer.values:
            violations.append(Violation("empty-values", consumer.id, "consumer values no good"))
        for good, value in sorted(consumer.values.items()):
            if good not in goods:
                violations.append(Violation("unknown-good", consumer.id, f"values unknown good {good}"))
            check_amount(consumer.id, "value", value, allow_zero=False)

    for producer in net.producers:
        if producer.output not in goods:
            violations.append(Violation("unknown-good", producer.id, f"outputs unknown good {producer.output}"))
        seen = set()
        for good, units in producer.inputs:
            if good not in goods:
                violations.append(Violation("unknown-good", producer.id, f"needs unknown good {good}"))
            if units < 1:
                violations.append(Violation("units", producer.id, f"input {good} needs {units} units"))
            if good in seen:
                violations.append(Violation("duplicate-input", producer.id, f"input {good} listed twice"))
            seen.add(good)
        if producer.output in seen:
            violations.append(Violation("output-in-inputs", producer.id, "output in input set"))
        if producer.cost < 0:
            violations.append(Violation("negative-cost", producer.id, f"cost {producer.cost} is negative"))
        else:
            check_amount(producer.id, "cost", producer.cost)

    if not any(v.code in ("id-clash", "output-in-inputs") for v in violations):
        graph = directed_graph(net)
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            cycle = None
        if cycle:
            path = " -> ".join(str(u) for u, _ in cycle)
            violations.append(Violation("cycle", cycle[0][0], f"directed cycle {path}"))

    if not any(v.severity == "error" for v in violations):
        from .levels import c_level

        for producer in net.producers:
            if c_level(net, producer.id) is None:
                violations.append(
                    Violation("inert", producer.id, "no consumer is reachable from its output", "warning")
                )

    if violations:
        logger.debug(f"Network validation found {len(violations)} issue(s)")
    return violations


def blocking(violations: List[Violation]) -> List[Violation]:
    return [v for v in violations if v.severity == "error"]


# ========== ALLOCATION PREDICATES ==========


def check_subgraph(net: TaskDependencyNetwork, alloc: Allocation):
    unknown = alloc.edges - net.edges
    if unknown:
        edge = sorted(unknown)[0]
        raise ValidationError(f"Allocation edge {tuple(edge)} is not in the network", field="allocation")


def material_imbalance(net: TaskDependencyNetwork, alloc: Allocation) -> dict:
    """Per good, units provided minus units acquired (zero entries omitted)"""
    balance = Counter()
    for edge in alloc.edges:
        if edge.target == edge.good:
            balance[edge.good] += 1
        else:
            balance[edge.good] -= 1
    return {g: n for g, n in balance.items() if n != 0}


def unfed_producers(net: TaskDependencyNetwork, alloc: Allocation) -> List[AgentId]:
    """Active producers missing at least one input unit"""
    missing = []
    for producer in net.producers:
        if alloc.is_active(producer.id):
            held = set(alloc.acquired.get(producer.id, ()))
            if any(edge not in held for edge in producer.input_edges()):
                missing.append(producer.id)
    return missing


def is_feasible(net: TaskDependencyNetwork, alloc: Allocation) -> bool:
    check_subgraph(net, alloc)
    return not unfed_producers(net, alloc) and not material_imbalance(net, alloc)


def is_solution(net: TaskDependencyNetwork, alloc: Allocation) -> Set[AgentId]:
    """Consumers served by the allocation"""
    return {c.id for c in net.consumers if alloc.acquired.get(c.id)}


def consumer_value(net: TaskDependencyNetwork, alloc: Allocation, consumer_id: AgentId) -> Fraction:
    consumer = net.consumer_map[consumer_id]
    held = [consumer.values.get(e.good, ZERO) for e in alloc.acquired.get(consumer_id, ())]
    return max(held, default=ZERO)


def allocation_value(net: TaskDependencyNetwork, alloc: Allocation) -> Fraction:
    value = ZERO
    for consumer in net.consumers:
        value += consumer_value(net, alloc, consumer.id)
    for producer in net.producers:
        if alloc.is_active(producer.id):
            value -= producer.cost
    return value


def agent_surplus(
    net: TaskDependencyNetwork, alloc: Allocation, prices: PriceSystem, agent: AgentId
) -> Fraction:
    subject = net.agent(agent)
    paid = sum((prices[e.good] for e in alloc.acquired.get(agent, ())), ZERO)
    if net.is_consumer(agent):
        return consumer_value(net, alloc, agent) - paid
    earned = sum((prices[e.good] for e in alloc.provided.get(agent, ())), ZERO)
    cost = subject.cost if alloc.is_active(agent) else ZERO
    return earned - paid - cost


def dead_ends(net: TaskDependencyNetwork, alloc: Allocation) -> Set[AgentId]:
    return {
        p.id
        for p in net.producers
        if not alloc.is_active(p.id) and alloc.acquired.get(p.id)
    }


def is_valid_solution(net: TaskDependencyNetwork, alloc: Allocation, prices: PriceSystem) -> bool:
    if not is_feasible(net, alloc) or not is_solution(net, alloc):
        return False
    for consumer_id in is_solution(net, alloc):
        consumer = net.consumer_map[consumer_id]
        held = [e.good for e in alloc.acquired[consumer_id]]
        if not _pays_for_one(consumer.values, held, prices):
            return False
    for producer in net.producers:
        if alloc.is_active(producer.id) and agent_surplus(net, alloc, prices, producer.id) < 0:
            return False
    return True


def _pays_for_one(values, held, prices: PriceSystem) -> bool:
    """One held good within value, every other held good free"""
    for i, good in enumerate(held):
        if good in values and prices[good] <= values[good]:
            if all(prices[h] == 0 for j, h in enumerate(held) if j != i):
                return True
    return False
