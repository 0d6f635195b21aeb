#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Efficient allocation oracle

Two independent searches over feasible allocations in which every
consumer takes at most one unit and every acquired input feeds an active
producer. Dropping anything else never lowers value, so the optimum
value over this family is the optimum over all feasible allocations.

- exhaustive: every active-producer subset, with an exact consumer
  assignment absorbing the surplus units of each good
- branch-and-bound: consumers choose goods first, then goods are filled
  downstream to upstream by choosing exactly as many sellers as buyers
"""

from functools import lru_cache
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Tuple

from loguru import logger

from config.config import Config
from src.network.graph import good_order
from src.network.model import Allocation, TaskDependencyNetwork, input_edge
from src.shared.error_handler import PreconditionError
from src.shared.logging_setup import log_performance
from src.shared.money import ZERO

Choice = Dict[str, str]  # consumer -> good


def build_allocation(net: TaskDependencyNetwork, active, choice: Choice) -> Allocation:
    edges = set()
    for pid in active:
        producer = net.producer_map[pid]
        edges.add(producer.output_edge())
        edges.update(producer.input_edges())
    for cid, good in choice.items():
        edges.add(input_edge(good, cid))
    return Allocation.of(edges)


def _value(net: TaskDependencyNetwork, active, choice: Choice) -> Fraction:
    gained = sum((net.consumer_map[c].values[g] for c, g in choice.items()), ZERO)
    spent = sum((net.producer_map[p].cost for p in active), ZERO)
    return gained - spent


# ========== EXHAUSTIVE ==========


def _best_assignment(net: TaskDependencyNetwork, excess: Dict[str, int]):
    """Consumers absorbing exactly `excess` units per good, at maximum total value"""
    consumers = sorted(net.consumers, key=lambda c: c.id)
    goods = sorted(excess)

    @lru_cache(maxsize=None)
    def solve(index: int, remaining: Tuple[int, ...]):
        if index == len(consumers):
            return (ZERO, ()) if not any(remaining) else None
        if sum(remaining) > len(consumers) - index:
            return None
        best = solve(index + 1, remaining)
        consumer = consumers[index]
        for position, good in enumerate(goods):
            if remaining[position] and good in consumer.values:
                rest = list(remaining)
                rest[position] -= 1
                found = solve(index + 1, tuple(rest))
                if found is None:
                    continue
                value = found[0] + consumer.values[good]
                if best is None or value > best[0]:
                    best = (value, ((consumer.id, good),) + found[1])
        return best

    return solve(0, tuple(excess[g] for g in goods))


def exhaustive_efficient(net: TaskDependencyNetwork) -> Tuple[Allocation, Fraction]:
    producers = sorted(net.producer_map)
    if len(producers) > Config.EXHAUSTIVE_LIMIT:
        raise PreconditionError(
            f"Exhaustive search covers at most {Config.EXHAUSTIVE_LIMIT} producers, got {len(producers)}"
        )
    best_value, best = ZERO, (frozenset(), {})
    for mask in range(1, 2 ** len(producers)):
        active = [producers[i] for i in range(len(producers)) if mask >> i & 1]
        balance: Dict[str, int] = {}
        for pid in active:
            producer = net.producer_map[pid]
            balance[producer.output] = balance.get(producer.output, 0) + 1
            for good, n in producer.input_units.items():
                balance[good] = balance.get(good, 0) - n
        if any(n < 0 for n in balance.values()):
            continue
        excess = {g: n for g, n in balance.items() if n}
        if sum(excess.values()) > len(net.consumers):
            continue
        found = _best_assignment(net, excess)
        if found is None:
            continue
        value = found[0] - sum((net.producer_map[p].cost for p in active), ZERO)
        if value > best_value:
            best_value, best = value, (frozenset(active), dict(found[1]))
    return build_allocation(net, *best), best_value


# ========== BRANCH AND BOUND ==========


class _Search:
    """Depth-first search with an optimistic-value bound"""

    def __init__(self, net: TaskDependencyNetwork, collect_all: bool, limit: int):
        self.net = net
        self.collect_all = collect_all
        self.limit = limit
        self.consumers = sorted(net.consumers, key=lambda c: c.id)
        self.goods = list(reversed(good_order(net)))
        self.sellers = {
            g: sorted(net.sellers.get(g, ()), key=lambda p: (net.producer_map[p].cost, p))
            for g in net.goods
        }
        self.best = ZERO
        self.found: Dict[frozenset, Tuple[frozenset, Choice]] = {}
        self.record(ZERO, frozenset(), {})

    def promising(self, optimistic: Fraction) -> bool:
        return optimistic >= self.best if self.collect_all else optimistic > self.best

    def record(self, value: Fraction, active: frozenset, choice: Choice):
        if value > self.best:
            self.best = value
            self.found = {}
        if value == self.best and len(self.found) < self.limit:
            alloc = build_allocation(self.net, active, choice)
            self.found.setdefault(alloc.edges, (active, dict(choice)))

    def assign(self, index: int, choice: Choice, gained: Fraction):
        rest = sum((max(c.values.values()) for c in self.consumers[index:]), ZERO)
        if not self.promising(gained + rest):
            return
        if index == len(self.consumers):
            demand: Dict[str, int] = {}
            for good in choice.values():
                demand[good] = demand.get(good, 0) + 1
            self.supply(0, demand, gained, frozenset(), choice)
            return
        consumer = self.consumers[index]
        for good in sorted(consumer.values, key=lambda g: (-consumer.values[g], g)):
            choice[consumer.id] = good
            self.assign(index + 1, choice, gained + consumer.values[good])
            del choice[consumer.id]
        self.assign(index + 1, choice, gained)

    def supply(self, position: int, demand: Dict[str, int], value: Fraction, active: frozenset, choice):
        if not self.promising(value):
            return
        if position == len(self.goods):
            self.record(value, active, choice)
            return
        good = self.goods[position]
        need = demand.get(good, 0)
        sellers = self.sellers[good]
        if need > len(sellers):
            return
        if need == 0:
            self.supply(position + 1, demand, value, active, choice)
            return
        cheapest = sum((self.net.producer_map[p].cost for p in sellers[:need]), ZERO)
        if not self.promising(value - cheapest):
            return
        for picked in combinations(sellers, need):
            upstream = dict(demand)
            cost = ZERO
            for pid in picked:
                producer = self.net.producer_map[pid]
                cost += producer.cost
                for g, n in producer.input_units.items():
                    upstream[g] = upstream.get(g, 0) + n
            self.supply(position + 1, upstream, value - cost, active | set(picked), choice)


def _branch_and_bound(net: TaskDependencyNetwork, collect_all: bool, limit: int) -> _Search:
    search = _Search(net, collect_all, limit)
    search.assign(0, {}, ZERO)
    return search


@log_performance(threshold_ms=2000)
def efficient_allocation(net: TaskDependencyNetwork, mode: str = "auto") -> Tuple[Allocation, Fraction]:
    """A feasible allocation of maximum value; the empty allocation when nothing beats zero"""
    if mode == "exhaustive":
        return exhaustive_efficient(net)
    search = _branch_and_bound(net, collect_all=False, limit=1)
    active, choice = next(iter(search.found.values()))
    logger.debug(f"Efficient value {search.best} with {len(active)} active producer(s)")
    return build_allocation(net, active, choice), search.best


def efficient_allocations(net: TaskDependencyNetwork, limit: Optional[int] = None) -> Tuple[List[Allocation], Fraction]:
    """Every optimum up to `limit`, in canonical edge order"""
    search = _branch_and_bound(net, collect_all=True, limit=limit or Config.MAX_OPTIMA)
    allocations = [build_allocation(net, *found) for found in search.found.values()]
    allocations.sort(key=lambda a: (len(a.edges), sorted(a.edges)))
    if len(allocations) > 1:
        logger.debug(f"{len(allocations)} efficient allocations at value {search.best}")
    return allocations, search.best


def efficient_value(net: TaskDependencyNetwork) -> Fraction:
    return efficient_allocation(net)[1]
