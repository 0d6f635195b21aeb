#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Task dependency network model

Goods and agents form a bipartite DAG. Producers turn a fixed recipe of
input units into one unit of output at a cost; consumers value single
units of goods. Every unit of every input is its own edge, subscripted
0..units-1, and that order is the canonical tie order everywhere.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Tuple

from src.shared.error_handler import NotFoundError
from src.shared.money import DEFAULT_RESOLUTION

GoodId = str
AgentId = str


class Edge(NamedTuple):
    """One unit-edge of the network

    Output edges run producer -> good with unit 0. Input and consumption
    edges run good -> agent with the unit subscript.
    """

    source: str
    target: str
    good: GoodId
    unit: int = 0


def output_edge(producer: AgentId, good: GoodId) -> Edge:
    return Edge(producer, good, good, 0)


def input_edge(good: GoodId, agent: AgentId, unit: int = 0) -> Edge:
    return Edge(good, agent, good, unit)


class Violation(NamedTuple):
    code: str
    subject: str
    message: str
    severity: str = "error"

    def __str__(self):
        return f"[{self.severity}] {self.code} at {self.subject}: {self.message}"


@dataclass(frozen=True)
class Consumer:
    id: AgentId
    values: Mapping[GoodId, Fraction]
    policy: Optional[Mapping[str, Any]] = field(default=None, compare=False)

    @property
    def goods(self) -> List[GoodId]:
        return sorted(self.values)

    def input_edges(self) -> List[Edge]:
        return [input_edge(g, self.id) for g in self.goods]


@dataclass(frozen=True)
class Producer:
    id: AgentId
    output: GoodId
    inputs: Tuple[Tuple[GoodId, int], ...]
    cost: Fraction
    policy: Optional[Mapping[str, Any]] = field(default=None, compare=False)

    @property
    def input_units(self) -> Dict[GoodId, int]:
        units: Dict[GoodId, int] = {}
        for good, n in self.inputs:
            units[good] = units.get(good, 0) + n
        return units

    @property
    def input_count(self) -> int:
        return sum(self.input_units.values())

    def input_edges(self) -> List[Edge]:
        return [
            input_edge(good, self.id, k)
            for good, n in self.input_units.items()
            for k in range(n)
        ]

    def output_edge(self) -> Edge:
        return output_edge(self.id, self.output)


@dataclass(frozen=True)
class TaskDependencyNetwork:
    goods: Tuple[GoodId, ...]
    consumers: Tuple[Consumer, ...] = ()
    producers: Tuple[Producer, ...] = ()
    resolution: Fraction = DEFAULT_RESOLUTION
    protocol: Optional[Mapping[str, Any]] = field(default=None, compare=False)
    provenance: Optional[str] = field(default=None, compare=False)

    @cached_property
    def agents(self) -> Dict[AgentId, Any]:
        table: Dict[AgentId, Any] = {}
        for agent in (*self.consumers, *self.producers):
            table.setdefault(agent.id, agent)
        return table

    @cached_property
    def consumer_map(self) -> Dict[AgentId, Consumer]:
        return {c.id: c for c in self.consumers}

    @cached_property
    def producer_map(self) -> Dict[AgentId, Producer]:
        return {p.id: p for p in self.producers}

    @cached_property
    def edges(self) -> FrozenSet[Edge]:
        found = set()
        for consumer in self.consumers:
            found.update(consumer.input_edges())
        for producer in self.producers:
            found.add(producer.output_edge())
            found.update(producer.input_edges())
        return frozenset(found)

    @cached_property
    def sellers(self) -> Dict[GoodId, List[AgentId]]:
        table: Dict[GoodId, List[AgentId]] = {g: [] for g in self.goods}
        for producer in self.producers:
            table.setdefault(producer.output, []).append(producer.id)
        return table

    @cached_property
    def buyers(self) -> Dict[GoodId, List[Tuple[AgentId, int]]]:
        """Buyers per good with the number of units each needs"""
        table: Dict[GoodId, List[Tuple[AgentId, int]]] = {g: [] for g in self.goods}
        for consumer in self.consumers:
            for good in consumer.goods:
                table.setdefault(good, []).append((consumer.id, 1))
        for producer in self.producers:
            for good, n in producer.input_units.items():
                table.setdefault(good, []).append((producer.id, n))
        return table

    def agent(self, agent_id: AgentId):
        try:
            return self.agents[agent_id]
        except KeyError:
            raise NotFoundError(f"Agent {agent_id}") from None

    def is_consumer(self, agent_id: AgentId) -> bool:
        return agent_id in self.consumer_map

    def with_costs(self, costs: Mapping[AgentId, Fraction]) -> "TaskDependencyNetwork":
        producers = tuple(
            Producer(p.id, p.output, p.inputs, costs.get(p.id, p.cost), p.policy)
            for p in self.producers
        )
        return TaskDependencyNetwork(
            self.goods, self.consumers, producers, self.resolution, self.protocol, self.provenance
        )

    def with_values(self, values: Mapping[AgentId, Mapping[GoodId, Fraction]]) -> "TaskDependencyNetwork":
        consumers = tuple(
            Consumer(c.id, dict(values.get(c.id, c.values)), c.policy) for c in self.consumers
        )
        return TaskDependencyNetwork(
            self.goods, consumers, self.producers, self.resolution, self.protocol, self.provenance
        )

    def restricted_to_consumers(self, keep: Iterable[AgentId]) -> "TaskDependencyNetwork":
        keep = set(keep)
        consumers = tuple(c for c in self.consumers if c.id in keep)
        return TaskDependencyNetwork(
            self.goods, consumers, self.producers, self.resolution, self.protocol, self.provenance
        )


class Contract(NamedTuple):
    """A cleared trade: the buyer's unit-edge, the seller's output edge, the price"""

    good: GoodId
    buyer_edge: Edge
    seller_edge: Edge
    price: Fraction


@dataclass(frozen=True)
class Allocation:
    edges: FrozenSet[Edge] = frozenset()
    contracts: Tuple[Contract, ...] = field(default=(), compare=False)

    @classmethod
    def of(cls, edges: Iterable[Edge]) -> "Allocation":
        return cls(frozenset(edges))

    @cached_property
    def acquired(self) -> Dict[AgentId, List[Edge]]:
        """Edges into agents, per acquiring agent"""
        table: Dict[AgentId, List[Edge]] = {}
        for edge in sorted(self.edges):
            if edge.source == edge.good:
                table.setdefault(edge.target, []).append(edge)
        return table

    @cached_property
    def provided(self) -> Dict[AgentId, List[Edge]]:
        table: Dict[AgentId, List[Edge]] = {}
        for edge in sorted(self.edges):
            if edge.target == edge.good:
                table.setdefault(edge.source, []).append(edge)
        return table

    def is_active(self, producer: AgentId) -> bool:
        return producer in self.provided

    def to_records(self) -> List[Dict[str, Any]]:
        return [
            {"from": e.source, "to": e.target, "good": e.good, "unit": e.unit}
            for e in sorted(self.edges)
        ]

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]]) -> "Allocation":
        return cls.of(Edge(r["from"], r["to"], r["good"], int(r.get("unit", 0))) for r in records)


@dataclass(frozen=True)
class PriceSystem:
    prices: Mapping[GoodId, Fraction]

    def __getitem__(self, good: GoodId) -> Fraction:
        return self.prices.get(good, Fraction(0))

    def with_price(self, good: GoodId, price: Fraction) -> "PriceSystem":
        merged = dict(self.prices)
        merged[good] = price
        return PriceSystem(merged)
