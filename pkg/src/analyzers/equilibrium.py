#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Equilibrium checking and existence

Competitive equilibrium: at the prices every agent's part of the
allocation maximizes its surplus, and the allocation is feasible. The
lambda-delta relaxation lets consumers fall short of their best surplus
by the buy increment, and producers by their per-unit input slack plus
the sell increment.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple

from loguru import logger

from src.network.model import Allocation, PriceSystem, TaskDependencyNetwork, Violation
from src.network.predicates import (
    agent_surplus,
    allocation_value,
    check_subgraph,
    dead_ends,
    is_valid_solution,
    material_imbalance,
    unfed_producers,
)
from src.shared.logging_setup import StructuredLogger
from src.shared.money import ZERO, format_money, quantize_down, quantize_up

from .efficient import efficient_allocations
from .linear import Clash, Constraint, explain_infeasibility, feasible_point


@dataclass
class CheckResult:
    violations: List[Violation] = field(default_factory=list)
    slacks: Dict[str, Fraction] = field(default_factory=dict)

    @property
    def verified(self) -> bool:
        return not self.violations

    def fail(self, code: str, subject: str, message: str):
        self.violations.append(Violation(code, subject, message))


@dataclass(frozen=True)
class LambdaParams:
    delta_buy: Fraction = ZERO
    delta_sell: Fraction = ZERO
    lam: Mapping[Tuple[str, str], Fraction] = field(default_factory=dict)

    def slack(self, net: TaskDependencyNetwork, producer_id: str) -> Fraction:
        """Per-unit lambdas over the producer's input edges, plus the sell increment"""
        producer = net.producer_map[producer_id]
        units = sum(
            (n * self.lam.get((producer_id, good), ZERO) for good, n in producer.input_units.items()), ZERO
        )
        return units + self.delta_sell


@dataclass(frozen=True)
class BoundReport:
    achieved: Fraction
    efficient: Optional[Fraction]
    general_bound: Fraction
    tight_bound: Fraction

    @property
    def gap(self) -> Optional[Fraction]:
        return None if self.efficient is None else self.efficient - self.achieved

    @property
    def within_general(self) -> Optional[bool]:
        return None if self.gap is None else self.gap <= self.general_bound

    @property
    def within_tight(self) -> Optional[bool]:
        return None if self.gap is None else self.gap <= self.tight_bound


class OutcomeClass(str, Enum):
    LAMBDA_DELTA = "lambda-delta-equilibrium"
    VALID_SOLUTION_ONLY = "valid-solution-only"
    NON_SOLUTION = "non-solution"


# ========== BEST RESPONSES ==========


def consumer_best(net: TaskDependencyNetwork, consumer_id: str, prices: PriceSystem) -> Fraction:
    """Highest surplus the consumer could get at these prices"""
    values = net.consumer_map[consumer_id].values
    return max([ZERO] + [v - prices[g] for g, v in values.items()])


def production_surplus(net: TaskDependencyNetwork, producer_id: str, prices: PriceSystem) -> Fraction:
    """Surplus from producing, paying for every input unit in the network"""
    producer = net.producer_map[producer_id]
    paid = sum((n * prices[g] for g, n in producer.input_units.items()), ZERO)
    return prices[producer.output] - paid - producer.cost


def producer_best(net: TaskDependencyNetwork, producer_id: str, prices: PriceSystem) -> Fraction:
    return max(ZERO, production_surplus(net, producer_id, prices))


def _check_feasibility(net, alloc, result: CheckResult):
    for pid in unfed_producers(net, alloc):
        result.fail("unfed", pid, "active producer misses an input unit")
    for good, n in sorted(material_imbalance(net, alloc).items()):
        result.fail("imbalance", good, f"{n:+d} units provided over acquired")


# ========== COMPETITIVE EQUILIBRIUM ==========


def check_competitive_equilibrium(net: TaskDependencyNetwork, alloc: Allocation, prices: PriceSystem) -> CheckResult:
    check_subgraph(net, alloc)
    result = CheckResult()
    _check_feasibility(net, alloc, result)
    for good, price in sorted(prices.prices.items()):
        if price < 0:
            result.fail("negative-price", good, f"price {price} below zero")

    for consumer in net.consumers:
        sigma = agent_surplus(net, alloc, prices, consumer.id)
        result.slacks[consumer.id] = sigma
        held = [e.good for e in alloc.acquired.get(consumer.id, ())]
        best = consumer_best(net, consumer.id, prices)
        if not held:
            if best > 0:
                result.fail("consumer", consumer.id, f"left out but could gain {best}")
            continue
        optimal = [
            g for g in held
            if g in consumer.values and consumer.values[g] - prices[g] == best
            and all(prices[h] == 0 for h in held if h != g)
        ]
        if not optimal:
            result.fail("consumer", consumer.id, f"surplus {sigma} short of best {best}")

    for producer in net.producers:
        sigma = agent_surplus(net, alloc, prices, producer.id)
        result.slacks[producer.id] = sigma
        if alloc.is_active(producer.id):
            if sigma < 0:
                result.fail("producer", producer.id, f"active at surplus {sigma}")
        else:
            would = production_surplus(net, producer.id, prices)
            if sigma < 0:
                result.fail("producer", producer.id, f"inactive but pays {-sigma} for inputs")
            if would > sigma:
                result.fail("producer", producer.id, f"inactive but producing would gain {would}")
    return result


# ========== EXISTENCE ==========


@dataclass
class ExistenceResult:
    prices: Optional[PriceSystem]
    allocation: Optional[Allocation]
    value: Fraction
    clash: Optional[Clash] = None
    verdicts: List[bool] = field(default_factory=list)

    @property
    def exists(self) -> bool:
        return self.prices is not None

    def describe_clash(self, resolution: Fraction) -> str:
        if self.clash is None:
            return "no single-price explanation found"
        if self.clash.variable is None:
            return "constraints contradict outright"
        good = self.clash.variable
        lower = format_money(self.clash.lower, resolution)
        upper = format_money(self.clash.upper, resolution)
        return f"p({good}) >= {lower} and p({good}) <= {upper}"


def equilibrium_constraints(net: TaskDependencyNetwork, alloc: Allocation) -> List[Constraint]:
    """Price conditions under which every agent's part of `alloc` is a best response"""
    rows: List[Constraint] = []
    for producer in net.producers:
        coeffs: Dict[str, Fraction] = {}
        for good, n in producer.input_units.items():
            coeffs[good] = coeffs.get(good, ZERO) + n
        coeffs[producer.output] = coeffs.get(producer.output, ZERO) - 1
        if alloc.is_active(producer.id):
            rows.append(Constraint(coeffs, -producer.cost, f"{producer.id} recovers cost"))
        else:
            rows.append(Constraint({g: -c for g, c in coeffs.items()}, producer.cost, f"{producer.id} stays idle"))
            for edge in alloc.acquired.get(producer.id, ()):
                rows.append(Constraint({edge.good: Fraction(1)}, ZERO, f"{producer.id} holds {edge.good} free"))

    for consumer in net.consumers:
        held = [e.good for e in alloc.acquired.get(consumer.id, ())]
        if not held:
            for good, value in consumer.values.items():
                rows.append(Constraint({good: Fraction(-1)}, -value, f"{consumer.id} priced out of {good}"))
            continue
        chosen = max(held, key=lambda g: (consumer.values.get(g, ZERO), g))
        rows.append(Constraint({chosen: Fraction(1)}, consumer.values.get(chosen, ZERO), f"{consumer.id} affords {chosen}"))
        for good, value in consumer.values.items():
            if good != chosen:
                rows.append(
                    Constraint(
                        {chosen: Fraction(1), good: Fraction(-1)},
                        consumer.values.get(chosen, ZERO) - value,
                        f"{consumer.id} prefers {chosen} to {good}",
                    )
                )
        for good in held:
            if good != chosen:
                rows.append(Constraint({good: Fraction(1)}, ZERO, f"{consumer.id} holds {good} free"))
    return rows


def _on_grid_witness(net, alloc, point: Dict[str, Fraction]) -> PriceSystem:
    """Exact witness moved onto the grid when that keeps it an equilibrium"""
    exact = PriceSystem({g: point.get(g, ZERO) for g in net.goods})
    for rounding in (quantize_up, quantize_down):
        candidate = PriceSystem({g: rounding(p, net.resolution) for g, p in exact.prices.items()})
        if check_competitive_equilibrium(net, alloc, candidate).verified:
            return candidate
    return exact


def competitive_equilibrium_exists(net: TaskDependencyNetwork) -> ExistenceResult:
    """Witness prices for some efficient allocation, or the clash that rules them out"""
    optima, value = efficient_allocations(net)
    verdicts: List[bool] = []
    found: Optional[Tuple[Allocation, PriceSystem]] = None
    first_clash: Optional[Clash] = None
    for alloc in optima:
        rows = equilibrium_constraints(net, alloc)
        point = feasible_point(rows, net.goods)
        verdicts.append(point is not None)
        if point is not None:
            if found is None:
                found = (alloc, _on_grid_witness(net, alloc, point))
        elif first_clash is None:
            prefer = sorted({g for c in net.consumers for g in c.values})
            first_clash = explain_infeasibility(rows, net.goods, prefer=prefer)

    if len(set(verdicts)) > 1:
        StructuredLogger.warning(
            "Efficient allocations disagree on equilibrium existence",
            optima=len(optima),
            supported=sum(verdicts),
            value=str(value),
        )
    if found is None:
        logger.debug("No competitive equilibrium supports any efficient allocation")
        return ExistenceResult(None, optima[0] if optima else None, value, first_clash, verdicts)
    return ExistenceResult(found[1], found[0], value, None, verdicts)


# ========== LAMBDA-DELTA ==========


def bound_report(
    net: TaskDependencyNetwork, alloc: Allocation, params: LambdaParams, efficient: Optional[Fraction] = None
) -> BoundReport:
    consumers = len(net.consumers) * params.delta_buy
    general = sum((params.slack(net, p.id) for p in net.producers), ZERO) + consumers
    tight = sum(
        (p.input_count * params.delta_buy + params.delta_sell for p in net.producers), ZERO
    ) + consumers
    return BoundReport(allocation_value(net, alloc), efficient, general, tight)


def check_lambda_delta(
    net: TaskDependencyNetwork,
    alloc: Allocation,
    prices: PriceSystem,
    params: LambdaParams,
    efficient: Optional[Fraction] = None,
) -> Tuple[CheckResult, BoundReport]:
    check_subgraph(net, alloc)
    result = CheckResult()
    _check_feasibility(net, alloc, result)
    for consumer in net.consumers:
        sigma = agent_surplus(net, alloc, prices, consumer.id)
        result.slacks[consumer.id] = sigma
        if sigma < 0:
            result.fail("negative-surplus", consumer.id, f"surplus {sigma}")
        best = consumer_best(net, consumer.id, prices)
        if sigma < best - params.delta_buy:
            result.fail("consumer", consumer.id, f"surplus {sigma} more than the buy increment below {best}")
    for producer in net.producers:
        sigma = agent_surplus(net, alloc, prices, producer.id)
        result.slacks[producer.id] = sigma
        if sigma < 0:
            result.fail("negative-surplus", producer.id, f"surplus {sigma}")
        best = producer_best(net, producer.id, prices)
        if sigma < best - params.slack(net, producer.id):
            result.fail("producer", producer.id, f"surplus {sigma} too far below {best}")
    return result, bound_report(net, alloc, params, efficient)


def classify_outcome(net: TaskDependencyNetwork, alloc: Allocation, prices: PriceSystem) -> OutcomeClass:
    """No dead ends means a lambda-delta equilibrium; otherwise a valid solution or nothing"""
    if not dead_ends(net, alloc):
        return OutcomeClass.LAMBDA_DELTA
    if is_valid_solution(net, alloc, prices):
        return OutcomeClass.VALID_SOLUTION_ONLY
    return OutcomeClass.NON_SOLUTION


def protocol_lambdas(net: TaskDependencyNetwork, prices: PriceSystem, asks: Mapping[str, Fraction], delta_buy) -> Dict:
    """Per input edge, the gap between ask and price, never below the buy increment"""
    lam = {}
    for producer in net.producers:
        for good in producer.input_units:
            gap = asks.get(good, prices[good]) - prices[good]
            lam[(producer.id, good)] = max(gap, delta_buy)
    return lam


@dataclass
class ProtocolOutcome:
    classification: OutcomeClass
    params: LambdaParams
    check: CheckResult
    bounds: BoundReport
    decommitted_value: Optional[Fraction] = None


def classify_protocol_outcome(net: TaskDependencyNetwork, trace, efficient: Optional[Fraction] = None) -> ProtocolOutcome:
    """Classify the allocation the protocol cleared and attach its lambda-delta certificate check

    Decommitment does not change the class; its allocation is only valued.
    """
    alloc = trace.allocation
    lam = protocol_lambdas(net, trace.prices, trace.asks, trace.policy.delta_buy)
    params = LambdaParams(trace.policy.delta_buy, trace.policy.delta_sell, lam)
    check, bounds = check_lambda_delta(net, alloc, trace.prices, params, efficient)
    classification = classify_outcome(net, alloc, trace.prices)
    if classification == OutcomeClass.LAMBDA_DELTA and not check.verified:
        logger.warning(f"Outcome without dead ends failed the certificate check: {check.violations[0]}")
        if is_valid_solution(net, alloc, trace.prices):
            classification = OutcomeClass.VALID_SOLUTION_ONLY
        else:
            classification = OutcomeClass.NON_SOLUTION
    decommitted_value = None
    if trace.decommitted is not None:
        decommitted_value = allocation_value(net, trace.decommitted)
    return ProtocolOutcome(classification, params, check, bounds, decommitted_value)
