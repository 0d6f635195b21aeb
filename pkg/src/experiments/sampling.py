#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Instance sampling and consumer-value calibration

Costs are drawn uniformly from [0, 1] on the money grid. Each consumer's
value is calibrated once per topology: it is the quantile of the cost of
the cheapest solution serving that consumer alone, so that at the default
0.9 quantile a positive-surplus solution exists for it nine times in ten.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Mapping, Optional

import numpy as np
from loguru import logger

from config.config import Config
from src.analyzers.efficient import efficient_allocation
from src.network.fixtures import grid_uniform
from src.network.model import Allocation, TaskDependencyNetwork
from src.shared.error_handler import NoSolutionError, NotFoundError
from src.shared.money import ZERO, quantize_up, to_money


@dataclass
class SampledInstance:
    net: TaskDependencyNetwork
    efficient: Allocation
    value: Fraction
    draws: int = 1


def sample_costs(net: TaskDependencyNetwork, rng: np.random.Generator) -> Dict[str, Fraction]:
    return {p.id: grid_uniform(rng, 0, 1, net.resolution) for p in net.producers}


def min_serving_cost(net: TaskDependencyNetwork, consumer_id: str) -> Optional[Fraction]:
    """Cheapest production cost of any solution serving this consumer alone; None if none exists"""
    consumer = net.consumer_map.get(consumer_id)
    if consumer is None:
        raise NotFoundError(f"Consumer {consumer_id}")
    # dominates any sum of costs, so the oracle serves the consumer whenever it can
    big = sum((p.cost for p in net.producers), ZERO) + 1
    alone = net.restricted_to_consumers([consumer_id]).with_values(
        {consumer_id: {g: big for g in consumer.values}}
    )
    alloc, value = efficient_allocation(alone)
    if not alloc.acquired.get(consumer_id):
        return None
    return big - value


def calibrate_value(
    net: TaskDependencyNetwork,
    consumer_id: str,
    rng: np.random.Generator,
    quantile: Optional[float] = None,
    samples: Optional[int] = None,
) -> Fraction:
    """Quantile of the consumer's cheapest serving cost over random cost draws

    Other consumers' demand is left out; their producers stay available.
    The result is rounded up to the grid and is never below one grid step.
    """
    quantile = Config.CALIBRATION_QUANTILE if quantile is None else quantile
    samples = samples or Config.CALIBRATION_SAMPLES
    if min_serving_cost(net, consumer_id) is None:
        raise NoSolutionError(f"No solution can serve {consumer_id}")

    draws = np.empty(samples)
    for i in range(samples):
        cost = min_serving_cost(net.with_costs(sample_costs(net, rng)), consumer_id)
        draws[i] = float(cost)
    level = float(np.quantile(draws, quantile))
    value = max(net.resolution, quantize_up(to_money(level), net.resolution))
    logger.debug(f"Calibrated {consumer_id} at {value} from {samples} draws (q={quantile})")
    return value


def calibrate_values(
    net: TaskDependencyNetwork,
    rng: np.random.Generator,
    quantile: Optional[float] = None,
    samples: Optional[int] = None,
) -> Dict[str, Dict[str, Fraction]]:
    """One calibrated value per consumer, applied to every good it wants"""
    values = {}
    for consumer in sorted(net.consumers, key=lambda c: c.id):
        value = calibrate_value(net, consumer.id, rng, quantile, samples)
        values[consumer.id] = {g: value for g in consumer.values}
    return values


def sample_instance(
    net: TaskDependencyNetwork,
    rng: np.random.Generator,
    values: Optional[Mapping[str, Mapping[str, Fraction]]] = None,
    max_draws: Optional[int] = None,
) -> SampledInstance:
    """Draw costs until the efficient solution has positive value"""
    if values is None:
        values = calibrate_values(net, rng)
    base = net.with_values(values)
    max_draws = max_draws or Config.MAX_DRAWS_PER_INSTANCE
    for draw in range(1, max_draws + 1):
        candidate = base.with_costs(sample_costs(base, rng))
        alloc, value = efficient_allocation(candidate)
        if value > 0:
            return SampledInstance(candidate, alloc, value, draw)
    raise NoSolutionError(f"No positive-value instance in {max_draws} cost draws")
