"""Distance levels and the network parameters that bound bidding"""

from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional

from src.shared.money import ZERO

from .model import AgentId, TaskDependencyNetwork


class NetworkParameters(NamedTuple):
    phi: int  # max C-level over producers with one
    upsilon: int  # max unit-edges into any agent
    max_value: Fraction  # R


def c_level(net: TaskDependencyNetwork, producer: AgentId) -> Optional[int]:
    """Longest producer distance to consumption; None when nothing consumes the output"""
    return _c_levels(net).get(producer)


def s_level(net: TaskDependencyNetwork, producer: AgentId) -> Optional[int]:
    """Longest producer distance back to an input-less producer; None if some input has no provider path"""
    return _s_levels(net).get(producer)


def is_inert(net: TaskDependencyNetwork, producer: AgentId) -> bool:
    return c_level(net, producer) is None


def _c_levels(net: TaskDependencyNetwork) -> dict:
    cached = net.__dict__.get("_c_levels")
    if cached is not None:
        return cached

    @lru_cache(maxsize=None)
    def level(pid):
        output = net.producer_map[pid].output
        buyers = [agent for agent, _ in net.buyers.get(output, ())]
        consumed = any(net.is_consumer(b) for b in buyers)
        downstream = [level(b) for b in buyers if not net.is_consumer(b)]
        downstream = [d for d in downstream if d is not None]
        if downstream:
            return 1 + max(downstream)
        return 1 if consumed else None

    levels = {p.id: level(p.id) for p in net.producers}
    net.__dict__["_c_levels"] = levels
    return levels


def _s_levels(net: TaskDependencyNetwork) -> dict:
    cached = net.__dict__.get("_s_levels")
    if cached is not None:
        return cached

    @lru_cache(maxsize=None)
    def level(pid):
        producer = net.producer_map[pid]
        if not producer.inputs:
            return 0
        upstream = [level(s) for good in producer.input_units for s in net.sellers.get(good, ())]
        upstream = [u for u in upstream if u is not None]
        return 1 + max(upstream) if upstream else None

    levels = {p.id: level(p.id) for p in net.producers}
    net.__dict__["_s_levels"] = levels
    return levels


def network_parameters(net: TaskDependencyNetwork) -> NetworkParameters:
    phi = max((lvl for lvl in _c_levels(net).values() if lvl is not None), default=0)
    # Upsilon is defined over producer inputs only; consumer goods are counted
    # too since a consumer raises each valued good separately, and input units
    # rather than goods since every unit slot is raised on its own.
    upsilon = max(
        [p.input_count for p in net.producers] + [len(c.values) for c in net.consumers],
        default=0,
    )
    max_value = max((v for c in net.consumers for v in c.values.values()), default=ZERO)
    return NetworkParameters(phi, upsilon, max_value)


def bid_bounds(net: TaskDependencyNetwork, delta_buy: Fraction):
    """Highest buy offer any agent can place, and the per-agent buy-offer count bound"""
    phi, upsilon, max_value = network_parameters(net)
    price_cap = max_value + 2 * phi * delta_buy
    count_cap = upsilon * price_cap / delta_buy + upsilon
    return price_cap, count_cap


def meaningful_bid_bound(net: TaskDependencyNetwork, delta_buy: Fraction, delta_sell: Fraction) -> Fraction:
    """Cap on bids from consumers and from producers active when bidding"""
    phi, _, max_value = network_parameters(net)
    price_cap = max_value + 2 * phi * delta_buy
    bound = ZERO
    for consumer in net.consumers:
        bound += len(consumer.values) * (max_value / delta_buy + 1)
    for producer in net.producers:
        bound += producer.input_count * (price_cap / delta_buy + 1)
        bound += price_cap / max(delta_buy, delta_sell) + 1
    return bound
