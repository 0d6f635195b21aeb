"""Post-clearing decommitment: inactive producers walk away from paid inputs"""

from collections import defaultdict
from typing import Dict, List, Tuple

from loguru import logger

from src.network.model import Allocation, Contract, PriceSystem, TaskDependencyNetwork
from src.shared.money import format_money


def pair_contracts(alloc: Allocation, prices: PriceSystem) -> List[Contract]:
    """Contracts of an allocation; pairs buyers and sellers in edge order when none were recorded"""
    if alloc.contracts:
        return list(alloc.contracts)
    buys, sells = defaultdict(list), defaultdict(list)
    for edge in sorted(alloc.edges):
        if edge.target == edge.good:
            sells[edge.good].append(edge)
        else:
            buys[edge.good].append(edge)
    return [
        Contract(good, buyer, seller, prices[good])
        for good in sorted(buys)
        for buyer, seller in zip(buys[good], sells[good])
    ]


def decommit(
    net: TaskDependencyNetwork, alloc: Allocation, prices: PriceSystem
) -> Tuple[Allocation, List[Dict]]:
    """Cancel every positive-price input contract held by an inactive producer, cascading upstream"""
    contracts = pair_contracts(alloc, prices)
    edges = set(alloc.edges)
    log: List[Dict] = []
    producers = sorted(net.producer_map)

    round_no = 0
    while True:
        active = {e.source for e in edges if e.target == e.good}
        cancelled = [
            c
            for c in contracts
            if c.buyer_edge.target in net.producer_map
            and c.buyer_edge.target not in active
            and c.buyer_edge in edges
            and c.price > 0
        ]
        if not cancelled:
            break
        round_no += 1
        for contract in sorted(cancelled, key=lambda c: (producers.index(c.buyer_edge.target), c.buyer_edge)):
            edges.discard(contract.buyer_edge)
            edges.discard(contract.seller_edge)
            log.append(
                {
                    "round": round_no,
                    "producer": contract.buyer_edge.target,
                    "good": contract.good,
                    "unit": contract.buyer_edge.unit,
                    "provider": contract.seller_edge.source,
                    "price": format_money(contract.price, net.resolution),
                }
            )
        contracts = [c for c in contracts if c.buyer_edge in edges]

    if log:
        logger.debug(f"Decommitment cancelled {len(log)} contract(s) in {round_no} round(s)")
    return Allocation(frozenset(edges), tuple(contracts)), log
