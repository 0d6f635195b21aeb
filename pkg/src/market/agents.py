#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Myopic bidding agents

Consumers chase the good with the best surplus one increment at a time.
Producers raise losing input offers while they win their output and
price the output at cost plus the perceived cost of the inputs. Agents
act only on quotes that echo their latest bid for that good.
"""

import copy
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional

from loguru import logger

from src.network.model import Consumer, Producer, TaskDependencyNetwork
from src.shared.money import ZERO

from .auction import BidMessage, Clearing, PriceQuote, Side


@dataclass(frozen=True)
class PolicyConfig:
    variant: str = "plain"  # plain | safe
    include_cost: bool = True
    delta_buy: Fraction = Fraction(1, 100)
    delta_sell: Fraction = Fraction(1, 100)

    def merged(self, block: Optional[Mapping]) -> "PolicyConfig":
        """Layer a policy block (already validated) over this config"""
        if not block:
            return self
        fields = {}
        for key in ("variant", "include_cost"):
            if block.get(key) is not None:
                fields[key] = block[key]
        for key in ("delta_buy", "delta_sell"):
            if block.get(key) is not None:
                fields[key] = Fraction(str(block[key]))
        return PolicyConfig(**{**self.__dict__, **fields})


AGENT_POLICY_KEYS = ("variant", "include_cost")


def perceived_cost(winning: bool, quote: PriceQuote, delta_buy: Fraction) -> Fraction:
    """What the agent expects to pay for one input unit"""
    if winning:
        return quote.price
    return max(quote.ask, quote.price + delta_buy)


class BiddingAgent(ABC):
    """Common bid bookkeeping"""

    def __init__(self, agent_id: str, policy: PolicyConfig):
        self.id = agent_id
        self.policy = policy
        self.sent: Dict[str, int] = {}
        self.quotes: Dict[str, PriceQuote] = {}
        self.buy_offers_placed = 0
        self.max_buy_offer = ZERO
        self._last_id = 0

    def _bid(self, good: str, side: Side, prices) -> BidMessage:
        self._last_id += 1
        bid_id = self._last_id
        self.sent[good] = bid_id
        return BidMessage(self.id, good, side, tuple(prices), bid_id)

    def _count_buys(self, old, new):
        changed = sum(1 for k, price in enumerate(new) if k >= len(old) or old[k] != price)
        self.buy_offers_placed += changed
        self.max_buy_offer = max([self.max_buy_offer, *new])

    def consistent(self, good: str) -> bool:
        quote = self.quotes.get(good)
        return quote is not None and quote.bid_id == self.sent.get(good, 0)

    def observe(self, quote: PriceQuote) -> bool:
        """Keep the quote if it reflects the latest bid; stale quotes are dropped"""
        if quote.bid_id != self.sent.get(quote.good, 0):
            logger.debug(f"{self.id} ignored stale quote on {quote.good}")
            return False
        self.quotes[quote.good] = quote
        return True

    def react(self, quotes: Iterable[PriceQuote]) -> List[BidMessage]:
        for quote in quotes:
            self.observe(quote)
        return self.decide()

    def preview(self, quotes: Iterable[PriceQuote] = ()) -> List[BidMessage]:
        """Bids this agent would place, without changing it"""
        return copy.deepcopy(self).react(quotes)

    @abstractmethod
    def start(self) -> List[BidMessage]:
        ...

    @abstractmethod
    def decide(self) -> List[BidMessage]:
        ...


class ConsumerAgent(BiddingAgent):
    def __init__(self, consumer: Consumer, policy: PolicyConfig):
        super().__init__(consumer.id, policy)
        self.values = dict(consumer.values)
        self.offers: Dict[str, Fraction] = {}
        self.stopped = False

    def start(self) -> List[BidMessage]:
        bids = []
        for good in sorted(self.values):
            self.offers[good] = ZERO
            self._count_buys((), (ZERO,))
            bids.append(self._bid(good, Side.BUY, (ZERO,)))
        return bids

    def winning_goods(self) -> List[str]:
        return [g for g in sorted(self.values) if self.consistent(g) and any(self.quotes[g].winning)]

    def decide(self) -> List[BidMessage]:
        if not all(self.consistent(g) for g in self.values):
            return []
        if self.winning_goods():
            return []

        delta = self.policy.delta_buy
        best, best_surplus = None, None
        for good in sorted(self.values):
            surplus = self.values[good] - self.quotes[good].price - delta
            if best_surplus is None or surplus > best_surplus:
                best, best_surplus = good, surplus
        if best is None or best_surplus < 0:
            if not self.stopped:
                logger.debug(f"Consumer {self.id} stopped bidding")
            self.stopped = True
            return []

        price = self.quotes[best].price + delta
        self._count_buys((self.offers[best],), (price,))
        self.offers[best] = price
        return [self._bid(best, Side.BUY, (price,))]


class ProducerAgent(BiddingAgent):
    def __init__(self, producer: Producer, policy: PolicyConfig):
        super().__init__(producer.id, policy)
        self.output = producer.output
        self.cost = producer.cost
        self.units = producer.input_units
        self.input_offers: Dict[str, List[Fraction]] = {}
        self.output_offer: Optional[Fraction] = None
        self.output_winning = False
        self.last_total: Optional[Fraction] = None
        self.output_offers_placed = 0

    def start(self) -> List[BidMessage]:
        bids = []
        for good, n in self.units.items():
            self.input_offers[good] = [ZERO] * n
            self._count_buys((), self.input_offers[good])
            bids.append(self._bid(good, Side.BUY, self.input_offers[good]))
        if not self.units:
            bids.append(self._offer_output(self.cost if self.policy.include_cost else ZERO))
        return bids

    def observe(self, quote: PriceQuote) -> bool:
        kept = super().observe(quote)
        if kept and quote.good == self.output:
            # kept across re-offers; only the safe variant also demands a consistent output quote
            self.output_winning = bool(quote.winning) and quote.winning[0]
        return kept

    def perceived_total(self) -> Optional[Fraction]:
        if any(g not in self.quotes for g in self.units):
            return None
        total = self.cost if self.policy.include_cost else ZERO
        for good, n in self.units.items():
            quote = self.quotes[good]
            for k in range(n):
                winning = k < len(quote.winning) and quote.winning[k]
                total += perceived_cost(winning, quote, self.policy.delta_buy)
        return total

    def _offer_output(self, price: Fraction) -> BidMessage:
        self.output_offer = price
        self.output_offers_placed += 1
        return self._bid(self.output, Side.SELL, (price,))

    def decide(self) -> List[BidMessage]:
        bids = []
        updated_output = False

        total = self.perceived_total() if self.units else None
        if total is not None:
            if self.output_offer is None:
                bids.append(self._offer_output(total))
                updated_output = True
            elif self.last_total is None or total > self.last_total:
                candidate = max(self.output_offer + self.policy.delta_sell, total)
                if candidate != self.output_offer:
                    bids.append(self._offer_output(candidate))
                    updated_output = True
            self.last_total = total

        if self.policy.variant == "safe":
            may_raise = not updated_output and self.consistent(self.output) and self.output_winning
        else:
            may_raise = self.output_winning
        if may_raise:
            for good in self.units:
                if not self.consistent(good):
                    continue
                winning = self.quotes[good].winning
                old = self.input_offers[good]
                new = [
                    price if (k < len(winning) and winning[k]) else price + self.policy.delta_buy
                    for k, price in enumerate(old)
                ]
                if new != old:
                    self._count_buys(old, new)
                    self.input_offers[good] = new
                    bids.append(self._bid(good, Side.BUY, new))
        return bids


def is_active(producer: Producer, clearings: Mapping[str, Clearing]) -> bool:
    clearing = clearings.get(producer.output)
    return clearing is not None and (producer.id, 0) in clearing.winners


def exposure(producer: Producer, clearings: Mapping[str, Clearing]) -> Fraction:
    """Total owed for won inputs when the output did not sell"""
    if is_active(producer, clearings):
        return ZERO
    owed = ZERO
    for good, n in producer.input_units.items():
        clearing = clearings.get(good)
        if clearing is None:
            continue
        won = sum(1 for k in range(n) if (producer.id, k) in clearing.winners)
        owed += won * clearing.price
    return owed


def build_agents(net: TaskDependencyNetwork, base: PolicyConfig, participants: Iterable[str]):
    """One agent per participating network agent, with per-agent overrides"""
    agents = {}
    for agent_id in participants:
        subject = net.agent(agent_id)
        own = {k: v for k, v in (subject.policy or {}).items() if k in AGENT_POLICY_KEYS}
        policy = base.merged(own)
        if isinstance(subject, Consumer):
            agents[agent_id] = ConsumerAgent(subject, policy)
        else:
            agents[agent_id] = ProducerAgent(subject, policy)
    return agents
