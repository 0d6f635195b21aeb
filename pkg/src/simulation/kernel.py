#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Deterministic discrete-event kernel

Agents and auctions exchange messages over reliable channels. Each
channel delivers in send order; delays come from the schedule. All
messages due at a tick are handled together: an auction takes every bid
in the batch and then quotes once, an agent reads every quote and then
decides once. The kernel sees the whole system, so it detects quiescence
and quasi-quiescence directly and checks the run against the protocol's
guarantees as it goes.
"""

import heapq
import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Set

from loguru import logger

from config.config import Config
from src.market.agents import (
    BiddingAgent,
    ConsumerAgent,
    PolicyConfig,
    ProducerAgent,
    build_agents,
)
from src.market.auction import AuctionState, BidMessage, Clearing, PriceQuote, Side
from src.network.levels import bid_bounds, is_inert
from src.network.model import (
    Allocation,
    Contract,
    PriceSystem,
    TaskDependencyNetwork,
    input_edge,
    output_edge,
)
from src.network.predicates import blocking, dead_ends, is_valid_solution, validate_network
from src.shared.error_handler import EventCapExceeded, NetworkInvalidError
from src.shared.money import format_money

from .decommit import decommit
from .schedule import Schedule


@dataclass(order=True)
class Message:
    delivery_tick: int
    msg_id: int
    sender: str = field(compare=False)
    receiver: str = field(compare=False)
    payload: Any = field(compare=False)
    send_tick: int = field(compare=False, default=0)


@dataclass
class RunTrace:
    seed: int
    delay: str
    policy: PolicyConfig
    events: List[Dict] = field(default_factory=list)
    event_count: int = 0
    bids_total: int = 0
    bids_meaningful: int = 0
    bids_by_agent: Dict[str, int] = field(default_factory=dict)
    buy_offer_counts: Dict[str, int] = field(default_factory=dict)
    max_buy_offer: Fraction = Fraction(0)
    rejections: int = 0
    quasi_quiescence_tick: Optional[int] = None
    quiescence_tick: int = 0
    prices: PriceSystem = field(default_factory=lambda: PriceSystem({}))
    asks: Dict[str, Fraction] = field(default_factory=dict)
    clearings: Dict[str, Clearing] = field(default_factory=dict)
    allocation: Allocation = field(default_factory=Allocation)
    dead_ends: Set[str] = field(default_factory=set)
    decommitted: Optional[Allocation] = None
    decommit_log: List[Dict] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    @property
    def final_allocation(self) -> Allocation:
        return self.decommitted if self.decommitted is not None else self.allocation

    def summary(self, resolution: Fraction) -> Dict[str, Any]:
        def money(amount):
            return format_money(amount, resolution)

        return {
            "kind": "summary",
            "seed": self.seed,
            "delay": self.delay,
            "policy": self.policy.variant,
            "events": self.event_count,
            "bids_total": self.bids_total,
            "bids_meaningful": self.bids_meaningful,
            "quasi_quiescence_tick": self.quasi_quiescence_tick,
            "quiescence_tick": self.quiescence_tick,
            "prices": {g: money(p) for g, p in sorted(self.prices.prices.items())},
            "asks": {g: money(a) for g, a in sorted(self.asks.items())},
            "allocation": self.allocation.to_records(),
            "dead_ends": sorted(self.dead_ends),
            "decommitted": self.decommitted.to_records() if self.decommitted is not None else None,
            "decommit_log": self.decommit_log,
            "violations": self.violations,
        }


def resolve_policy(
    net: TaskDependencyNetwork, overrides: Optional[Dict] = None, base: Optional[PolicyConfig] = None
) -> PolicyConfig:
    """Defaults, then the network's protocol block, then explicit overrides"""
    base = base or PolicyConfig(
        delta_buy=Fraction(Config.DELTA_BUY), delta_sell=Fraction(Config.DELTA_SELL)
    )
    return base.merged(net.protocol).merged(overrides)


class SimulationKernel:
    def __init__(
        self,
        net: TaskDependencyNetwork,
        policy: PolicyConfig,
        schedule: Schedule,
        event_cap: Optional[int] = None,
        record_trace: bool = False,
        monitor: bool = True,
    ):
        problems = blocking(validate_network(net))
        if problems:
            raise NetworkInvalidError(problems)

        self.net = net
        self.policy = policy
        self.schedule = schedule
        self.event_cap = event_cap or Config.EVENT_CAP
        self.record_trace = record_trace
        self.monitor = monitor

        participants = [c.id for c in net.consumers] + [
            p.id for p in net.producers if not is_inert(net, p.id)
        ]
        self.agents: Dict[str, BiddingAgent] = build_agents(net, policy, participants)
        self.auctions: Dict[str, AuctionState] = {}
        for good in net.goods:
            sellers = [s for s in net.sellers.get(good, ()) if s in self.agents]
            buyers = [b for b, _ in net.buyers.get(good, ()) if b in self.agents]
            if not sellers and not buyers:
                continue
            # first quote waits for every adjacent participant
            registered = set(sellers) | set(buyers)
            self.auctions[good] = AuctionState(
                good, policy.delta_buy, policy.delta_sell, registered=registered, awaiting=set(registered)
            )

        self.tick = 0
        self.queue: List[Message] = []
        self._msg_ids = itertools.count(1)
        self._arrivals = itertools.count(1)
        self._event_seq = itertools.count(1)
        self.channel_last: Dict[tuple, int] = {}
        self.pending_to: Dict[str, Dict[int, Message]] = defaultdict(dict)
        self.inflight_from: Counter = Counter()
        self.inflight_buys: Counter = Counter()
        self.clearings: Dict[str, Clearing] = {
            g: a.compute_clearing() for g, a in self.auctions.items()
        }
        self.trace = RunTrace(schedule.seed, schedule.model.describe(), policy)
        self._qq_snapshot = None

    # ========== MESSAGING ==========

    def _record(self, good: str, kind: str, **payload):
        if self.record_trace:
            self.trace.events.append(
                {"seq": next(self._event_seq), "tick": self.tick, "good": good, "kind": kind, "payload": payload}
            )

    def _send(self, sender: str, receiver: str, payload):
        channel = (sender, receiver)
        delivery = max(self.tick + self.schedule.delay(sender, receiver), self.channel_last.get(channel, 0))
        self.channel_last[channel] = delivery
        msg = Message(delivery, next(self._msg_ids), sender, receiver, payload, self.tick)
        heapq.heappush(self.queue, msg)
        self.pending_to[receiver][msg.msg_id] = msg
        self.inflight_from[sender] += 1

    def _active_now(self, producer_id: str) -> bool:
        output = self.net.producer_map[producer_id].output
        clearing = self.clearings.get(output)
        return clearing is not None and (producer_id, 0) in clearing.winners

    def _send_bid(self, agent: BiddingAgent, bid: BidMessage):
        trace = self.trace
        trace.bids_total += 1
        trace.bids_by_agent[agent.id] = trace.bids_by_agent.get(agent.id, 0) + 1
        if isinstance(agent, ConsumerAgent) or self._active_now(agent.id):
            trace.bids_meaningful += 1
        if bid.side == Side.BUY:
            self.inflight_buys[agent.id] += 1
        self._send(agent.id, bid.good, bid)

    def _broadcast(self, auction: AuctionState):
        clearing = self.clearings[auction.good]
        for bidder in auction.bidders:
            quote = auction.quote_for(bidder, clearing)
            self._record(
                auction.good,
                "quote",
                recipient=bidder,
                price=str(quote.price),
                ask=str(quote.ask),
                winning=list(quote.winning),
                bid_id=quote.bid_id,
            )
            self._send(auction.good, bidder, quote)

    # ========== EVENT LOOP ==========

    def start(self):
        for agent_id in sorted(self.agents):
            agent = self.agents[agent_id]
            for bid in agent.start():
                self._send_bid(agent, bid)
        for auction in self.auctions.values():
            if auction.ready_to_open:
                auction.open()
                self._broadcast(auction)

    def step(self):
        self.tick = self.queue[0].delivery_tick
        batch: List[Message] = []
        while self.queue and self.queue[0].delivery_tick == self.tick:
            msg = heapq.heappop(self.queue)
            del self.pending_to[msg.receiver][msg.msg_id]
            self.inflight_from[msg.sender] -= 1
            if isinstance(msg.payload, BidMessage) and msg.payload.side == Side.BUY:
                self.inflight_buys[msg.sender] -= 1
            batch.append(msg)

        self.trace.event_count += len(batch)
        if self.trace.event_count > self.event_cap:
            raise EventCapExceeded(self.event_cap, self.trace.event_count)

        by_receiver: Dict[str, List[Message]] = {}
        for msg in batch:
            by_receiver.setdefault(msg.receiver, []).append(msg)
        for receiver, msgs in by_receiver.items():
            if receiver in self.auctions:
                self._auction_batch(self.auctions[receiver], msgs)
            else:
                self._agent_batch(self.agents[receiver], msgs)

    def _auction_batch(self, auction: AuctionState, msgs: List[Message]):
        changed = False
        for msg in msgs:
            bid: BidMessage = msg.payload
            result = auction.submit_bid(bid, seq=next(self._arrivals))
            self._record(
                auction.good,
                "bid-accept" if result.accepted else "bid-reject",
                bidder=bid.bidder,
                side=bid.side.value,
                prices=[str(p) for p in bid.prices],
                bid_id=bid.bid_id,
                reason=result.reason.value if result.reason else None,
            )
            if result.accepted:
                changed = True
            else:
                self.trace.rejections += 1
                self.trace.violations.append(
                    f"bid {bid.bid_id} from {bid.bidder} on {auction.good} rejected: {result.reason.value}"
                )
        if changed:
            self.clearings[auction.good] = auction.compute_clearing()
        if auction.quoted:
            if changed:
                self._broadcast(auction)
        elif auction.ready_to_open:
            auction.open()
            self._record(auction.good, "open")
            self._broadcast(auction)

    def _agent_batch(self, agent: BiddingAgent, msgs: List[Message]):
        quotes: List[PriceQuote] = [m.payload for m in msgs]
        for bid in agent.react(quotes):
            self._send_bid(agent, bid)

    # ========== STATE PREDICATES ==========

    def detect_quiescence(self) -> bool:
        """No message in flight and no agent would bid on what it already knows"""
        if self.queue:
            return False
        if any(not a.quoted for a in self.auctions.values()):
            return False
        return all(not agent.preview() for agent in self.agents.values())

    def _may_become_active(self, agent: ProducerAgent) -> bool:
        """Active, or some undelivered traffic can still make it so

        A losing seller's raised output offer stays above the price, so only
        undelivered buy bids and winning output quotes count.
        """
        if self._active_now(agent.id) or self.inflight_buys[agent.id] or agent.output_winning:
            return True
        return any(
            m.payload.good == agent.output and any(m.payload.winning[:1])
            for m in self.pending_to[agent.id].values()
        )

    def detect_quasi_quiescence(self) -> bool:
        """Consumers and active producers are settled given every quote sent so far"""
        for agent_id, agent in self.agents.items():
            if isinstance(agent, ProducerAgent) and not self._may_become_active(agent):
                continue
            if self.inflight_from[agent_id]:
                return False
            if any(not self.auctions[g].quoted for g in agent.sent):
                return False
            pending = sorted(self.pending_to[agent_id].values())
            if pending and agent.preview([m.payload for m in pending]):
                return False
        return True

    def _snapshot(self):
        return {g: (c.price, c.winners) for g, c in self.clearings.items()}

    def _tentative(self):
        return build_allocation(self.clearings), PriceSystem({g: c.price for g, c in self.clearings.items()})

    def _check_served_state(self, label: str):
        """A settled state must be a valid solution once some consumer can afford a good

        Affordable means p + delta_buy <= v rather than p < v: a consumer
        priced within one buy increment of its value does not count.
        """
        if not self.policy.include_cost:
            return
        alloc, prices = self._tentative()
        for consumer in self.net.consumers:
            agent = self.agents[consumer.id]
            for good, value in consumer.values.items():
                if prices[good] + agent.policy.delta_buy <= value:
                    if not is_valid_solution(self.net, alloc, prices):
                        self.trace.violations.append(
                            f"{label}: {consumer.id} can afford {good} but the state is not a valid solution"
                        )
                    return

    def _monitor(self):
        if not self.monitor:
            return
        settled = self.detect_quasi_quiescence()
        if self.trace.quasi_quiescence_tick is None:
            if settled:
                self.trace.quasi_quiescence_tick = self.tick
                self._qq_snapshot = self._snapshot()
                self._check_served_state(f"tick {self.tick}")
        elif not settled:
            self.trace.violations.append(f"tick {self.tick}: quasi-quiescence lost")

    # ========== RUN ==========

    def run(self) -> RunTrace:
        self.start()
        self._monitor()
        while self.queue:
            self.step()
            self._monitor()

        trace = self.trace
        trace.quiescence_tick = self.tick
        quiescent = self.detect_quiescence()
        trace.clearings = {g: a.clear(quiescent) for g, a in sorted(self.auctions.items())}
        trace.prices = PriceSystem({g: trace.clearings.get(g, Clearing(g, 0, 0)).price for g in self.net.goods})
        trace.asks = {g: c.ask for g, c in trace.clearings.items()}
        trace.allocation = build_allocation(trace.clearings)
        trace.dead_ends = dead_ends(self.net, trace.allocation)

        for agent_id, agent in self.agents.items():
            trace.buy_offer_counts[agent_id] = agent.buy_offers_placed
            trace.max_buy_offer = max(trace.max_buy_offer, agent.max_buy_offer)

        if self.monitor:
            self._final_checks()
        logger.debug(
            f"Run reached quiescence at tick {self.tick} after {trace.bids_total} bids "
            f"({trace.bids_meaningful} meaningful)"
        )
        return trace

    def _final_checks(self):
        trace = self.trace
        if not self.detect_quasi_quiescence():
            trace.violations.append("quiescent state is not quasi-quiescent")
        if trace.quasi_quiescence_tick is None:
            trace.quasi_quiescence_tick = trace.quiescence_tick
        elif self._qq_snapshot != self._snapshot():
            trace.violations.append("prices or allocation changed after quasi-quiescence")
        self._check_served_state("quiescence")

        price_cap, count_cap = bid_bounds(self.net, self.policy.delta_buy)
        if trace.max_buy_offer > price_cap:
            trace.violations.append(f"buy offer {trace.max_buy_offer} above bound {price_cap}")
        for agent_id, count in sorted(trace.buy_offer_counts.items()):
            if count > count_cap:
                trace.violations.append(f"{agent_id} placed {count} buy offers, bound {count_cap}")


def build_allocation(clearings: Dict[str, Clearing]) -> Allocation:
    edges = set()
    contracts = []
    for good, clearing in sorted(clearings.items()):
        for buy, sell in clearing.matches:
            buyer = input_edge(good, buy.bidder, buy.slot)
            seller = output_edge(sell.bidder, good)
            edges.update((buyer, seller))
            contracts.append(Contract(good, buyer, seller, clearing.price))
    return Allocation(frozenset(edges), tuple(contracts))


def run(
    net: TaskDependencyNetwork,
    policy: PolicyConfig,
    schedule: Schedule,
    event_cap: Optional[int] = None,
    record_trace: bool = False,
    monitor: bool = True,
    with_decommit: bool = False,
) -> RunTrace:
    kernel = SimulationKernel(net, policy, schedule, event_cap, record_trace, monitor)
    trace = kernel.run()
    if with_decommit:
        trace.decommitted, trace.decommit_log = decommit(net, trace.allocation, trace.prices)
    return trace


def detect_quiescence(kernel: SimulationKernel) -> bool:
    return kernel.detect_quiescence()


def detect_quasi_quiescence(kernel: SimulationKernel) -> bool:
    return kernel.detect_quasi_quiescence()


def count_meaningful_bids(trace: RunTrace) -> int:
    return trace.bids_meaningful
