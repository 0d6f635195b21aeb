#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Ascending (M+1)st-price double auction for one good

M is the number of sell units on the book. The price is the (M+1)st
highest offer and the ask is the Mth highest, with zero-price padding when
the book is short. Buys above the price and sells below it win; offers
tied at the price fill earliest-first only as needed to balance the sides.
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Set, Tuple

from loguru import logger

from src.shared.error_handler import PreconditionError
from src.shared.money import ZERO


class Side(str, Enum):
    BUY = "buy"
    SELL = "sell"


class RejectReason(str, Enum):
    ASCENDING = "ascending-violation"
    UNREGISTERED = "unregistered-after-open"
    MIXED_SIDES = "mixed-sides"
    RETRACTION = "retraction"


class Offer(NamedTuple):
    bidder: str
    side: Side
    price: Fraction
    arrival_seq: int
    slot: int = 0


@dataclass(frozen=True)
class BidMessage:
    """Replaces the bidder's standing offers on one good, slot by slot"""

    bidder: str
    good: str
    side: Side
    prices: Tuple[Fraction, ...]
    bid_id: int


@dataclass(frozen=True)
class PriceQuote:
    good: str
    price: Fraction
    ask: Fraction
    winning: Tuple[bool, ...]  # recipient's standing offers, by slot
    bid_id: int  # recipient's latest bid seen by the auction


@dataclass(frozen=True)
class Clearing:
    good: str
    price: Fraction
    ask: Fraction
    matches: Tuple[Tuple[Offer, Offer], ...] = ()
    winners: FrozenSet[Tuple[str, int]] = frozenset()

    def winning_slots(self, bidder: str, slots: int) -> Tuple[bool, ...]:
        return tuple((bidder, k) in self.winners for k in range(slots))


class SubmitResult(NamedTuple):
    accepted: bool
    reason: Optional[RejectReason] = None


def _desc_key(offer: Offer):
    return (-offer.price, offer.arrival_seq, offer.slot)


def _asc_key(offer: Offer):
    return (offer.price, offer.arrival_seq, offer.slot)


def clear_book(good: str, offers: Iterable[Offer]) -> Clearing:
    """Price, ask and one-to-one matches of a book"""
    offers = list(offers)
    buys = [o for o in offers if o.side == Side.BUY]
    sells = [o for o in offers if o.side == Side.SELL]
    m = len(sells)

    ranked = sorted((o.price for o in offers), reverse=True)
    ranked += [ZERO] * (m + 1 - len(ranked))
    price = ranked[m]
    ask = ranked[m - 1] if m >= 1 else price

    winning_buys = sorted((o for o in buys if o.price > price), key=_desc_key)
    winning_sells = sorted((o for o in sells if o.price < price), key=_asc_key)
    tied_buys = sorted((o for o in buys if o.price == price), key=lambda o: (o.arrival_seq, o.slot))
    tied_sells = sorted((o for o in sells if o.price == price), key=lambda o: (o.arrival_seq, o.slot))

    gap = len(winning_buys) - len(winning_sells)
    if gap > 0:
        winning_sells += tied_sells[:gap]
    elif gap < 0:
        winning_buys += tied_buys[:-gap]
    n = min(len(winning_buys), len(winning_sells))
    winning_buys, winning_sells = winning_buys[:n], winning_sells[:n]

    matches = tuple(zip(sorted(winning_buys, key=_desc_key), sorted(winning_sells, key=_asc_key)))
    winners = frozenset((o.bidder, o.slot) for o in (*winning_buys, *winning_sells))
    return Clearing(good, price, ask, matches, winners)


@dataclass
class AuctionState:
    """Book and gatekeeping for one good"""

    good: str
    delta_buy: Fraction
    delta_sell: Fraction
    registered: Set[str] = field(default_factory=set)
    awaiting: Set[str] = field(default_factory=set)
    standing: Dict[str, List[Offer]] = field(default_factory=dict)
    sides: Dict[str, Side] = field(default_factory=dict)
    bid_ids: Dict[str, int] = field(default_factory=dict)
    quoted: bool = False
    _seq: "itertools.count" = field(default_factory=lambda: itertools.count(1), repr=False)

    @property
    def ready_to_open(self) -> bool:
        return not self.quoted and self.awaiting <= set(self.standing)

    @property
    def bidders(self) -> List[str]:
        return sorted(self.registered | set(self.standing))

    def offers(self) -> List[Offer]:
        return [o for bidder in sorted(self.standing) for o in self.standing[bidder]]

    def submit_bid(self, msg: BidMessage, seq: Optional[int] = None) -> SubmitResult:
        result = self._check(msg)
        if not result.accepted:
            logger.debug(f"Auction {self.good} rejected {msg.bidder}: {result.reason.value}")
            return result

        seq = next(self._seq) if seq is None else seq
        old = self.standing.get(msg.bidder, [])
        updated = []
        for slot, price in enumerate(msg.prices):
            if slot < len(old) and old[slot].price == price:
                updated.append(old[slot])
            else:
                updated.append(Offer(msg.bidder, msg.side, price, seq, slot))
        self.standing[msg.bidder] = updated
        self.sides[msg.bidder] = msg.side
        self.bid_ids[msg.bidder] = msg.bid_id
        if not self.quoted:
            self.registered.add(msg.bidder)
        return SubmitResult(True)

    def _check(self, msg: BidMessage) -> SubmitResult:
        if self.quoted and msg.bidder not in self.registered:
            return SubmitResult(False, RejectReason.UNREGISTERED)
        side = self.sides.get(msg.bidder)
        if side is not None and side != msg.side:
            return SubmitResult(False, RejectReason.MIXED_SIDES)
        old = self.standing.get(msg.bidder)
        if old is None:
            return SubmitResult(True)
        if len(msg.prices) < len(old):
            return SubmitResult(False, RejectReason.RETRACTION)
        step = self.delta_buy if msg.side == Side.BUY else self.delta_sell
        changed = len(msg.prices) > len(old)
        for offer, price in zip(old, msg.prices):
            if price == offer.price:
                continue
            if price < offer.price + step:
                return SubmitResult(False, RejectReason.ASCENDING)
            changed = True
        if not changed:
            return SubmitResult(False, RejectReason.ASCENDING)
        return SubmitResult(True)

    def compute_clearing(self) -> Clearing:
        return clear_book(self.good, self.offers())

    def open(self):
        self.quoted = True

    def quote_for(self, recipient: str, clearing: Optional[Clearing] = None) -> PriceQuote:
        clearing = clearing or self.compute_clearing()
        slots = len(self.standing.get(recipient, ()))
        return PriceQuote(
            self.good,
            clearing.price,
            clearing.ask,
            clearing.winning_slots(recipient, slots),
            self.bid_ids.get(recipient, 0),
        )

    def clear(self, quiescent: bool) -> Clearing:
        """Binding contracts; only once the whole system is quiescent"""
        if not quiescent:
            raise PreconditionError(f"Auction {self.good} cannot clear before quiescence")
        clearing = self.compute_clearing()
        logger.debug(
            f"Auction {self.good} cleared at {clearing.price} with {len(clearing.matches)} trade(s)"
        )
        return clearing
