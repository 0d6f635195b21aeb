#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Agent policy tests
Consumer and producer bidding rules, stale quotes and policy overrides
"""

import os
import sys
import unittest
from fractions import Fraction

sys.path.insert(0, os.path.dirname(__file__))

from src.market.agents import (
    ConsumerAgent,
    PolicyConfig,
    ProducerAgent,
    build_agents,
    exposure,
    is_active,
    perceived_cost,
)
from src.market.auction import Clearing, PriceQuote, Side
from src.network.model import Consumer, Producer, TaskDependencyNetwork

D = Fraction(1, 100)


def quote(good, price, ask=None, winning=(False,), bid_id=1):
    price = Fraction(price)
    ask = price if ask is None else Fraction(ask)
    return PriceQuote(good, price, ask, tuple(winning), bid_id)


class ConsumerAgentTests(unittest.TestCase):
    """Myopic consumer"""

    def setUp(self):
        self.agent = ConsumerAgent(Consumer("c", {"x": Fraction(1), "y": Fraction(2)}), PolicyConfig())
        self.start = self.agent.start()

    def test_opens_at_zero_on_every_good(self):
        """The first bids are zero on each valued good"""
        self.assertEqual([b.good for b in self.start], ["x", "y"])
        self.assertTrue(all(b.prices == (0,) and b.side == Side.BUY for b in self.start))

    def test_raises_on_best_surplus(self):
        """The consumer raises one increment on the good with the best surplus"""
        bids = self.agent.react([quote("x", "0.5", bid_id=1), quote("y", "1.8", bid_id=2)])
        self.assertEqual(len(bids), 1)
        self.assertEqual(bids[0].good, "x")
        self.assertEqual(bids[0].prices, (Fraction(51, 100),))

    def test_stops_when_nothing_is_affordable(self):
        """Negative surplus everywhere stops bidding"""
        bids = self.agent.react([quote("x", 1, bid_id=1), quote("y", 2, bid_id=2)])
        self.assertEqual(bids, [])
        self.assertTrue(self.agent.stopped)

    def test_holds_while_winning(self):
        """A winning consumer does not bid"""
        bids = self.agent.react([quote("x", 0, winning=(True,), bid_id=1), quote("y", 0, bid_id=2)])
        self.assertEqual(bids, [])
        self.assertEqual(self.agent.winning_goods(), ["x"])

    def test_waits_for_every_good(self):
        """No decision until every good has a consistent quote"""
        self.assertEqual(self.agent.react([quote("x", "0.5", bid_id=1)]), [])

    def test_stale_quote_ignored(self):
        """Quotes that do not echo the latest bid are dropped"""
        self.assertFalse(self.agent.observe(quote("x", "0.5", bid_id=7)))
        self.assertNotIn("x", self.agent.quotes)

    def test_preview_leaves_agent_untouched(self):
        """Previewing a decision does not change the agent"""
        quotes = [quote("x", "0.5", bid_id=1), quote("y", "1.8", bid_id=2)]
        self.assertEqual(len(self.agent.preview(quotes)), 1)
        self.assertEqual(self.agent.quotes, {})
        self.assertEqual(self.agent.sent, {"x": 1, "y": 2})


class ProducerAgentTests(unittest.TestCase):
    """Producer pricing and input raising"""

    def test_input_less_producer_offers_at_cost(self):
        """Without inputs the output goes on sale at cost"""
        producer = Producer("p", "g", (), Fraction(3, 10))
        bids = ProducerAgent(producer, PolicyConfig()).start()
        self.assertEqual(len(bids), 1)
        self.assertEqual((bids[0].side, bids[0].prices), (Side.SELL, (Fraction(3, 10),)))

    def test_cost_excluded_when_switched_off(self):
        """include_cost off prices the output at zero"""
        producer = Producer("p", "g", (), Fraction(3, 10))
        bids = ProducerAgent(producer, PolicyConfig(include_cost=False)).start()
        self.assertEqual(bids[0].prices, (0,))

    def test_perceived_cost(self):
        """Winning units cost the price; losing ones the larger of ask and price plus increment"""
        self.assertEqual(perceived_cost(True, quote("a", 1, "1.5"), D), 1)
        self.assertEqual(perceived_cost(False, quote("a", 1, "1.5"), D), Fraction(3, 2))
        self.assertEqual(perceived_cost(False, quote("a", 1, 1), D), Fraction(101, 100))

    def _drive(self, variant):
        producer = Producer("p", "out", (("a", 1),), Fraction(2, 10))
        agent = ProducerAgent(producer, PolicyConfig(variant=variant))
        agent.start()
        first = agent.react([quote("a", "0.3", "0.4", bid_id=1)])
        raised = agent.react([quote("out", "0.6", winning=(True,), bid_id=2)])
        last = agent.react([quote("a", "0.5", "0.6", bid_id=3)])
        return first, raised, last

    def test_output_priced_at_perceived_total(self):
        """The first output offer is cost plus the perceived input cost"""
        first, _, _ = self._drive("plain")
        self.assertEqual([(b.good, b.prices) for b in first], [("out", (Fraction(6, 10),))])

    def test_winning_output_raises_losing_inputs(self):
        """A producer winning its output raises each losing input by one increment"""
        _, raised, _ = self._drive("plain")
        self.assertEqual([(b.good, b.prices) for b in raised], [("a", (D,))])

    def test_safe_variant_waits_after_output_update(self):
        """The safe variant does not raise inputs in the step it repriced its output"""
        _, _, plain = self._drive("plain")
        _, _, safe = self._drive("safe")
        self.assertEqual([b.good for b in plain], ["out", "a"])
        self.assertEqual([b.good for b in safe], ["out"])
        self.assertEqual(safe[0].prices, (Fraction(8, 10),))


class ContractExposureTests(unittest.TestCase):
    """Activity and exposure after clearing"""

    def setUp(self):
        self.producer = Producer("p", "out", (("a", 2),), Fraction(0))

    def test_exposure_of_inactive_producer(self):
        """An inactive producer owes the price for every won input unit"""
        clearings = {
            "a": Clearing("a", Fraction(1, 2), Fraction(1, 2), winners=frozenset({("p", 0), ("p", 1)})),
            "out": Clearing("out", Fraction(1), Fraction(1)),
        }
        self.assertFalse(is_active(self.producer, clearings))
        self.assertEqual(exposure(self.producer, clearings), 1)

    def test_active_producer_has_no_exposure(self):
        """Selling the output clears exposure"""
        clearings = {
            "a": Clearing("a", Fraction(1, 2), Fraction(1, 2), winners=frozenset({("p", 0)})),
            "out": Clearing("out", Fraction(1), Fraction(1), winners=frozenset({("p", 0)})),
        }
        self.assertTrue(is_active(self.producer, clearings))
        self.assertEqual(exposure(self.producer, clearings), 0)


class PolicyOverrideTests(unittest.TestCase):
    """Per-agent policy blocks"""

    def test_agent_block_overrides_variant_only(self):
        """Agents may set variant and include_cost but not increments"""
        net = TaskDependencyNetwork(
            ("g",),
            (Consumer("c", {"g": Fraction(1)}),),
            (Producer("p", "g", (), Fraction(0), {"variant": "safe", "delta_buy": "5"}),),
        )
        agents = build_agents(net, PolicyConfig(), ["c", "p"])
        self.assertIsInstance(agents["c"], ConsumerAgent)
        self.assertEqual(agents["p"].policy.variant, "safe")
        self.assertEqual(agents["p"].policy.delta_buy, D)
        self.assertEqual(agents["c"].policy.variant, "plain")

    def test_merged_reads_decimal_strings(self):
        """Protocol blocks layer over defaults with exact increments"""
        policy = PolicyConfig().merged({"delta_buy": "0.05", "include_cost": False})
        self.assertEqual(policy.delta_buy, Fraction(1, 20))
        self.assertFalse(policy.include_cost)
        self.assertEqual(policy.delta_sell, D)


if __name__ == "__main__":
    unittest.main()
