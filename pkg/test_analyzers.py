#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Analyzer tests
Efficient allocations, equilibrium checks and existence, constructive prices,
structure classes and certificates
"""

import json
import os
import sys
import tempfile
import unittest
from fractions import Fraction

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

from config.config import Config
from src.analyzers.certificates import (
    EquilibriumCertificate,
    certificate_from_dict,
    certify,
    describe,
    load_certificate,
    save_certificate,
    verify_certificate,
)
from src.analyzers.constructive import (
    equilibrium_no_input_complementarities,
    equilibrium_polytree,
    single_good_form,
    sufficient_value_polytree,
)
from src.analyzers.efficient import efficient_allocation, efficient_allocations, exhaustive_efficient
from src.analyzers.equilibrium import (
    LambdaParams,
    check_competitive_equilibrium,
    check_lambda_delta,
    competitive_equilibrium_exists,
    protocol_lambdas,
)
from src.analyzers.linear import Constraint, explain_infeasibility, feasible_point
from src.analyzers.structure import has_input_complementarities, is_polytree, is_tree
from src.network.fixtures import (
    chain,
    greedy_bad,
    random_general,
    random_polytree,
    random_single_input,
    random_tree,
    two_parallel,
)
from src.network.model import Allocation, Consumer, PriceSystem, Producer, TaskDependencyNetwork
from src.network.predicates import allocation_value, is_feasible
from src.shared.error_handler import FormatError, NoSolutionError, PreconditionError

FLEET = 1000 if Config.FULL_FLEETS else 25
D = Fraction(1, 100)


def prices_of(*amounts):
    return PriceSystem({str(i): Fraction(p) for i, p in enumerate(amounts, start=1)})


class EfficientAllocationTests(unittest.TestCase):
    """Welfare-maximizing allocations"""

    def test_greedy_bad_optimum(self):
        """The optimum routes through a5 since good 4 has a single seller"""
        alloc, value = efficient_allocation(greedy_bad("16"))
        self.assertEqual(value, 8)
        active = {p for p in ("a1", "a2", "a3", "a4", "a5", "a6", "a7") if alloc.is_active(p)}
        self.assertEqual(active, {"a1", "a2", "a4", "a5", "a7"})

    def test_unprofitable_chain_is_empty(self):
        """Nothing is produced when cost exceeds value"""
        alloc, value = efficient_allocation(chain(1, cost="2"))
        self.assertEqual(value, 0)
        self.assertEqual(alloc.edges, frozenset())

    def test_cheaper_parallel_producer_wins(self):
        """Between two suppliers the cheaper one is used"""
        alloc, value = efficient_allocation(two_parallel(cost_a="0.7", cost_b="0.2"))
        self.assertEqual(value, Fraction(8, 10))
        self.assertTrue(alloc.is_active("pb"))
        self.assertFalse(alloc.is_active("pa"))

    def test_ties_are_all_reported(self):
        """Equal-cost suppliers give two optima"""
        optima, value = efficient_allocations(two_parallel())
        self.assertEqual(value, Fraction(1, 2))
        self.assertEqual(len(optima), 2)

    def test_search_agrees_with_enumeration(self):
        """Branch and bound finds the enumerated optimum value"""
        for seed in range(FLEET):
            net = random_general(np.random.default_rng(seed))
            alloc, value = efficient_allocation(net)
            _, brute = exhaustive_efficient(net)
            self.assertEqual(value, brute, seed)
            self.assertTrue(is_feasible(net, alloc), seed)
            self.assertEqual(allocation_value(net, alloc), value, seed)

    def test_enumeration_limit(self):
        """Exhaustive mode refuses large networks"""
        with self.assertRaises(PreconditionError):
            efficient_allocation(chain(17), mode="exhaustive")


class CompetitiveEquilibriumTests(unittest.TestCase):
    """Exact and lambda-delta checks"""

    @classmethod
    def setUpClass(cls):
        cls.net = greedy_bad("16")
        cls.alloc, cls.value = efficient_allocation(cls.net)

    def test_supporting_prices_verify(self):
        """Prices 3, 1, 1, 5, 7, 15 support the optimum"""
        result = check_competitive_equilibrium(self.net, self.alloc, prices_of(3, 1, 1, 5, 7, 15))
        self.assertTrue(result.verified, describe(result))
        self.assertEqual(result.slacks["cons"], 1)
        self.assertEqual(result.slacks["a7"], 1)

    def test_idle_producer_with_profit_fails(self):
        """Raising p(5) to 8 lets idle a6 earn 1"""
        result = check_competitive_equilibrium(self.net, self.alloc, prices_of(3, 1, 1, 5, 8, 15))
        self.assertFalse(result.verified)
        self.assertIn(("producer", "a6"), {(v.code, v.subject) for v in result.violations})

    def test_lambda_absorbs_idle_profit(self):
        """A lambda of 1 on a6's input covers the missed profit"""
        params = LambdaParams(Fraction(0), Fraction(0), {("a6", "2"): Fraction(1)})
        result, bounds = check_lambda_delta(self.net, self.alloc, prices_of(3, 1, 1, 5, 8, 15), params, self.value)
        self.assertTrue(result.verified, describe(result))
        self.assertEqual(bounds.general_bound, 1)
        self.assertTrue(bounds.within_general)

    def test_overpriced_consumer_fails(self):
        """Paying above value is a consumer violation"""
        result = check_competitive_equilibrium(self.net, self.alloc, prices_of(3, 1, 1, 5, 7, 17))
        self.assertIn("cons", {v.subject for v in result.violations})

    def test_protocol_lambdas_floor_at_increment(self):
        """Lambdas are the ask gap, never below the buy increment"""
        lam = protocol_lambdas(self.net, prices_of(3, 1, 1, 5, 7, 15), {"2": Fraction(2), "4": Fraction(5)}, D)
        self.assertEqual(lam[("a5", "2")], 1)
        self.assertEqual(lam[("a7", "4")], D)


class ExistenceTests(unittest.TestCase):
    """Deciding whether supporting prices exist"""

    def test_low_value_has_no_equilibrium(self):
        """At value 9 the price of good 6 must be both at least 10 and at most 9"""
        net = greedy_bad("9")
        found = competitive_equilibrium_exists(net)
        self.assertFalse(found.exists)
        self.assertEqual(found.clash.variable, "6")
        self.assertGreaterEqual(found.clash.lower, 10)
        self.assertLessEqual(found.clash.upper, 9)
        self.assertIn("p(6) >= 10.0000 and p(6) <= 9.0000", found.describe_clash(net.resolution))

    def test_high_value_has_equilibrium(self):
        """At value 16 a verified witness is returned"""
        net = greedy_bad("16")
        found = competitive_equilibrium_exists(net)
        self.assertTrue(found.exists)
        self.assertEqual(found.value, 8)
        self.assertTrue(check_competitive_equilibrium(net, found.allocation, found.prices).verified)

    def test_polytrees_always_have_equilibria(self):
        """Every random polytree has supporting prices"""
        for seed in range(FLEET):
            net = random_polytree(np.random.default_rng(seed))
            self.assertTrue(competitive_equilibrium_exists(net).exists, seed)


class LinearSystemTests(unittest.TestCase):
    """Exact feasibility and clash explanation"""

    def test_feasible_band(self):
        """A band 2 <= x <= 3 yields a point inside it"""
        rows = [Constraint({"x": Fraction(-1)}, Fraction(-2)), Constraint({"x": Fraction(1)}, Fraction(3))]
        point = feasible_point(rows, ["x"])
        self.assertIsNotNone(point)
        self.assertTrue(all(row.holds(point) for row in rows))

    def test_crossed_bounds(self):
        """x >= 3 with x <= 2 is infeasible and explained on x"""
        rows = [Constraint({"x": Fraction(-1)}, Fraction(-3)), Constraint({"x": Fraction(1)}, Fraction(2))]
        self.assertIsNone(feasible_point(rows, ["x"]))
        clash = explain_infeasibility(rows, ["x"])
        self.assertEqual((clash.variable, clash.lower, clash.upper), ("x", 3, 2))


class ConstructivePriceTests(unittest.TestCase):
    """Prices built for a known optimum"""

    def test_single_input_chain(self):
        """A one-producer chain is priced at cost"""
        net = chain(1, cost="0.3")
        alloc, _ = efficient_allocation(net)
        self.assertEqual(equilibrium_no_input_complementarities(net, alloc)["g1"], Fraction(3, 10))
        self.assertEqual(equilibrium_polytree(net, alloc)["g1"], Fraction(3, 10))

    def test_single_input_fleet(self):
        """The fixed-point prices verify on random single-input networks"""
        for seed in range(FLEET):
            net = random_single_input(np.random.default_rng(seed))
            alloc, _ = efficient_allocation(net)
            prices = equilibrium_no_input_complementarities(net, alloc)
            result = check_competitive_equilibrium(net, alloc, prices)
            self.assertTrue(result.verified, f"seed {seed}: {describe(result)}")

    def test_polytree_fleet(self):
        """Bound propagation prices verify on random polytrees and trees"""
        for seed in range(FLEET):
            for make in (random_polytree, random_tree):
                net = make(np.random.default_rng(seed))
                alloc, _ = efficient_allocation(net)
                prices = equilibrium_polytree(net, alloc)
                result = check_competitive_equilibrium(net, alloc, prices)
                self.assertTrue(result.verified, f"{make.__name__} seed {seed}: {describe(result)}")

    def test_preconditions(self):
        """Each procedure refuses networks outside its class"""
        net = greedy_bad("16")
        alloc, _ = efficient_allocation(net)
        with self.assertRaises(PreconditionError):
            equilibrium_no_input_complementarities(net, alloc)
        with self.assertRaises(PreconditionError):
            equilibrium_polytree(net, alloc)

    def test_single_good_form(self):
        """A two-good consumer becomes a one-good consumer fed by auxiliary producers"""
        net = TaskDependencyNetwork(
            ("x", "y"),
            (Consumer("c", {"x": Fraction(3), "y": Fraction(1)}),),
            (Producer("px", "x", (), Fraction(1)), Producer("py", "y", (), Fraction(0))),
        )
        alloc, _ = efficient_allocation(net)
        rewritten, mapped = single_good_form(net, alloc)
        self.assertEqual(dict(rewritten.consumer_map["c"].values), {"want:c": Fraction(3)})
        self.assertEqual(rewritten.producer_map["aux:c:x"].cost, 0)
        self.assertEqual(rewritten.producer_map["aux:c:y"].cost, 2)
        self.assertEqual(allocation_value(rewritten, mapped), allocation_value(net, alloc))

    def test_sufficient_value(self):
        """A one-producer chain needs its supply cost plus increment slack"""
        value = sufficient_value_polytree(chain(1, cost="0.5"), "cons", "g1", D, D)
        self.assertEqual(value, Fraction(54, 100))
        with self.assertRaises(NoSolutionError):
            sufficient_value_polytree(chain(1), "cons", "g9", D, D)


class StructureTests(unittest.TestCase):
    """Network classes"""

    def test_chain(self):
        """A chain is a tree without complementarities"""
        net = chain(3)
        self.assertTrue(is_tree(net))
        self.assertTrue(is_polytree(net))
        self.assertFalse(has_input_complementarities(net))

    def test_greedy_bad(self):
        """Greedy-bad has two undirected paths between goods and needs several inputs"""
        net = greedy_bad()
        self.assertFalse(is_polytree(net))
        self.assertTrue(has_input_complementarities(net))

    def test_two_units_break_polytree(self):
        """Two units of one input count as parallel edges"""
        net = TaskDependencyNetwork(
            ("a", "b"),
            (Consumer("c", {"b": Fraction(1)}),),
            (Producer("p1", "a", (), Fraction(0)), Producer("p2", "b", (("a", 2),), Fraction(0))),
        )
        self.assertFalse(is_polytree(net))

    def test_second_consumer_breaks_tree(self):
        """Polytrees with two consumers are not trees"""
        net = TaskDependencyNetwork(
            ("g", "h"),
            (Consumer("c1", {"g": Fraction(1)}), Consumer("c2", {"h": Fraction(1)})),
            (Producer("p", "g", (), Fraction(0)), Producer("q", "h", (("g", 1),), Fraction(0))),
        )
        self.assertTrue(is_polytree(net))
        self.assertFalse(is_tree(net))


class CertificateTests(unittest.TestCase):
    """Certificate export and re-checking"""

    @classmethod
    def setUpClass(cls):
        cls.net = greedy_bad("16")
        cls.alloc, cls.value = efficient_allocation(cls.net)

    def _reload(self, cert):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "cert.json")
            save_certificate(cert, path, self.net.resolution)
            with open(path) as handle:
                raw = json.load(handle)
            return load_certificate(path), raw

    def test_exact_certificate_survives_reload(self):
        """An exact certificate re-verifies after a save and load"""
        cert = certify(self.net, self.alloc, prices_of(3, 1, 1, 5, 7, 15), efficient=self.value)
        self.assertEqual(cert.kind, "exact")
        self.assertEqual(cert.bounds.achieved, 8)
        loaded, raw = self._reload(cert)
        self.assertEqual(raw["prices"]["6"], "15.0000")
        result, _ = verify_certificate(self.net, loaded, self.value)
        self.assertEqual(describe(result), "verified")
        self.assertEqual(loaded.allocation.edges, self.alloc.edges)

    def test_lambda_certificate_survives_reload(self):
        """Lambda-delta certificates keep their lambdas"""
        params = LambdaParams(Fraction(0), Fraction(0), {("a6", "2"): Fraction(1)})
        cert = certify(self.net, self.alloc, prices_of(3, 1, 1, 5, 8, 15), params, self.value)
        loaded, raw = self._reload(cert)
        self.assertEqual(raw["lambda"], {"a6|2": "1.0000"})
        result, bounds = verify_certificate(self.net, loaded, self.value)
        self.assertTrue(result.verified)
        self.assertTrue(bounds.within_general)

    def test_tampered_certificate_fails(self):
        """Changing a price breaks verification"""
        cert = EquilibriumCertificate(self.alloc, prices_of(3, 1, 1, 5, 8, 15))
        result, _ = verify_certificate(self.net, cert, self.value)
        self.assertNotEqual(describe(result), "verified")

    def test_malformed_certificates(self):
        """Unknown kinds and bad lambda keys raise FormatError"""
        with self.assertRaises(FormatError):
            certificate_from_dict({"kind": "approximate"})
        with self.assertRaises(FormatError):
            certificate_from_dict({"kind": "lambda-delta", "lambda": {"a6": "1"}})
        with self.assertRaises(FormatError):
            certificate_from_dict({"prices": {"g": "-1"}})


if __name__ == "__main__":
    unittest.main()
