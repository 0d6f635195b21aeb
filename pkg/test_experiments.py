#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Experiment tests
Calibration, instance sampling, the runner and summary statistics
"""

import json
import math
import os
import sys
import tempfile
import unittest
from fractions import Fraction

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(__file__))

from config.config import Config
from src.experiments.runner import (
    REPORT_COLUMNS,
    derive_seed,
    load_experiment_config,
    run_experiment,
    write_reports,
)
from src.experiments.sampling import calibrate_value, min_serving_cost, sample_instance
from src.experiments.statistics import (
    CLASSES,
    class_distribution,
    efficiency_class,
    equilibrium_p_values,
    summary_tables,
    t_test,
)
from src.network.fixtures import chain, two_parallel
from src.network.model import Consumer, Producer, TaskDependencyNetwork
from src.shared.error_handler import FormatError, NoSolutionError, NotFoundError, PreconditionError
from src.shared.money import on_grid
from src.shared.validators import ExperimentConfigFile


class StatisticsTests(unittest.TestCase):
    """Classes and significance"""

    def test_efficiency_classes(self):
        """Efficiency ratios map onto the four classes"""
        self.assertEqual(efficiency_class(Fraction(-1, 2)), "Negative")
        self.assertEqual(efficiency_class(Fraction(0)), "Zero")
        self.assertEqual(efficiency_class(Fraction(1, 2)), "Suboptimal")
        self.assertEqual(efficiency_class(Fraction(1)), "Optimal")

    def test_welch_p_value(self):
        """Shifted samples give the textbook Welch p-value"""
        self.assertAlmostEqual(t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6]), 0.3466, places=3)

    def test_constant_samples(self):
        """Zero spread on both sides compares means directly"""
        self.assertEqual(t_test([0, 0, 0], [1, 1, 1]), 0.0)
        self.assertEqual(t_test([1, 1], [1, 1, 1]), 1.0)

    def test_short_sample_rejected(self):
        """Each side needs two observations"""
        with self.assertRaises(PreconditionError):
            t_test([1], [1, 2])

    def test_tables(self):
        """Class percentages add to one hundred per group and p-values need two runs per side"""
        frame = pd.DataFrame(
            {
                "eq_exists": [True, True, False, False, True],
                "protocol": ["plain"] * 5,
                "efficiency": [1.0, 0.5, 0.0, 1.0, 1.0],
                "class": ["Optimal", "Suboptimal", "Zero", "Optimal", "Optimal"],
                "producer_surplus_frac": [0.1] * 5,
                "lambda_delta": [True, True, False, True, True],
            }
        )
        table = class_distribution(frame)
        self.assertEqual(list(table.columns), CLASSES)
        for total in table.sum(axis=1):
            self.assertAlmostEqual(total, 100.0, places=0)
        p_values = equilibrium_p_values(frame)
        self.assertEqual(p_values.loc[0, "n_eq"], 3)
        self.assertFalse(math.isnan(p_values.loc[0, "p_value"]))
        self.assertEqual(set(summary_tables(frame)), {
            "class_distribution", "efficiency", "lambda_delta", "class_by_lambda_delta", "producer_surplus", "p_values"
        })
        self.assertEqual(summary_tables(frame.iloc[0:0]), {})


class CalibrationTests(unittest.TestCase):
    """Consumer values from cost quantiles"""

    def test_single_supplier_quantile(self):
        """With one uniform cost the 0.9 quantile is near 0.9"""
        value = calibrate_value(chain(1), "cons", np.random.default_rng(1), samples=3000)
        self.assertAlmostEqual(float(value), 0.9, delta=0.035)

    def test_cheaper_of_two_suppliers(self):
        """With two suppliers the quantile of the minimum is near 1 - sqrt(0.1)"""
        value = calibrate_value(two_parallel(), "cons", np.random.default_rng(2), samples=3000)
        self.assertAlmostEqual(float(value), 1 - math.sqrt(0.1), delta=0.035)

    @unittest.skipUnless(Config.FULL_FLEETS, "set FULL_FLEETS=1 for acceptance-size fleets")
    def test_quantiles_at_full_sample_size(self):
        """A hundred thousand draws pin both quantiles to within a cent"""
        value = calibrate_value(chain(1), "cons", np.random.default_rng(1), samples=100_000)
        self.assertAlmostEqual(float(value), 0.9, delta=0.01)
        value = calibrate_value(two_parallel(), "cons", np.random.default_rng(2), samples=100_000)
        self.assertAlmostEqual(float(value), 1 - math.sqrt(0.1), delta=0.01)

    def test_value_on_grid(self):
        """Calibrated values land on the grid"""
        net = chain(2)
        value = calibrate_value(net, "cons", np.random.default_rng(3), samples=50)
        self.assertTrue(on_grid(value, net.resolution))
        self.assertGreater(value, 0)

    def test_serving_cost(self):
        """The cheapest serving cost sums the chain's costs"""
        self.assertEqual(min_serving_cost(chain(3, cost="0.25"), "cons"), Fraction(3, 4))
        with self.assertRaises(NotFoundError):
            min_serving_cost(chain(1), "nobody")

    def test_unservable_consumer(self):
        """A consumer with no supplier cannot be calibrated"""
        net = TaskDependencyNetwork(
            ("g", "h"),
            (Consumer("c", {"h": Fraction(1)}),),
            (Producer("p", "g", (), Fraction(0)),),
        )
        self.assertIsNone(min_serving_cost(net, "c"))
        with self.assertRaises(NoSolutionError):
            calibrate_value(net, "c", np.random.default_rng(0), samples=10)


class SamplingTests(unittest.TestCase):
    """Cost draws"""

    def test_sampled_costs(self):
        """Costs sit on the grid in [0, 1] and the optimum is positive"""
        net = chain(3)
        sample = sample_instance(net, np.random.default_rng(4), values={"cons": {"g3": Fraction(2)}})
        self.assertGreater(sample.value, 0)
        self.assertGreaterEqual(sample.draws, 1)
        for producer in sample.net.producers:
            self.assertTrue(0 <= producer.cost <= 1)
            self.assertTrue(on_grid(producer.cost, net.resolution))

    def test_same_seed_same_instance(self):
        """Draws depend only on the generator seed"""
        values = {"cons": {"g": Fraction(1)}}
        a = sample_instance(two_parallel(), np.random.default_rng(9), values)
        b = sample_instance(two_parallel(), np.random.default_rng(9), values)
        self.assertEqual(a.net, b.net)

    def test_seed_derivation(self):
        """Derived seeds are stable, distinct per label and fit in 63 bits"""
        self.assertEqual(derive_seed(1, "instance", 0), derive_seed(1, "instance", 0))
        self.assertNotEqual(derive_seed(1, "instance", 0), derive_seed(1, "instance", 1))
        self.assertLess(derive_seed(2**40, "calibration"), 2**63)


class RunnerTests(unittest.TestCase):
    """End-to-end experiment runs"""

    @classmethod
    def setUpClass(cls):
        cls.config = ExperimentConfigFile(
            topology="random-tree",
            topology_size=8,
            instances=4,
            seed=11,
            protocols=["plain", "safe", "decommit"],
            calibration_samples=200,
            delay="uniform:1,3",
        )
        cls.result = run_experiment(cls.config, workers=1)

    def test_report_shape(self):
        """One row per instance and protocol, in the report column order"""
        frame = self.result.frame
        self.assertEqual(list(frame.columns), REPORT_COLUMNS)
        self.assertEqual(len(frame) + len(self.result.batch.to_response()["errors"]), 12)
        self.assertTrue(set(frame["class"]) <= set(CLASSES))

    def test_classification_matches_dead_ends(self):
        """A row is a lambda-delta equilibrium exactly when it has no dead ends"""
        for _, row in self.result.frame.iterrows():
            self.assertEqual(bool(row["lambda_delta"]), row["dead_ends"] == 0)

    def test_decommit_never_loses_value(self):
        """Decommitment keeps at least the plain run's efficiency"""
        frame = self.result.frame.set_index(["instance_id", "protocol"])["efficiency"]
        for instance in self.result.instances:
            key_plain, key_dec = (instance.instance_id, "plain"), (instance.instance_id, "decommit")
            if key_plain in frame.index and key_dec in frame.index:
                self.assertGreaterEqual(frame[key_dec], frame[key_plain] - 1e-12)

    def test_decommit_rows_describe_the_cleared_allocation(self):
        """Decommit rows keep the plain run's dead ends and class and add the pruned value"""
        frame = self.result.frame.set_index(["instance_id", "protocol"])
        for instance in self.result.instances:
            key_plain, key_dec = (instance.instance_id, "plain"), (instance.instance_id, "decommit")
            if key_plain not in frame.index or key_dec not in frame.index:
                continue
            plain, pruned = frame.loc[key_plain], frame.loc[key_dec]
            self.assertEqual(pruned["dead_ends"], plain["dead_ends"])
            self.assertEqual(bool(pruned["lambda_delta"]), bool(plain["lambda_delta"]))
            self.assertTrue(pd.isna(plain["decommit_value"]))
            self.assertAlmostEqual(pruned["decommit_value"], pruned["efficiency"] * float(instance.efficient_value))

    def test_deterministic(self):
        """The same config gives the same report"""
        again = run_experiment(self.config, workers=1)
        pd.testing.assert_frame_equal(again.frame, self.result.frame)

    def test_worker_pool_matches_serial(self):
        """Parallel workers merge to the serial report"""
        parallel = run_experiment(self.config, workers=2)
        pd.testing.assert_frame_equal(parallel.frame, self.result.frame)

    def test_write_reports(self):
        """Reports and summaries land in the output directory"""
        with tempfile.TemporaryDirectory() as tmp:
            report = write_reports(self.result, tmp)
            self.assertEqual(len(pd.read_csv(report)), len(self.result.frame))
            self.assertTrue(os.path.exists(os.path.join(tmp, "summary_class_distribution.csv")))

    def test_config_file(self):
        """Config files load through the schema; bad ones raise FormatError"""
        with tempfile.TemporaryDirectory() as tmp:
            good = os.path.join(tmp, "good.json")
            with open(good, "w") as handle:
                json.dump({"topology": "chain", "instances": 2}, handle)
            self.assertEqual(load_experiment_config(good).protocols, ["plain", "decommit"])
            bad = os.path.join(tmp, "bad.json")
            with open(bad, "w") as handle:
                json.dump({"topology": "chain", "equilibrium": "sometimes"}, handle)
            with self.assertRaises(FormatError):
                load_experiment_config(bad)


@unittest.skipUnless(Config.FULL_FLEETS, "set FULL_FLEETS=1 for acceptance-size fleets")
class GreedyBadStudyTests(unittest.TestCase):
    """Per-variant outcomes on sampled GREEDY-BAD instances"""

    @classmethod
    def setUpClass(cls):
        base = dict(topology="greedy-bad", instances=100, seed=3, protocols=["plain", "safe", "decommit"])
        cls.exists = run_experiment(ExperimentConfigFile(equilibrium="exists", **base), workers=1).frame
        cls.missing = run_experiment(ExperimentConfigFile(equilibrium="not-exists", **base), workers=1).frame

    def test_decommit_near_optimal_with_equilibrium(self):
        """Decommitment is close to fully efficient when an equilibrium exists"""
        pruned = self.exists[self.exists["protocol"] == "decommit"]
        self.assertGreaterEqual(pruned["efficiency"].mean(), 0.95)

    def test_decommit_finds_nothing_without_equilibrium(self):
        """Without an equilibrium decommitted runs almost always end at zero efficiency"""
        pruned = self.missing[self.missing["protocol"] == "decommit"]
        self.assertNotIn("Negative", set(pruned["class"]))
        self.assertGreaterEqual((pruned["class"] == "Zero").mean(), 0.9)

    def test_plain_runs_lose_value_without_equilibrium(self):
        """Plain runs strand producers and go negative when no equilibrium exists"""
        plain = self.missing[self.missing["protocol"] == "plain"]
        self.assertIn("Negative", set(plain["class"]))
        self.assertLess(plain["efficiency"].mean(), 0)

    def test_decommit_never_below_plain_on_average(self):
        """Decommitment does at least as well as plain runs in both cases"""
        for frame in (self.exists, self.missing):
            means = frame.groupby("protocol")["efficiency"].mean()
            self.assertGreaterEqual(means["decommit"], means["plain"])


if __name__ == "__main__":
    unittest.main()
