#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Experiment runner

Samples instances of one topology, optionally keeps only those where a
competitive equilibrium does (or does not) exist, runs every requested
protocol on each and measures the outcome against the efficient value.
Instances are independent; with several workers they run in a process
pool and are merged back in instance order.
"""

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError as SchemaError

from config.config import Config
from src.analyzers.equilibrium import OutcomeClass, classify_protocol_outcome, competitive_equilibrium_exists
from src.network.fixtures import fixture_names, make_fixture
from src.network.io import load_network
from src.network.model import TaskDependencyNetwork
from src.network.predicates import agent_surplus, allocation_value
from src.shared.error_handler import BatchOperationResult, FormatError, NoSolutionError, SimulationError
from src.shared.logging_setup import OperationLogger, StructuredLogger, log_performance
from src.shared.money import ZERO, to_money
from src.shared.validators import ExperimentConfigFile
from src.simulation.kernel import resolve_policy, run
from src.simulation.schedule import Schedule, parse_delay

from .sampling import calibrate_values, sample_instance
from .statistics import efficiency_class, summary_tables, write_summaries

REPORT_COLUMNS = [
    "instance_id",
    "topology",
    "eq_exists",
    "protocol",
    "efficiency",
    "class",
    "producer_surplus_frac",
    "dead_ends",
    "lambda_delta",
    "decommit_value",
    "bids_total",
    "bids_meaningful",
    "quasi_q_tick",
    "q_tick",
]


@dataclass
class ProtocolResult:
    protocol: str
    efficiency: Fraction
    efficiency_class: str
    producer_surplus_frac: Fraction
    dead_ends: int
    lambda_delta: bool
    decommit_value: Optional[Fraction]
    bids_total: int
    bids_meaningful: int
    quasi_q_tick: int
    q_tick: int
    classification: str
    within_bound: Optional[bool] = None


@dataclass
class InstanceResult:
    instance_id: int
    costs: Dict[str, Fraction]
    values: Dict[str, Dict[str, Fraction]]
    eq_exists: bool
    efficient_value: Fraction
    draws: int
    runs: List[ProtocolResult] = field(default_factory=list)
    failures: List[Tuple[str, str, str]] = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ExperimentConfigFile
    instances: List[InstanceResult]
    batch: BatchOperationResult
    frame: pd.DataFrame
    tables: Dict[str, pd.DataFrame]


def derive_seed(seed: int, *parts: Any) -> int:
    """Stable 63-bit seed from a parent seed and labels"""
    text = ":".join(str(p) for p in (seed, *parts))
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfigFile:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return ExperimentConfigFile.model_validate(data)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"Cannot read experiment config: {e}", path=str(path)) from e
    except SchemaError as e:
        raise FormatError(f"Invalid experiment config: {e.errors()[0]['msg']}", path=str(path)) from e


def resolve_topology(config: ExperimentConfigFile) -> TaskDependencyNetwork:
    if config.topology in fixture_names():
        return make_fixture(config.topology, config.topology_size, config.seed)
    return load_network(config.topology)


def producer_surplus_fraction(net: TaskDependencyNetwork, alloc, prices) -> Fraction:
    value = allocation_value(net, alloc)
    if value <= 0:
        return ZERO
    earned = sum((agent_surplus(net, alloc, prices, p.id) for p in net.producers), ZERO)
    return earned / value


# ========== ONE INSTANCE ==========


def _policy_overrides(config: ExperimentConfigFile, protocol: str) -> Dict[str, Any]:
    return {
        "variant": "safe" if protocol == "safe" else "plain",
        "include_cost": config.include_cost,
        "delta_buy": to_money(config.delta_buy),
        "delta_sell": to_money(config.delta_sell),
    }


def _draw(config: ExperimentConfigFile, net, values, rng):
    """Sample until the equilibrium filter is met"""
    for _ in range(Config.MAX_DRAWS_PER_INSTANCE):
        sample = sample_instance(net, rng, values)
        exists = competitive_equilibrium_exists(sample.net).exists
        if config.equilibrium == "any" or exists == (config.equilibrium == "exists"):
            return sample, exists
    raise NoSolutionError(f"No instance with equilibrium={config.equilibrium} found")


def run_protocol(net: TaskDependencyNetwork, efficient: Fraction, protocol: str, seed: int, config) -> ProtocolResult:
    policy = resolve_policy(net, _policy_overrides(config, protocol))
    schedule = Schedule(seed, parse_delay(config.delay, net))
    trace = run(net, policy, schedule, event_cap=config.event_cap, with_decommit=protocol == "decommit")
    outcome = classify_protocol_outcome(net, trace, efficient)
    # efficiency is what the protocol delivers; dead ends and lambda-delta describe the cleared allocation
    final = trace.final_allocation
    efficiency = allocation_value(net, final) / efficient
    return ProtocolResult(
        protocol=protocol,
        efficiency=efficiency,
        efficiency_class=efficiency_class(efficiency),
        producer_surplus_frac=producer_surplus_fraction(net, final, trace.prices),
        dead_ends=len(trace.dead_ends),
        lambda_delta=outcome.classification == OutcomeClass.LAMBDA_DELTA,
        decommit_value=outcome.decommitted_value,
        bids_total=trace.bids_total,
        bids_meaningful=trace.bids_meaningful,
        quasi_q_tick=trace.quasi_quiescence_tick,
        q_tick=trace.quiescence_tick,
        classification=outcome.classification.value,
        within_bound=outcome.bounds.within_general,
    )


def run_instance(args) -> InstanceResult:
    """Sample and run one instance; picklable for the worker pool"""
    config, net, values, index = args
    instance_seed = derive_seed(config.seed, "instance", index)
    rng = np.random.default_rng(instance_seed)
    sample, exists = _draw(config, net, values, rng)
    result = InstanceResult(
        instance_id=index,
        costs={p.id: p.cost for p in sample.net.producers},
        values={c.id: dict(c.values) for c in sample.net.consumers},
        eq_exists=exists,
        efficient_value=sample.value,
        draws=sample.draws,
    )
    for protocol in config.protocols:
        # decommit post-processes a plain run, so both share one schedule
        seed = derive_seed(instance_seed, "plain" if protocol == "decommit" else protocol)
        try:
            result.runs.append(run_protocol(sample.net, sample.value, protocol, seed, config))
        except SimulationError as e:
            result.failures.append((protocol, e.error_code, e.message))
    return result


# ========== EXPERIMENT ==========


def results_frame(results: List[InstanceResult], topology: str) -> pd.DataFrame:
    rows = [
        {
            "instance_id": r.instance_id,
            "topology": topology,
            "eq_exists": r.eq_exists,
            "protocol": p.protocol,
            "efficiency": float(p.efficiency),
            "class": p.efficiency_class,
            "producer_surplus_frac": float(p.producer_surplus_frac),
            "dead_ends": p.dead_ends,
            "lambda_delta": p.lambda_delta,
            "decommit_value": None if p.decommit_value is None else float(p.decommit_value),
            "bids_total": p.bids_total,
            "bids_meaningful": p.bids_meaningful,
            "quasi_q_tick": p.quasi_q_tick,
            "q_tick": p.q_tick,
        }
        for r in results
        for p in r.runs
    ]
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    return frame.astype({"eq_exists": bool, "lambda_delta": bool})


@log_performance(threshold_ms=60_000)
def run_experiment(config: ExperimentConfigFile, workers: Optional[int] = None) -> ExperimentResult:
    workers = workers or config.workers or Config.WORKERS
    net = resolve_topology(config)
    batch = BatchOperationResult()
    with OperationLogger("experiment", topology=config.topology, instances=config.instances, workers=workers):
        calibration_rng = np.random.default_rng(derive_seed(config.seed, "calibration"))
        values = calibrate_values(net, calibration_rng, samples=config.calibration_samples)
        jobs = [(config, net, values, i) for i in range(config.instances)]

        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_guarded, jobs))
        else:
            outcomes = [_guarded(job) for job in jobs]

        results = []
        for index, outcome in enumerate(outcomes):
            if isinstance(outcome, InstanceResult):
                results.append(outcome)
                for protocol, code, message in outcome.failures:
                    batch.add_failure(f"{index}:{protocol}", code, message)
                if outcome.runs:
                    batch.add_success(index, [p.protocol for p in outcome.runs])
            else:
                code, message = outcome
                batch.add_failure(index, code, message)

    frame = results_frame(results, config.topology)
    StructuredLogger.info("Experiment finished", **batch.to_response()["summary"])
    return ExperimentResult(config, results, batch, frame, summary_tables(frame))


def _guarded(job):
    try:
        return run_instance(job)
    except SimulationError as e:
        logger.warning(f"Instance {job[3]} failed: {e.message}")
        return e.error_code, e.message


def write_reports(result: ExperimentResult, out_dir: Union[str, Path]) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "report.csv"
    result.frame.to_csv(report, index=False)
    write_summaries(result.tables, out_dir)
    failures = result.batch.to_response()["errors"]
    if failures:
        pd.DataFrame(failures, columns=["id", "error"]).to_csv(out_dir / "failures.csv", index=False)
    return report
