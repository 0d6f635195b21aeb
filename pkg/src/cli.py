#!/usr/bin/env python3
"""
Supply Chain Auction Simulator - CLI Tool
Validate networks, run the protocol, check equilibria and run experiments
"""

import csv
import io
import json
import sys
from pathlib import Path

import click
from loguru import logger

from config.config import Config
from src.analyzers.certificates import (
    certificate_from_outcome,
    certify,
    describe,
    load_certificate,
    save_certificate,
    verify_certificate,
)
from src.analyzers.efficient import efficient_allocation
from src.analyzers.equilibrium import classify_protocol_outcome, competitive_equilibrium_exists
from src.experiments.runner import load_experiment_config, run_experiment, write_reports
from src.network.fixtures import fixture_names, make_fixture
from src.network.io import dumps_network, load_network
from src.network.predicates import allocation_value, blocking, validate_network
from src.shared.error_handler import SimulationError, log_error
from src.shared.logging_setup import OperationLogger, setup_logging
from src.shared.money import format_money, to_money
from src.simulation.kernel import resolve_policy, run
from src.simulation.schedule import Schedule, parse_delay

FORMATS = ["human", "json", "csv"]
ON_OFF = click.Choice(["on", "off"])


def _fail(ctx: click.Context, error: SimulationError):
    log_error(error)
    click.echo(f"❌ Error: {error.message}", err=True)
    ctx.exit(error.exit_code)


def _echo_csv(records, columns):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    click.echo(buffer.getvalue(), nl=False)


def _load_valid(ctx: click.Context, path: str):
    net = load_network(path)
    problems = blocking(validate_network(net))
    if problems:
        for violation in problems:
            click.echo(str(violation), err=True)
        ctx.exit(1)
    return net


@click.group()
@click.version_option(Config.PROJECT_VERSION, prog_name=Config.PROJECT_NAME)
@click.option("--log-level", default=None, help="Log level (default from LOG_LEVEL)")
def cli(log_level):
    """Supply chain formation by simultaneous ascending auctions"""
    setup_logging(level=log_level or Config.LOG_LEVEL, log_dir=Config.LOG_DIR or None)


@cli.command()
@click.argument("network", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def validate(ctx, network):
    """Report every invariant violation of a network file"""
    try:
        violations = validate_network(load_network(network))
    except SimulationError as e:
        _fail(ctx, e)
        return
    for violation in violations:
        click.echo(str(violation))
    if blocking(violations):
        ctx.exit(1)
    click.echo("✅ Network is valid")


@cli.command("run")
@click.argument("network", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=Config.DEFAULT_SEED, help="Schedule seed")
@click.option("--delay", default=Config.DEFAULT_DELAY, help="sync | uniform:MIN,MAX | script:PATH | script:worst")
@click.option("--policy", type=click.Choice(["plain", "safe"]), default=None, help="Producer policy variant")
@click.option("--decommit", type=ON_OFF, default="off", help="Decommit after clearing")
@click.option("--include-cost", type=ON_OFF, default=None, help="Add production cost to output offers")
@click.option("--delta-b", default=None, help="Buy increment")
@click.option("--delta-s", default=None, help="Sell increment")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the outcome certificate here")
@click.option("--trace", type=click.Path(dir_okay=False), default=None, help="Write line-delimited event records here")
@click.option("--event-cap", type=click.IntRange(1), default=None, help="Abort after this many delivered messages")
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="human")
@click.pass_context
def run_command(ctx, network, seed, delay, policy, decommit, include_cost, delta_b, delta_s, out, trace, event_cap, fmt):
    """Run the protocol to quiescence and print prices, allocation and classification"""
    try:
        net = _load_valid(ctx, network)
        overrides = {
            "variant": policy,
            "include_cost": None if include_cost is None else include_cost == "on",
            "delta_buy": None if delta_b is None else to_money(delta_b),
            "delta_sell": None if delta_s is None else to_money(delta_s),
        }
        settings = resolve_policy(net, overrides)
        schedule = Schedule(seed, parse_delay(delay, net))
        with OperationLogger("protocol run", network=network, seed=seed, delay=delay):
            result = run(
                net,
                settings,
                schedule,
                event_cap=event_cap,
                record_trace=trace is not None,
                with_decommit=decommit == "on",
            )
        _, efficient = efficient_allocation(net)
        outcome = classify_protocol_outcome(net, result, efficient)
    except SimulationError as e:
        _fail(ctx, e)
        return

    res = net.resolution
    summary = result.summary(res)
    summary["classification"] = outcome.classification.value
    summary["value"] = format_money(allocation_value(net, result.allocation), res)
    if outcome.decommitted_value is not None:
        summary["decommitted_value"] = format_money(outcome.decommitted_value, res)
    summary["efficient_value"] = format_money(efficient, res)

    if trace:
        with open(trace, "w", encoding="utf-8") as handle:
            for event in result.events:
                handle.write(json.dumps(event) + "\n")
            handle.write(json.dumps(summary) + "\n")
    if out:
        if outcome.check.verified:
            save_certificate(certificate_from_outcome(result, outcome), out, res)
        else:
            logger.warning(f"No certificate written: outcome is {outcome.classification.value}")

    if fmt == "json":
        click.echo(json.dumps(summary, indent=2))
    elif fmt == "csv":
        rows = [
            {"good": g, "price": summary["prices"][g], "ask": summary["asks"].get(g, "")}
            for g in net.goods
        ]
        _echo_csv(rows, ["good", "price", "ask"])
    else:
        click.echo(f"Classification: {outcome.classification.value}")
        click.echo(f"Value: {summary['value']} (efficient {summary['efficient_value']})")
        if "decommitted_value" in summary:
            click.echo(f"After decommitment: {summary['decommitted_value']}")
        click.echo(f"Bids: {result.bids_total} total, {result.bids_meaningful} meaningful")
        click.echo(f"Quiescence at tick {result.quiescence_tick}, quasi-quiescence at {result.quasi_quiescence_tick}")
        click.echo("Prices:")
        for good in net.goods:
            click.echo(f"  {good}: {summary['prices'][good]}")
        click.echo("Allocation:")
        final = result.final_allocation
        for edge in final.to_records():
            click.echo(f"  {edge['from']} -> {edge['to']} ({edge['good']}#{edge['unit']})")
        if result.dead_ends:
            click.echo(f"Dead ends: {', '.join(sorted(result.dead_ends))}")
        for violation in result.violations:
            click.echo(f"⚠️  {violation}")


@cli.command()
@click.argument("network", type=click.Path(exists=True, dir_okay=False))
@click.argument("certificate", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def verify(ctx, network, certificate):
    """Re-check a certificate against a network"""
    try:
        net = _load_valid(ctx, network)
        cert = load_certificate(certificate)
        _, efficient = efficient_allocation(net)
        result, bounds = verify_certificate(net, cert, efficient)
    except SimulationError as e:
        _fail(ctx, e)
        return
    click.echo(describe(result))
    res = net.resolution
    click.echo(
        f"Value {format_money(bounds.achieved, res)} of {format_money(efficient, res)}; "
        f"bound {format_money(bounds.general_bound, res)}"
    )
    if not result.verified:
        ctx.exit(1)
    if bounds.within_general is False:
        click.echo("❌ Value gap exceeds the certified bound")
        ctx.exit(1)


@cli.command("eq-exists")
@click.argument("network", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the witness certificate here")
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="human")
@click.pass_context
def eq_exists(ctx, network, out, fmt):
    """Decide whether a competitive equilibrium exists; print a witness or the clash"""
    try:
        net = _load_valid(ctx, network)
        found = competitive_equilibrium_exists(net)
    except SimulationError as e:
        _fail(ctx, e)
        return
    res = net.resolution
    if not found.exists:
        if fmt == "json":
            click.echo(json.dumps({"exists": False, "clash": found.describe_clash(res)}))
        else:
            click.echo("none")
            click.echo(found.describe_clash(res))
        return
    prices = {g: format_money(found.prices[g], res) for g in net.goods}
    if out:
        save_certificate(certify(net, found.allocation, found.prices, efficient=found.value), out, res)
    if fmt == "json":
        click.echo(json.dumps({"exists": True, "prices": prices}))
    elif fmt == "csv":
        _echo_csv([{"good": g, "price": p} for g, p in prices.items()], ["good", "price"])
    else:
        for good, price in prices.items():
            click.echo(f"p({good}) = {price}")


@cli.command()
@click.argument("network", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["auto", "exhaustive"]), default="auto")
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="human")
@click.pass_context
def efficient(ctx, network, mode, fmt):
    """Print an efficient allocation and its value"""
    try:
        net = _load_valid(ctx, network)
        alloc, value = efficient_allocation(net, mode)
    except SimulationError as e:
        _fail(ctx, e)
        return
    records = alloc.to_records()
    value = format_money(value, net.resolution)
    if fmt == "json":
        click.echo(json.dumps({"value": value, "allocation": records}, indent=2))
    elif fmt == "csv":
        _echo_csv(records, ["from", "to", "good", "unit"])
    else:
        click.echo(f"Value: {value}")
        for edge in records:
            click.echo(f"  {edge['from']} -> {edge['to']} ({edge['good']}#{edge['unit']})")


@cli.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default="results", help="Report directory")
@click.option("--workers", type=click.IntRange(1), default=None, help="Worker processes")
@click.option("--seed", type=click.IntRange(0), default=None, help="Override the config seed")
@click.option("--instances", type=click.IntRange(1), default=None, help="Override the instance count")
@click.pass_context
def experiment(ctx, config_file, out, workers, seed, instances):
    """Run an experiment config and write CSV reports"""
    try:
        config = load_experiment_config(config_file)
        updates = {k: v for k, v in {"seed": seed, "instances": instances}.items() if v is not None}
        config = config.model_copy(update=updates)
        result = run_experiment(config, workers)
    except SimulationError as e:
        _fail(ctx, e)
        return
    report = write_reports(result, out)
    summary = result.batch.to_response()["summary"]
    click.echo(f"✅ {summary['successful']} instance(s) ok, {summary['failed']} failure(s); report at {report}")
    if "class_distribution" in result.tables:
        click.echo(result.tables["class_distribution"].to_string())


@cli.command("gen-fixture")
@click.argument("name", type=click.Choice(fixture_names()))
@click.argument("size", type=int, required=False)
@click.option("--seed", type=click.IntRange(0), default=0, help="Seed for random families")
@click.option("--value", default=None, help="Consumer value where the family takes one")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output path (stdout if omitted)")
@click.pass_context
def gen_fixture(ctx, name, size, seed, value, out):
    """Write a bundled or random topology as a network file"""
    try:
        net = make_fixture(name, size, seed, value)
    except SimulationError as e:
        _fail(ctx, e)
        return
    text = dumps_network(net)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"✅ {name} written to {out}", err=True)
    else:
        sys.stdout.write(text)


def main(argv=None):
    return cli.main(args=argv, prog_name="supplychain-sim")


if __name__ == "__main__":
    main()
