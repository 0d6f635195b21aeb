"""Equilibrium certificates: build, export, import and re-check"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError as SchemaError

from src.network.model import Allocation, PriceSystem, TaskDependencyNetwork
from src.shared.error_handler import FormatError
from src.shared.money import format_money, to_money
from src.shared.validators import CertificateFile

from .equilibrium import (
    BoundReport,
    CheckResult,
    LambdaParams,
    ProtocolOutcome,
    check_competitive_equilibrium,
    check_lambda_delta,
)


@dataclass
class EquilibriumCertificate:
    allocation: Allocation
    prices: PriceSystem
    kind: str = "exact"  # exact | lambda-delta
    params: LambdaParams = field(default_factory=LambdaParams)
    slacks: Dict[str, Fraction] = field(default_factory=dict)
    bounds: Optional[BoundReport] = None


def verify_certificate(net: TaskDependencyNetwork, cert: EquilibriumCertificate, efficient: Optional[Fraction] = None):
    """Re-derive every condition from the certificate's allocation and prices alone"""
    if cert.kind == "exact":
        result = check_competitive_equilibrium(net, cert.allocation, cert.prices)
        _, bounds = check_lambda_delta(net, cert.allocation, cert.prices, LambdaParams(), efficient)
        return result, bounds
    return check_lambda_delta(net, cert.allocation, cert.prices, cert.params, efficient)


def certify(
    net: TaskDependencyNetwork,
    alloc: Allocation,
    prices: PriceSystem,
    params: Optional[LambdaParams] = None,
    efficient: Optional[Fraction] = None,
) -> EquilibriumCertificate:
    kind = "exact" if params is None else "lambda-delta"
    cert = EquilibriumCertificate(alloc, prices, kind, params or LambdaParams())
    result, bounds = verify_certificate(net, cert, efficient)
    cert.slacks = dict(result.slacks)
    cert.bounds = bounds
    return cert


def certificate_from_outcome(trace, outcome: ProtocolOutcome) -> EquilibriumCertificate:
    """Lambda-delta certificate of a cleared run, lambdas taken from the final quotes"""
    return EquilibriumCertificate(
        trace.allocation,
        trace.prices,
        "lambda-delta",
        outcome.params,
        dict(outcome.check.slacks),
        outcome.bounds,
    )


def certificate_to_dict(cert: EquilibriumCertificate, resolution: Fraction) -> Dict[str, Any]:
    def money(amount):
        return None if amount is None else format_money(amount, resolution)

    data: Dict[str, Any] = {
        "kind": cert.kind,
        "allocation": cert.allocation.to_records(),
        "prices": {g: money(p) for g, p in sorted(cert.prices.prices.items())},
        "delta_buy": money(cert.params.delta_buy),
        "delta_sell": money(cert.params.delta_sell),
        "lambda": {f"{p}|{g}": money(v) for (p, g), v in sorted(cert.params.lam.items())},
        "slacks": {a: money(s) for a, s in sorted(cert.slacks.items())},
    }
    if cert.bounds is not None:
        data["bounds"] = {
            "achieved": money(cert.bounds.achieved),
            "efficient": money(cert.bounds.efficient),
            "general": money(cert.bounds.general_bound),
            "tight": money(cert.bounds.tight_bound),
        }
    return data


def certificate_from_dict(data: Dict[str, Any]) -> EquilibriumCertificate:
    try:
        doc = CertificateFile.model_validate(data)
    except SchemaError as e:
        raise FormatError(f"Invalid certificate: {e.errors()[0]['msg']}") from e
    lam = {}
    for key, amount in doc.lam.items():
        producer, _, good = key.partition("|")
        if not good:
            raise FormatError(f"Lambda key {key!r} is not 'producer|good'")
        lam[(producer, good)] = to_money(amount)
    allocation = Allocation.from_records(e.model_dump(by_alias=True) for e in doc.allocation)
    params = LambdaParams(to_money(doc.delta_buy), to_money(doc.delta_sell), lam)
    prices = PriceSystem({g: to_money(p) for g, p in doc.prices.items()})
    return EquilibriumCertificate(allocation, prices, doc.kind, params)


def save_certificate(cert: EquilibriumCertificate, path: Union[str, Path], resolution: Fraction):
    text = json.dumps(certificate_to_dict(cert, resolution), indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_certificate(path: Union[str, Path]) -> EquilibriumCertificate:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"Cannot read certificate: {e}", path=str(path)) from e
    return certificate_from_dict(data)


def describe(result: CheckResult) -> str:
    if result.verified:
        return "verified"
    return "\n".join(str(v) for v in result.violations)
