#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
File and config validation layer
Pydantic models for network files, delay scripts, certificates and experiments
"""

from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .error_handler import SimulationError
from .money import to_money as _to_money

Amount = Union[str, int, float]


def to_money(v):
    try:
        return _to_money(v)
    except SimulationError as e:
        raise ValueError(e.message) from None


def _check_amount(v):
    to_money(v)
    return v


# ========== POLICY MODELS ==========


class PolicyBlock(BaseModel):
    """Bidding policy settings; every field optional so blocks can layer"""

    model_config = ConfigDict(extra="forbid")

    variant: Optional[Literal["plain", "safe"]] = Field(None, description="Producer policy variant")
    include_cost: Optional[bool] = Field(None, description="Add production cost to output offers")
    delta_buy: Optional[Amount] = Field(None, description="Buy increment")
    delta_sell: Optional[Amount] = Field(None, description="Sell increment")

    @field_validator("delta_buy", "delta_sell")
    def amounts_parse(cls, v):
        if v is None:
            return v
        if to_money(v) < 0:
            raise ValueError("Increment must be nonnegative")
        return v


# ========== NETWORK MODELS ==========


class InputEntry(BaseModel):
    """One input good of a producer"""

    good: str = Field(..., min_length=1, description="Input good")
    units: int = Field(1, description="Units required")


class ConsumerEntry(BaseModel):
    """Consumer declaration"""

    id: str = Field(..., min_length=1, description="Agent id")
    values: Dict[str, Amount] = Field(default_factory=dict, description="Value per good")
    policy: Optional[PolicyBlock] = None

    @field_validator("values")
    def values_parse(cls, v):
        for amount in v.values():
            _check_amount(amount)
        return v


class ProducerEntry(BaseModel):
    """Producer declaration"""

    id: str = Field(..., min_length=1, description="Agent id")
    output: str = Field(..., min_length=1, description="Output good")
    inputs: List[InputEntry] = Field(default_factory=list, description="Input recipe")
    cost: Amount = Field(0, description="Production cost")
    policy: Optional[PolicyBlock] = None

    @field_validator("cost")
    def cost_parse(cls, v):
        return _check_amount(v)


class NetworkFile(BaseModel):
    """Network file"""

    resolution: Amount = Field("0.0001", description="Money grid")
    goods: List[str] = Field(default_factory=list)
    consumers: List[ConsumerEntry] = Field(default_factory=list)
    producers: List[ProducerEntry] = Field(default_factory=list)
    protocol: Optional[PolicyBlock] = None
    provenance: Optional[str] = None

    @field_validator("resolution")
    def resolution_positive(cls, v):
        if to_money(v) <= 0:
            raise ValueError("Resolution must be positive")
        return v


class AllocationEdgeEntry(BaseModel):
    """Allocation snapshot edge"""

    model_config = ConfigDict(populate_by_name=True)

    source: str = Field(..., alias="from")
    to: str
    good: str
    unit: int = 0


# ========== DELAY SCRIPT MODELS ==========


class ChannelRule(BaseModel):
    """Delay rule for matching channels; patterns use shell wildcards"""

    sender: str = Field("*", description="Sender pattern")
    receiver: str = Field("*", description="Receiver pattern")
    delay: int = Field(..., ge=1, description="Delay in ticks")
    after: int = Field(0, ge=0, description="Messages on the channel sent before the rule applies")


class DelayScriptFile(BaseModel):
    """Adversarial delivery script"""

    default: int = Field(1, ge=1, description="Delay for unmatched channels")
    channels: List[ChannelRule] = Field(default_factory=list)


# ========== CERTIFICATE MODELS ==========


class CertificateFile(BaseModel):
    """Equilibrium certificate"""

    kind: Literal["exact", "lambda-delta"] = "exact"
    allocation: List[AllocationEdgeEntry] = Field(default_factory=list)
    prices: Dict[str, Amount] = Field(default_factory=dict)
    delta_buy: Amount = "0"
    delta_sell: Amount = "0"
    # "producer|good" -> lambda per unit
    lam: Dict[str, Amount] = Field(default_factory=dict, alias="lambda")
    slacks: Dict[str, str] = Field(default_factory=dict)
    bounds: Dict[str, Optional[str]] = Field(default_factory=dict)

    model_config = ConfigDict(populate_by_name=True)

    @field_validator("prices")
    def prices_parse(cls, v):
        for amount in v.values():
            if to_money(amount) < 0:
                raise ValueError("Prices must be nonnegative")
        return v


# ========== EXPERIMENT MODELS ==========


class ExperimentConfigFile(BaseModel):
    """Experiment configuration"""

    topology: str = Field(..., description="Network file path or generator name")
    topology_size: Optional[int] = Field(None, description="Size parameter for generators")
    instances: int = Field(10, ge=1)
    seed: int = Field(0, ge=0)
    delta_buy: Amount = "0.01"
    delta_sell: Amount = "0.01"
    protocols: List[Literal["plain", "safe", "decommit"]] = Field(
        default_factory=lambda: ["plain", "decommit"]
    )
    equilibrium: Literal["any", "exists", "not-exists"] = "any"
    calibration_samples: Optional[int] = Field(None, ge=1)
    delay: str = Field("uniform:1,5", description="Delay model for every run")
    include_cost: bool = True
    event_cap: Optional[int] = Field(None, ge=1)
    workers: Optional[int] = Field(None, ge=1)

    @field_validator("delta_buy", "delta_sell")
    def increments_parse(cls, v):
        if to_money(v) < 0:
            raise ValueError("Increment must be nonnegative")
        return v
