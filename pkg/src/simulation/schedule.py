#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Message delay models

Every message takes at least one tick. Delays come from a seeded numpy
generator, so the same seed, network and config give the same trace.
"""

import json
import re
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError as SchemaError

from src.network.model import TaskDependencyNetwork
from src.shared.error_handler import FormatError, ValidationError
from src.shared.validators import DelayScriptFile


class DelayModel(ABC):
    @abstractmethod
    def delay(self, sender: str, receiver: str, rng: np.random.Generator, index: int = 0) -> int:
        """Ticks for the index-th message sent on the channel"""

    @abstractmethod
    def describe(self) -> str:
        ...


class SynchronousDelay(DelayModel):
    def delay(self, sender, receiver, rng, index=0):
        return 1

    def describe(self):
        return "sync"


@dataclass(frozen=True)
class UniformDelay(DelayModel):
    low: int
    high: int

    def __post_init__(self):
        if self.low < 1 or self.high < self.low:
            raise ValidationError(f"Bad uniform delay range {self.low},{self.high}", field="delay")

    def delay(self, sender, receiver, rng, index=0):
        return int(rng.integers(self.low, self.high + 1))

    def describe(self):
        return f"uniform:{self.low},{self.high}"


@dataclass(frozen=True)
class ScriptedDelay(DelayModel):
    """First matching rule wins; unmatched channels use the default

    A rule is (sender pattern, receiver pattern, ticks, after) and matches a
    channel's messages from the after-th one on, counting from zero.
    """

    default: int = 1
    rules: Tuple[Tuple[str, str, int, int], ...] = ()
    label: str = "script"

    def delay(self, sender, receiver, rng, index=0):
        for sender_pattern, receiver_pattern, ticks, after in self.rules:
            if index >= after and fnmatchcase(sender, sender_pattern) and fnmatchcase(receiver, receiver_pattern):
                return ticks
        return self.default

    def describe(self):
        return self.label


@dataclass
class Schedule:
    seed: int = 0
    model: DelayModel = field(default_factory=SynchronousDelay)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self.sent: Counter = Counter()

    def delay(self, sender: str, receiver: str) -> int:
        index = self.sent[(sender, receiver)]
        self.sent[(sender, receiver)] += 1
        return self.model.delay(sender, receiver, self.rng, index)


def load_script(path) -> ScriptedDelay:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        script = DelayScriptFile.model_validate(data)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"Cannot read delay script: {e}", path=str(path)) from e
    except SchemaError as e:
        raise FormatError(f"Invalid delay script: {e.errors()[0]['msg']}", path=str(path)) from e
    rules = tuple((r.sender, r.receiver, r.delay, r.after) for r in script.channels)
    return ScriptedDelay(script.default, rules, f"script:{path}")


_STAGE_SINK = re.compile(r"^(\d+)-E$")
_STAGE_BRANCH = re.compile(r"^(\d+)-2$")


def worst_case_script(net: TaskDependencyNetwork) -> ScriptedDelay:
    """Hold back each stage's late price change and its second branch's updates

    Every first message stays fast so auctions open on time. Stage i's
    private raise lands after everything stage i-1 sends, and the second
    branch's later offers land after all of the first branch's.
    """
    rules: List[Tuple[str, str, int, int]] = []
    for consumer in net.consumers:
        match = _STAGE_SINK.match(consumer.id)
        if match:
            stage = int(match.group(1))
            for good in sorted(consumer.values):
                rules.append((consumer.id, good, 4 ** (stage + 1), 1))
    for producer in net.producers:
        match = _STAGE_BRANCH.match(producer.id)
        if match:
            stage = int(match.group(1))
            rules.append((producer.id, producer.output, 2 * 4 ** (stage + 1), 1))
    return ScriptedDelay(1, tuple(rules), "script:worst")


def parse_delay(text: str, net: Optional[TaskDependencyNetwork] = None) -> DelayModel:
    """sync | uniform:MIN,MAX | script:PATH | script:worst"""
    text = (text or "sync").strip()
    if text == "sync":
        return SynchronousDelay()
    if text.startswith("uniform:"):
        try:
            low, high = (int(part) for part in text[len("uniform:"):].split(","))
        except ValueError as e:
            raise ValidationError(f"Bad delay {text!r}", field="delay") from e
        return UniformDelay(low, high)
    if text == "script:worst":
        if net is None:
            raise ValidationError("script:worst needs a network", field="delay")
        return worst_case_script(net)
    if text.startswith("script:"):
        return load_script(text[len("script:"):])
    raise ValidationError(f"Unknown delay model {text!r}", field="delay")
