#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Exact money arithmetic on a fixed resolution grid.

Every price, cost, value and increment is a Fraction that is an integer
multiple of the network resolution. Fractions keep sums exact, so the
protocol's ties and increments never drift.
"""

from fractions import Fraction
from math import ceil, floor
from typing import Iterable, Union

from .error_handler import ValidationError

Money = Fraction
Number = Union[int, str, Fraction]

DEFAULT_RESOLUTION = Fraction(1, 10000)
ZERO = Fraction(0)


def to_money(value: Number) -> Fraction:
    """Parse an int, decimal string or Fraction without float rounding"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValidationError(f"Not a money amount: {value!r}", field="money")
    if isinstance(value, (int, str)):
        try:
            return Fraction(str(value).strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValidationError(f"Not a money amount: {value!r}", field="money") from e
    if isinstance(value, float):
        # floats only arrive from hand-written configs; go through repr
        return Fraction(repr(value))
    raise ValidationError(f"Not a money amount: {value!r}", field="money")


def on_grid(amount: Fraction, resolution: Fraction = DEFAULT_RESOLUTION) -> bool:
    return (amount / resolution).denominator == 1


def quantize_down(amount: Fraction, resolution: Fraction = DEFAULT_RESOLUTION) -> Fraction:
    return floor(amount / resolution) * resolution


def quantize_up(amount: Fraction, resolution: Fraction = DEFAULT_RESOLUTION) -> Fraction:
    return ceil(amount / resolution) * resolution


def total(amounts: Iterable[Fraction]) -> Fraction:
    return sum(amounts, ZERO)


def format_money(amount: Fraction, resolution: Fraction = DEFAULT_RESOLUTION) -> str:
    """Render a grid amount as a fixed-point decimal string"""
    if not on_grid(amount, resolution):
        return f"{amount.numerator}/{amount.denominator}"
    digits = 0
    denominator = resolution.denominator
    while denominator > 1 and denominator % 10 == 0:
        denominator //= 10
        digits += 1
    if denominator != 1:
        return f"{amount.numerator}/{amount.denominator}"
    sign = "-" if amount < 0 else ""
    scaled = abs(amount) * 10**digits
    whole, frac = divmod(int(scaled), 10**digits)
    if digits == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:0{digits}d}"
