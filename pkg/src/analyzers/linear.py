"""
Exact rational linear feasibility

Systems are lists of `Constraint` rows read as  sum(coeffs[v] * v) <= bound
over nonnegative variables. `feasible_point` runs a phase-one simplex on
a Fraction tableau with Bland's rule. `explain_infeasibility` projects an
infeasible system onto one variable by Fourier-Motzkin elimination and
reports the lower and upper bounds that cross.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from loguru import logger

MAX_ROWS = 20_000


@dataclass(frozen=True)
class Constraint:
    coeffs: Dict[str, Fraction]
    bound: Fraction
    label: str = field(default="", compare=False)

    def holds(self, point: Dict[str, Fraction]) -> bool:
        return sum(c * point.get(v, 0) for v, c in self.coeffs.items()) <= self.bound


def feasible_point(constraints: Sequence[Constraint], variables: Iterable[str]) -> Optional[Dict[str, Fraction]]:
    """Some nonnegative point satisfying every row, or None"""
    names = sorted(set(variables) | {v for c in constraints for v in c.coeffs})
    column = {v: j for j, v in enumerate(names)}
    n, m = len(names), len(constraints)
    negative = [i for i, c in enumerate(constraints) if c.bound < 0]
    width = n + m + len(negative)
    artificial_of = {i: n + m + k for k, i in enumerate(negative)}

    rows: List[List[Fraction]] = []
    rhs: List[Fraction] = []
    basis: List[int] = []
    for i, constraint in enumerate(constraints):
        row = [Fraction(0)] * width
        for v, c in constraint.coeffs.items():
            row[column[v]] = Fraction(c)
        row[n + i] = Fraction(1)
        b = Fraction(constraint.bound)
        if i in artificial_of:
            row = [-x for x in row]
            b = -b
            row[artificial_of[i]] = Fraction(1)
            basis.append(artificial_of[i])
        else:
            basis.append(n + i)
        rows.append(row)
        rhs.append(b)

    # phase-one reduced costs: minimize the sum of artificials
    reduced = [Fraction(1) if j >= n + m else Fraction(0) for j in range(width)]
    for i in negative:
        reduced = [r - x for r, x in zip(reduced, rows[i])]

    while True:
        entering = next((j for j in range(width) if reduced[j] < 0), None)
        if entering is None:
            break
        leaving = None
        for i in range(m):
            if rows[i][entering] > 0:
                key = (rhs[i] / rows[i][entering], basis[i])
                if leaving is None or key < leaving[0]:
                    leaving = (key, i)
        if leaving is None:
            break
        _pivot(rows, rhs, reduced, basis, leaving[1], entering)

    if any(rhs[i] > 0 for i in range(m) if basis[i] >= n + m):
        return None
    point = {v: Fraction(0) for v in names}
    for i, j in enumerate(basis):
        if j < n:
            point[names[j]] = rhs[i]
    return point


def _pivot(rows, rhs, reduced, basis, i, j):
    pivot = rows[i][j]
    rows[i] = [x / pivot for x in rows[i]]
    rhs[i] /= pivot
    for k in range(len(rows)):
        if k != i and rows[k][j] != 0:
            factor = rows[k][j]
            rows[k] = [a - factor * b for a, b in zip(rows[k], rows[i])]
            rhs[k] -= factor * rhs[i]
    factor = reduced[j]
    if factor != 0:
        reduced[:] = [a - factor * b for a, b in zip(reduced, rows[i])]
    basis[i] = j


# ========== FOURIER-MOTZKIN ==========


class Clash(NamedTuple):
    variable: Optional[str]
    lower: Optional[Fraction]
    upper: Optional[Fraction]


def _normalize(coeffs: Dict[str, Fraction], bound: Fraction) -> Tuple[Tuple, Fraction]:
    coeffs = {v: c for v, c in coeffs.items() if c != 0}
    if not coeffs:
        return (), bound
    scale = abs(coeffs[min(coeffs)])
    return tuple(sorted((v, c / scale) for v, c in coeffs.items())), bound / scale


def _eliminate(system: Dict[Tuple, Fraction], variable: str) -> Optional[Dict[Tuple, Fraction]]:
    upper, lower, rest = [], [], {}
    for key, bound in system.items():
        coeff = dict(key).get(variable, 0)
        if coeff > 0:
            upper.append((dict(key), bound, coeff))
        elif coeff < 0:
            lower.append((dict(key), bound, -coeff))
        else:
            rest[key] = bound
    if len(rest) + len(upper) * len(lower) > MAX_ROWS:
        return None
    for up, ub, uc in upper:
        for lo, lb, lc in lower:
            merged = {}
            for v in set(up) | set(lo):
                if v != variable:
                    merged[v] = up.get(v, 0) / uc + lo.get(v, 0) / lc
            key, bound = _normalize(merged, ub / uc + lb / lc)
            if key in rest:
                rest[key] = min(rest[key], bound)
            else:
                rest[key] = bound
    return rest


def explain_infeasibility(
    constraints: Sequence[Constraint], variables: Iterable[str], prefer: Sequence[str] = ()
) -> Optional[Clash]:
    """Crossing bounds on a single variable, trying `prefer` first"""
    names = sorted(set(variables) | {v for c in constraints for v in c.coeffs})
    base: Dict[Tuple, Fraction] = {}
    for c in constraints:
        key, bound = _normalize(dict(c.coeffs), Fraction(c.bound))
        base[key] = min(base.get(key, bound), bound)
    for v in names:
        key, bound = _normalize({v: Fraction(-1)}, Fraction(0))
        base[key] = min(base.get(key, bound), bound)

    order = [v for v in prefer if v in names] + [v for v in names if v not in prefer]
    for keep in order:
        system = dict(base)
        others = [v for v in names if v != keep]
        while others and system is not None:
            variable = min(others, key=lambda v: _fanout(system, v))
            others.remove(variable)
            system = _eliminate(system, variable)
        if system is None:
            logger.debug(f"Projection onto {keep} grew too large; skipping")
            continue
        if system.get((), 0) < 0:
            return Clash(None, None, None)
        lower, upper = None, None
        for key, bound in system.items():
            if not key:
                continue
            (_, coeff), = key
            if coeff > 0:
                value = bound / coeff
                upper = value if upper is None else min(upper, value)
            else:
                value = bound / coeff
                lower = value if lower is None else max(lower, value)
        if lower is not None and upper is not None and lower > upper:
            return Clash(keep, lower, upper)
    return None


def _fanout(system, variable) -> int:
    pos = sum(1 for key in system if dict(key).get(variable, 0) > 0)
    neg = sum(1 for key in system if dict(key).get(variable, 0) < 0)
    return pos * neg - pos - neg
