#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Experiment statistics
Efficiency classes, summary tables and Welch t-tests over report frames
"""

import math
from fractions import Fraction
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from src.shared.error_handler import PreconditionError

CLASSES = ["Negative", "Zero", "Suboptimal", "Optimal"]
GROUP = ["eq_exists", "protocol"]


def efficiency_class(efficiency: Fraction) -> str:
    """Optimal means an exact match with the efficient value"""
    if efficiency < 0:
        return "Negative"
    if efficiency == 0:
        return "Zero"
    if efficiency == 1:
        return "Optimal"
    return "Suboptimal"


def t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Two-sided p-value of Welch's unequal-variance t-test"""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise PreconditionError("Each sample needs at least two observations")
    if np.var(a) == 0 and np.var(b) == 0:
        # no spread on either side: the means either match or they do not
        return 1.0 if a[0] == b[0] else 0.0
    return float(stats.ttest_ind(a, b, equal_var=False).pvalue)


# ========== SUMMARY TABLES ==========


def class_distribution(frame: pd.DataFrame) -> pd.DataFrame:
    """Percent of runs per efficiency class, by equilibrium existence and protocol"""
    table = pd.crosstab([frame["eq_exists"], frame["protocol"]], frame["class"], normalize="index") * 100
    return table.reindex(columns=CLASSES, fill_value=0.0).round(1)


def efficiency_summary(frame: pd.DataFrame) -> pd.DataFrame:
    grouped = frame.groupby(GROUP)["efficiency"]
    return pd.DataFrame({"mean": grouped.mean(), "std": grouped.std(ddof=1), "runs": grouped.count()}).round(4)


def lambda_delta_rate(frame: pd.DataFrame) -> pd.DataFrame:
    rate = frame.groupby(GROUP)["lambda_delta"].mean() * 100
    return rate.round(1).to_frame("lambda_delta_pct")


def class_by_lambda_delta(frame: pd.DataFrame) -> pd.DataFrame:
    """Efficiency classes split by whether the run reached a lambda-delta equilibrium"""
    table = pd.crosstab([frame["protocol"], frame["lambda_delta"]], frame["class"], normalize="index") * 100
    return table.reindex(columns=CLASSES, fill_value=0.0).round(1)


def producer_surplus_summary(frame: pd.DataFrame) -> pd.DataFrame:
    share = frame.groupby(GROUP)["producer_surplus_frac"].mean() * 100
    return share.round(1).to_frame("producer_surplus_pct")


def equilibrium_p_values(frame: pd.DataFrame) -> pd.DataFrame:
    """Welch p-value per protocol between equilibrium and no-equilibrium fleets"""
    rows = []
    for protocol, runs in frame.groupby("protocol", sort=True):
        with_eq = runs.loc[runs["eq_exists"], "efficiency"]
        without = runs.loc[~runs["eq_exists"], "efficiency"]
        p_value = math.nan
        if len(with_eq) >= 2 and len(without) >= 2:
            p_value = t_test(with_eq, without)
        rows.append({"protocol": protocol, "n_eq": len(with_eq), "n_no_eq": len(without), "p_value": p_value})
    return pd.DataFrame(rows, columns=["protocol", "n_eq", "n_no_eq", "p_value"])


def summary_tables(frame: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    if frame.empty:
        return {}
    return {
        "class_distribution": class_distribution(frame),
        "efficiency": efficiency_summary(frame),
        "lambda_delta": lambda_delta_rate(frame),
        "class_by_lambda_delta": class_by_lambda_delta(frame),
        "producer_surplus": producer_surplus_summary(frame),
        "p_values": equilibrium_p_values(frame),
    }


def write_summaries(tables: Dict[str, pd.DataFrame], out_dir: Union[str, Path]):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, table in tables.items():
        table.to_csv(out_dir / f"summary_{name}.csv", index=name != "p_values")
