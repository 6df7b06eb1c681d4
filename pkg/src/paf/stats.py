"""Score aggregation and one-sided paired t-tests.

The Student-t upper-tail probability is computed through the regularized
incomplete beta function: for t >= 0 and df = v,

    sf(t, v) = 0.5 * I_x(v/2, 1/2)   with   x = v / (v + t^2)

and sf(-t, v) = 1 - sf(t, v), which makes the directional antisymmetry
p(a,b) + p(b,a) = 1 exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import betainc

HIT_THRESHOLD = 0.97
HIGH_THRESHOLD = 0.8


class EmptyInput(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class TooFewPairs(ValueError):
    """Paired test needs at least two pairs."""


@dataclass(frozen=True)
class MetricsSummary:
    method: str
    total_hits: int        # scores strictly above 0.97
    count_above_0_8: int   # scores strictly above 0.8
    mean: float
    median: float
    n: int


@dataclass(frozen=True)
class TTestResult:
    comparison: tuple[str, str]
    t_statistic: float
    degrees_of_freedom: int
    p_value: float
    alpha: float
    significant: bool
    degenerate: Optional[str] = None  # "zero_variance" | "identical"


def aggregate(scores: Sequence[float], method: str = "") -> MetricsSummary:
    """Hit counts (strict thresholds), mean, and median of a score list."""
    if len(scores) == 0:
        raise EmptyInput("cannot aggregate an empty score list")
    values = sorted(float(s) for s in scores)
    n = len(values)
    if n % 2:
        median = values[n // 2]
    else:
        median = (values[n // 2 - 1] + values[n // 2]) / 2.0
    return MetricsSummary(
        method=method,
        total_hits=sum(1 for s in values if s > HIT_THRESHOLD),
        count_above_0_8=sum(1 for s in values if s > HIGH_THRESHOLD),
        mean=sum(values) / n,
        median=median,
        n=n,
    )


def student_t_sf(t: float, df: int) -> float:
    """Upper-tail probability P(T >= t) for Student's t with df degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * float(betainc(df / 2.0, 0.5, x))
    return tail if t > 0 else 1.0 - tail


def paired_t_one_sided(
    a: Sequence[float],
    b: Sequence[float],
    alpha: float = 0.05,
    comparison: tuple[str, str] = ("a", "b"),
) -> TTestResult:
    """One-sided paired t-test of H: mean(b - a) > 0.

    t = mean(d) / (sd(d) / sqrt(n)) with sample sd (n-1 divisor), df = n-1.
    Degenerate inputs do not raise: identical samples report p = 0.5 and
    zero-variance nonzero differences report t = +/-inf with p = 0 or 1,
    both flagged on the result.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise TooFewPairs(f"need at least 2 pairs, got {n}")
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    mean_d = float(np.mean(d))
    sd_d = float(np.std(d, ddof=1))
    df = n - 1
    if sd_d == 0.0:
        if mean_d == 0.0:
            return TTestResult(
                comparison=comparison,
                t_statistic=0.0,
                degrees_of_freedom=df,
                p_value=0.5,
                alpha=alpha,
                significant=0.5 < alpha,
                degenerate="identical",
            )
        t = float("inf") if mean_d > 0 else float("-inf")
        p = 0.0 if mean_d > 0 else 1.0
        return TTestResult(
            comparison=comparison,
            t_statistic=t,
            degrees_of_freedom=df,
            p_value=p,
            alpha=alpha,
            significant=p < alpha,
            degenerate="zero_variance",
        )
    t = mean_d / (sd_d / n ** 0.5)
    p = student_t_sf(t, df)
    return TTestResult(
        comparison=comparison,
        t_statistic=t,
        degrees_of_freedom=df,
        p_value=p,
        alpha=alpha,
        significant=p < alpha,
    )
