"""Run-to-run statistics: mean/SD summaries and Student's t-tests.

The two-tailed p-value for a t statistic with ``df`` degrees of freedom
is the regularized incomplete beta function I_x(df/2, 1/2) evaluated at
x = df / (df + t**2). That function is implemented here directly with
the modified Lentz continued-fraction algorithm so the package has no
statistical dependency; the test suite checks it against numerical
quadrature of the beta integrand, which shares no code with this path.

Degenerate inputs follow the convention that identical data are maximal
evidence for the null: zero variance with equal means gives p = 1.0
exactly, zero variance with unequal means gives p = 0.0 and a warning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

__all__ = [
    "RunSeries",
    "SummaryStats",
    "TTestResult",
    "Comparison",
    "summarize",
    "format_mean_sd",
    "regularized_incomplete_beta",
    "t_test",
    "significance_table",
]

_TINY = 1e-300


@dataclass(frozen=True)
class RunSeries:
    """A labeled sequence of per-run values for one metric."""

    label: str
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError(f"series {self.label!r} contains non-finite values")


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    sd: float
    n: int


def summarize(values: Sequence[float] | RunSeries) -> SummaryStats:
    """Mean and sample standard deviation (ddof=1); requires >= 2 values."""
    if isinstance(values, RunSeries):
        values = values.values
    n = len(values)
    if n < 2:
        raise ValueError("a standard deviation needs at least 2 values")
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return SummaryStats(mean=mean, sd=math.sqrt(var), n=n)


def _significant_figures(value: float, figures: int) -> str:
    if value == 0 or not math.isfinite(value):
        return f"{value:.{figures - 1}f}"
    decimals = max(0, figures - 1 - math.floor(math.log10(abs(value))))
    return f"{value:.{decimals}f}"


def format_mean_sd(mean: float, sd: float) -> str:
    """Render as e.g. ``0.824±0.0070``: 3 significant figures, SD to 4 decimals."""
    return f"{_significant_figures(mean, 3)}±{sd:.4f}"


def _beta_continued_fraction(a: float, b: float, x: float, tol: float, max_iter: int) -> float:
    """Modified Lentz evaluation of the incomplete-beta continued fraction."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        # even step
        numer = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numer * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + numer / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        numer = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numer * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + numer / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(
    a: float, b: float, x: float, tol: float = 1e-12, max_iter: int = 300
) -> float:
    """I_x(a, b), the CDF of the Beta(a, b) distribution at x."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        a * math.log(x)
        + b * math.log1p(-x)
        - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    )
    front = math.exp(log_front)
    # the continued fraction converges fast only on one side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x, tol, max_iter) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x, tol, max_iter) / b


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    df: float
    p_value: float
    paired: bool
    welch: bool = False


def _two_tailed_p(t: float, df: float) -> float:
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def t_test(
    xs: Sequence[float], ys: Sequence[float], paired: bool = False, welch: bool = False
) -> TTestResult:
    """Two-tailed t-test between two samples.

    Unpaired defaults to Student's pooled-variance statistic with
    n1+n2-2 degrees of freedom; ``welch=True`` switches to the
    unequal-variance statistic with Welch-Satterthwaite degrees of
    freedom. Paired tests the per-index differences with n-1.
    """
    if paired:
        if welch:
            raise ValueError("welch applies only to unpaired tests")
        if len(xs) != len(ys):
            raise ValueError("paired test requires samples of equal length")
        if len(xs) < 2:
            raise ValueError("paired test requires at least 2 pairs")
        diffs = [x - y for x, y in zip(xs, ys)]
        stats = summarize(diffs)
        df = stats.n - 1
        if stats.sd == 0.0:
            return _degenerate(stats.mean, df, paired=True)
        t = stats.mean / (stats.sd / math.sqrt(stats.n))
        return TTestResult(statistic=t, df=df, p_value=_two_tailed_p(t, df), paired=True)

    if len(xs) < 2 or len(ys) < 2:
        raise ValueError("unpaired test requires at least 2 values per sample")
    sx, sy = summarize(xs), summarize(ys)
    if welch:
        vx, vy = sx.sd**2 / sx.n, sy.sd**2 / sy.n
        if vx + vy == 0.0:
            return _degenerate(sx.mean - sy.mean, sx.n + sy.n - 2, paired=False, welch=True)
        df = (vx + vy) ** 2 / (vx**2 / (sx.n - 1) + vy**2 / (sy.n - 1))
        t = (sx.mean - sy.mean) / math.sqrt(vx + vy)
        return TTestResult(
            statistic=t, df=df, p_value=_two_tailed_p(t, df), paired=False, welch=True
        )
    df = sx.n + sy.n - 2
    pooled_var = ((sx.n - 1) * sx.sd**2 + (sy.n - 1) * sy.sd**2) / df
    if pooled_var == 0.0:
        return _degenerate(sx.mean - sy.mean, df, paired=False)
    t = (sx.mean - sy.mean) / math.sqrt(pooled_var * (1.0 / sx.n + 1.0 / sy.n))
    return TTestResult(statistic=t, df=df, p_value=_two_tailed_p(t, df), paired=False)


def _degenerate(mean_diff: float, df: float, paired: bool, welch: bool = False) -> TTestResult:
    if mean_diff == 0.0:
        return TTestResult(statistic=0.0, df=df, p_value=1.0, paired=paired, welch=welch)
    warnings.warn(
        "zero variance with unequal means; reporting p = 0", RuntimeWarning, stacklevel=3
    )
    t = math.copysign(math.inf, mean_diff)
    return TTestResult(statistic=t, df=df, p_value=0.0, paired=paired, welch=welch)


@dataclass(frozen=True)
class Comparison:
    """One pairwise test between two labeled samples."""

    label_a: str
    label_b: str
    stats_a: SummaryStats
    stats_b: SummaryStats
    result: TTestResult
    alpha: float

    @property
    def significant(self) -> bool:
        return self.result.p_value < self.alpha


def significance_table(
    samples: Mapping[str, Sequence[float]],
    paired: bool = False,
    alpha: float = 0.05,
) -> list[Comparison]:
    """All pairwise t-tests between labeled samples, in input label order."""
    labels = list(samples)
    rows = []
    for a, b in combinations(labels, 2):
        rows.append(
            Comparison(
                label_a=a,
                label_b=b,
                stats_a=summarize(samples[a]),
                stats_b=summarize(samples[b]),
                result=t_test(samples[a], samples[b], paired=paired),
                alpha=alpha,
            )
        )
    return rows
