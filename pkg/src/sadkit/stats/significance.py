"""Exact binomial outperformance test and Student/Welch t-tests."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from scipy import stats as _st


class TestKind(str, enum.Enum):
    BINOMIAL = "binomial"
    PAIRED_T = "paired_t"
    TWO_SAMPLE_T = "two_sample_t"


class SignificanceError(ValueError):
    pass


ALPHA = 0.05


@dataclass(frozen=True)
class SignificanceResult:
    test: TestKind
    statistic: float
    p_value: Optional[float]  # None when the test is degenerate
    n: int
    df: Optional[float] = None
    degenerate: bool = False
    # what was compared; used by the report to place markers
    scope: str = ""
    description: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "test", TestKind(self.test))
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise SignificanceError(f"p-value {self.p_value} outside [0, 1]")

    @property
    def significant(self) -> bool:
        return self.p_value is not None and self.p_value < ALPHA


def binomial_tail(k: int, n: int) -> Fraction:
    """Exact P(X >= k) for X ~ Binomial(n, 1/2)."""
    return Fraction(sum(math.comb(n, i) for i in range(k, n + 1)), 2**n)


def binomial_outperformance_test(
    successes: int, trials: int, null_rate: float = 0.5, *, scope: str = "", description: str = ""
) -> SignificanceResult:
    """One-sided exact test that a model beats its baseline more often than ``null_rate``.

    A success is a comparison unit (seed or fold) where the candidate strictly
    beats the baseline; ties count as failures.
    """
    if trials < 1:
        raise SignificanceError("need at least one trial")
    if not 0 <= successes <= trials:
        raise SignificanceError(f"successes {successes} outside 0..{trials}")
    if null_rate == 0.5:
        p = float(binomial_tail(successes, trials))
    else:
        p = float(sum(math.comb(trials, i) * null_rate**i * (1 - null_rate) ** (trials - i)
                      for i in range(successes, trials + 1)))
    return SignificanceResult(TestKind.BINOMIAL, float(successes), min(p, 1.0), trials,
                              scope=scope, description=description)


def _var(x: Sequence[float]) -> float:
    m = sum(x) / len(x)
    return sum((v - m) ** 2 for v in x) / (len(x) - 1)


def _two_sided(t: float, df: float) -> float:
    return float(min(1.0, 2.0 * _st.t.sf(abs(t), df)))


def t_test(
    a: Sequence[float], b: Sequence[float], mode: str = "paired", *, scope: str = "", description: str = ""
) -> SignificanceResult:
    """Two-sided t-test of mean(a) vs mean(b).

    ``paired`` tests the per-unit differences (df = n - 1). ``two_sample`` is
    Welch's unequal-variance test with Welch-Satterthwaite degrees of freedom.
    Zero variance yields a degenerate result with ``p_value=None``.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if mode == "paired":
        if len(a) != len(b):
            raise SignificanceError("paired t-test needs equal-length samples")
        if len(a) < 2:
            raise SignificanceError("paired t-test needs at least 2 pairs")
        d = [x - y for x, y in zip(a, b)]
        n = len(d)
        var = _var(d)
        mean = sum(d) / n
        if var == 0.0:
            return SignificanceResult(TestKind.PAIRED_T, math.nan, None, n, df=n - 1, degenerate=True,
                                      scope=scope, description=description)
        t = mean / math.sqrt(var / n)
        return SignificanceResult(TestKind.PAIRED_T, t, _two_sided(t, n - 1), n, df=n - 1,
                                  scope=scope, description=description)
    if mode == "two_sample":
        if len(a) < 2 or len(b) < 2:
            raise SignificanceError("Welch t-test needs at least 2 values per sample")
        va, vb = _var(a) / len(a), _var(b) / len(b)
        n = len(a) + len(b)
        if va + vb == 0.0:
            return SignificanceResult(TestKind.TWO_SAMPLE_T, math.nan, None, n, degenerate=True,
                                      scope=scope, description=description)
        t = (sum(a) / len(a) - sum(b) / len(b)) / math.sqrt(va + vb)
        df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
        return SignificanceResult(TestKind.TWO_SAMPLE_T, t, _two_sided(t, df), n, df=df,
                                  scope=scope, description=description)
    raise SignificanceError(f"unknown t-test mode {mode!r}")
