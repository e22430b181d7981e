"""Statistical kernel shared by the miners and the ranker.

Everything here works from sufficient statistics (counts, means, sums of
squared deviations) so that the miners never have to materialize per-group
value vectors for a candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

OK = "ok"
DEGENERATE = "degenerate"
UNTESTABLE = "untestable"


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test.

    ``status`` is ``"ok"``, ``"degenerate"`` (zero within-group variance but a
    real between-group difference, p forced to 0) or ``"untestable"`` (p
    reported as 1 so the node is never significant and gets pruned).
    """

    statistic: float
    p_value: float
    dof: tuple[int, ...]
    status: str = OK

    __test__ = False  # keep pytest from collecting this class

    @property
    def testable(self) -> bool:
        return self.status != UNTESTABLE


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    level: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"interval bounds out of order: {self.lo} > {self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def as_list(self) -> list[float]:
        return [self.lo, self.hi]


@dataclass(frozen=True)
class GroupSample:
    """Count, mean and M2 (sum of squared deviations from the mean)."""

    n: int
    mean: float = 0.0
    m2: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.m2 < 0:
            # cancellation noise from the sum/sum-of-squares path
            object.__setattr__(self, "m2", 0.0)

    @classmethod
    def from_values(cls, values) -> "GroupSample":
        x = np.asarray(values, dtype=float)
        if x.size == 0:
            return cls(0)
        mean = float(x.mean())
        return cls(int(x.size), mean, float(((x - mean) ** 2).sum()))

    @classmethod
    def from_sums(cls, n: int, total: float, total_sq: float) -> "GroupSample":
        if n == 0:
            return cls(0)
        mean = total / n
        return cls(int(n), mean, max(total_sq - total * mean, 0.0))

    @property
    def variance(self) -> float:
        """Unbiased sample variance; 0 when fewer than two observations."""
        return self.m2 / (self.n - 1) if self.n >= 2 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def merge(self, other: "GroupSample") -> "GroupSample":
        """Chan et al. pairwise combination."""
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return GroupSample(n, mean, m2)


def pool(samples: Sequence[GroupSample]) -> GroupSample:
    out = GroupSample(0)
    for s in samples:
        out = out.merge(s)
    return out


def chi2_sf(x, dof):
    """Upper tail of the chi-squared distribution (regularized gamma Q)."""
    return special.gammaincc(np.asarray(dof) / 2.0, np.maximum(np.asarray(x, dtype=float), 0.0) / 2.0)


def f_sf(x, dfn, dfd):
    """Upper tail of the F distribution via the regularized incomplete beta."""
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    dfn = np.asarray(dfn, dtype=float)
    dfd = np.asarray(dfd, dtype=float)
    return special.betainc(dfd / 2.0, dfn / 2.0, dfd / (dfd + dfn * x))


def chi_squared_test(table) -> TestResult:
    """Pearson chi-squared test of independence on a 2 x k table.

    Row 0 holds the counts of records matching the contrast set, row 1 the
    counts that do not; columns are groups.
    """
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.shape[0] != 2:
        raise ValueError("expected a 2 x k contingency table")
    if (t < 0).any():
        raise ValueError("contingency counts must be non-negative")
    k = t.shape[1]
    dof = (k - 1,)
    rows = t.sum(axis=1)
    cols = t.sum(axis=0)
    if k < 2 or (rows <= 0).any() or (cols <= 0).any():
        return TestResult(0.0, 1.0, dof, UNTESTABLE)
    n = rows.sum()
    expected = np.outer(rows, cols) / n
    stat = float(((t - expected) ** 2 / expected).sum())
    return TestResult(stat, float(chi2_sf(stat, k - 1)), dof)


def chi_squared_batch(present, sizes):
    """Vectorized chi-squared over many candidates.

    Args:
        present: (m, k) counts of matching records per group.
        sizes: (k,) group sizes.

    Returns:
        (statistic, p_value, testable, min_expected) arrays of length m.
    """
    a = np.asarray(present, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    n = sizes.sum()
    row1 = a.sum(axis=1)
    row2 = n - row1
    testable = (row1 > 0) & (row2 > 0) & (sizes > 0).all()
    with np.errstate(divide="ignore", invalid="ignore"):
        e1 = row1[:, None] * sizes[None, :] / n
        e2 = row2[:, None] * sizes[None, :] / n
        b = sizes[None, :] - a
        stat = ((a - e1) ** 2 / e1 + (b - e2) ** 2 / e2).sum(axis=1)
    stat = np.where(testable, stat, 0.0)
    p = np.where(testable, chi2_sf(stat, len(sizes) - 1), 1.0)
    min_expected = np.minimum(e1.min(axis=1), e2.min(axis=1))
    return stat, p, testable, np.where(testable, min_expected, 0.0)


def anova_f_test(groups: Sequence[GroupSample]) -> TestResult:
    """One-way ANOVA F-test from per-group sufficient statistics."""
    groups = [g for g in groups if g.n > 0]
    k = len(groups)
    total = sum(g.n for g in groups)
    if k < 2 or total <= k:
        return TestResult(0.0, 1.0, (max(k - 1, 0), max(total - k, 0)), UNTESTABLE)
    dof = (k - 1, total - k)
    grand = sum(g.n * g.mean for g in groups) / total
    ssb = sum(g.n * (g.mean - grand) ** 2 for g in groups)
    ssw = sum(g.m2 for g in groups)
    scale = max(abs(grand), max(abs(g.mean) for g in groups), 1.0)
    if ssw <= 1e-24 * scale * scale * total:
        if ssb <= 1e-24 * scale * scale * total:
            return TestResult(0.0, 1.0, dof, UNTESTABLE)
        return TestResult(math.inf, 0.0, dof, DEGENERATE)
    f = (ssb / (k - 1)) / (ssw / (total - k))
    return TestResult(float(f), float(f_sf(f, k - 1, total - k)), dof)


def anova_batch(n, mean, m2):
    """Vectorized one-way ANOVA.

    Args:
        n, mean, m2: (m, k) arrays of per-group sufficient statistics.

    Returns:
        (F, p_value, status) with status coded 0 ok, 1 degenerate, 2 untestable.
    """
    n = np.asarray(n, dtype=float)
    mean = np.asarray(mean, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    present = n > 0
    k = present.sum(axis=1)
    total = n.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        grand = (n * mean).sum(axis=1) / total
        ssb = (n * (mean - grand[:, None]) ** 2).sum(axis=1)
        ssw = m2.sum(axis=1)
        scale = np.maximum(np.maximum(np.abs(grand), np.abs(np.where(present, mean, 0)).max(axis=1)), 1.0)
        tiny = 1e-24 * scale * scale * total
        dfn = k - 1
        dfd = total - k
        f = (ssb / dfn) / (ssw / dfd)
    untestable = (k < 2) | (total <= k) | ((ssw <= tiny) & (ssb <= tiny))
    degenerate = ~untestable & (ssw <= tiny)
    ok = ~untestable & ~degenerate
    p = np.ones_like(total)
    if ok.any():
        p[ok] = f_sf(f[ok], dfn[ok], dfd[ok])
    p[degenerate] = 0.0
    f = np.where(ok, f, np.where(degenerate, np.inf, 0.0))
    status = np.where(untestable, 2, np.where(degenerate, 1, 0))
    return f, p, status


def pooled_std(a: GroupSample, b: GroupSample) -> float:
    dof = a.n + b.n - 2
    if dof <= 0:
        return 0.0
    return math.sqrt((a.m2 + b.m2) / dof)


def cohens_d(a: GroupSample, b: GroupSample) -> float:
    """Standardized mean difference of ``a`` over ``b`` with pooled std.

    Returns ``+/-inf`` when the pooled deviation is zero but the means differ.
    """
    if a.n + b.n < 3:
        raise ValueError("cohens_d needs at least three observations in total")
    s = pooled_std(a, b)
    diff = a.mean - b.mean
    if s == 0.0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / s


def cohens_h(p1: float, p2: float) -> float:
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
        raise ValueError("proportions must lie in [0, 1]")
    return 2.0 * (math.asin(math.sqrt(p1)) - math.asin(math.sqrt(p2)))


def _z(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be in (0, 1)")
    return float(special.ndtri(0.5 + level / 2.0))


def welch_interval(a: GroupSample, b: GroupSample, level: float = 0.95) -> Interval:
    """Welch t-interval for mean(a) - mean(b)."""
    if a.n < 2 or b.n < 2:
        raise ValueError("welch_interval needs n >= 2 in both samples")
    diff = a.mean - b.mean
    va = a.variance / a.n
    vb = b.variance / b.n
    se2 = va + vb
    if se2 <= 0.0:
        return Interval(diff, diff, level)
    dof = se2 * se2 / (va * va / (a.n - 1) + vb * vb / (b.n - 1))
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be in (0, 1)")
    t = float(special.stdtrit(dof, 0.5 + level / 2.0))
    half = t * math.sqrt(se2)
    return Interval(diff - half, diff + half, level)


def wilson_interval(successes: int, n: int, level: float = 0.95) -> Interval:
    """Wilson score interval without continuity correction."""
    if n < 1 or not 0 <= successes <= n:
        raise ValueError("need 0 <= successes <= n and n >= 1")
    z = _z(level)
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return Interval(lo, hi, level)


def proportion_difference_interval(x1: int, n1: int, x2: int, n2: int, level: float = 0.95) -> Interval:
    """Newcombe hybrid score interval for p1 - p2 built from two Wilson intervals."""
    p1, p2 = x1 / n1, x2 / n2
    w1 = wilson_interval(x1, n1, level)
    w2 = wilson_interval(x2, n2, level)
    d = p1 - p2
    lo = d - math.sqrt((p1 - w1.lo) ** 2 + (w2.hi - p2) ** 2)
    hi = d + math.sqrt((w1.hi - p1) ** 2 + (p2 - w2.lo) ** 2)
    return Interval(lo, hi, level)


def effect_size_interval(kind: str, point: float, n1: int, n2: int, level: float = 0.95) -> Interval:
    """Normal-approximation interval for Cohen's d or Cohen's h."""
    if n1 < 2 or n2 < 2:
        raise ValueError("effect_size_interval needs n1, n2 >= 2")
    if kind == "d":
        se = math.sqrt((n1 + n2) / (n1 * n2) + point * point / (2.0 * (n1 + n2)))
    elif kind == "h":
        se = math.sqrt(1.0 / n1 + 1.0 / n2)
    else:
        raise ValueError(f"unknown effect size kind {kind!r}")
    if not math.isfinite(point):
        return Interval(point, point, level)
    half = _z(level) * se
    return Interval(point - half, point + half, level)


def bonferroni(alpha: float, m: int) -> float:
    if m < 1:
        raise ValueError("number of hypotheses must be >= 1")
    return alpha / m


def level_alpha(alpha: float, level: int, n_tested: int) -> float:
    """Tree-level significance threshold: min(alpha / 2**level, alpha / n_tested)."""
    return min(alpha / 2.0 ** level, alpha / max(n_tested, 1))
