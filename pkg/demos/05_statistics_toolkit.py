"""
The statistics underneath
=========================

Tests, effect sizes, intervals and multiple-testing helpers, all computed
from small sufficient statistics.
"""

import numpy as np

from crashcontrast import stats
from crashcontrast.stats import GroupSample

# Chi-squared on a 2 x k present/absent table: 30 of 100 versus 10 of 100.
print(stats.chi_squared_test([[30, 10], [70, 90]]))

# One-way ANOVA from (n, mean, M2) per group.
groups = [GroupSample.from_values(v) for v in ([1, 2, 3], [2, 3, 4], [3, 4, 5])]
print(stats.anova_f_test(groups))

# Group summaries merge exactly, so data can be streamed in chunks.
rng = np.random.default_rng(1)
chunks = [rng.normal(5, 2, 1000) for _ in range(4)]
merged = stats.pool(GroupSample.from_values(c) for c in chunks)
print("merged mean/std:", round(merged.mean, 4), round(merged.std, 4))

# Effect sizes and their intervals.
a, b = GroupSample.from_values(rng.normal(0.5, 1, 200)), GroupSample.from_values(rng.normal(0, 1, 200))
d = stats.cohens_d(a, b)
print("d =", round(d, 3), stats.effect_size_interval("d", d, a.n, b.n))
print("h(0.3, 0.1) =", round(stats.cohens_h(0.3, 0.1), 4))
print("Wilson 50/100:", stats.wilson_interval(50, 100))
print("Welch mean difference:", stats.welch_interval(a, b))
print("difference of proportions:", stats.proportion_difference_interval(30, 100, 10, 100))

# Per-level significance tightens with depth and with the number of tests.
for level, tested in [(1, 10), (2, 10), (3, 200)]:
    print(f"level {level}, {tested} tests -> alpha {stats.level_alpha(0.05, level, tested):.5f}")
