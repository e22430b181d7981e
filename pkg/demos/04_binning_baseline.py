"""
Why not just bin continuous features?
=====================================

Equal-width binning turns every continuous column into several categorical
values, so the search tests many more candidates and can hide structure.
"""

import numpy as np

from crashcontrast import (CcsmConfig, ContinuousFeature, MinerConfig, PlantedContinuous, SyntheticSpec,
                           generate_synthetic)
from crashcontrast.bench import run_bench, to_table
from crashcontrast.ccsm import mine_binned_baseline, mine_continuous
from crashcontrast.dataset import CONTINUOUS, Column, Dataset, discretize_equiwidth

spec = SyntheticSpec(groups={"A": 2000, "B": 2000},
                     continuous=[ContinuousFeature(f"x{i}", 0.0, 1.0) for i in range(60)],
                     planted_continuous=[PlantedContinuous("A", "x0", 0.5)], seed=5)
crashes = generate_synthetic(spec)
rows = run_bench(crashes, [2000, 4000], ccsm_cfg=CcsmConfig(), miner_cfg=MinerConfig(), timeout=120)
print(to_table(rows))

# A zero-inflated feature with a small hump that only group A produces.
rng = np.random.default_rng(0)
n = 4000
groups = np.array([0, 1] * (n // 2))
x = np.where(rng.random(n) < 0.9, 0.0, rng.exponential(3.0, n))
hump = (groups == 0) & (rng.random(n) < 0.05)
x[hump] = rng.normal(6.0, 0.3, hump.sum())
x[0] = 30.0
d = Dataset((Column("t", CONTINUOUS, x),), "sig", ("A", "B"), groups)

# With three bins the hump shares the first bin with the zeros.
binned = discretize_equiwidth(d, 3).column("t")
print("bin labels:", binned.categories)
print("hump rows per bin:", np.bincount(binned.values[hump], minlength=3))
print("binned findings:", len(mine_binned_baseline(d, 3, MinerConfig())))
print("continuous findings:", [r.candidate.name for r in mine_continuous(d, cfg=CcsmConfig())])
