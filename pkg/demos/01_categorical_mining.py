"""
Mining categorical contrast sets
================================

Crash reports arrive already grouped by signature. We want attribute values
(or small conjunctions of them) whose frequency differs across signatures.
"""

from crashcontrast import CategoricalFeature, MinerConfig, PlantedCategorical, SyntheticSpec
from crashcontrast import generate_synthetic, mine_categorical
from crashcontrast.stucco import SearchStats

# Two signatures, three device attributes. Signature "oom" is planted to run
# on country_2 half the time, while other crashes see it 10% of the time.
spec = SyntheticSpec(
    groups={"oom": 2000, "npe": 3000},
    categorical=[CategoricalFeature("country", 5), CategoricalFeature("os", 4),
                 CategoricalFeature("app_build", 6)],
    planted_categorical=[PlantedCategorical("oom", "country", "country_2", 0.5, 0.1)],
    seed=1,
)
crashes = generate_synthetic(spec)
print(crashes.n_rows, "rows, groups:", crashes.groups)

# The search walks conjunctions level by level and only expands nodes that
# differ significantly (chi-squared) and by at least delta in support.
search = SearchStats()
found = mine_categorical(crashes, MinerConfig(delta=0.05, alpha=0.05, max_depth=3), search=search)

for dev in found:
    supports = ", ".join(f"{g}={s:.3f}" for g, s in zip(dev.supports.groups, dev.supports.supports))
    print(f"{dev.contrast.label(crashes):45s} {supports}  p={dev.p_value:.2e}")

# Candidates tested per level shrink quickly because only survivors grow.
print("tested per level:", search.tested, "emitted per level:", search.emitted)

# Other attribute values look depleted inside "oom" only because country_2
# took their share; those sets are negative for "oom" and positive for "npe".
