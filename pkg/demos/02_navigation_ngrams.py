"""
Continuous contrast sets from navigation logs
=============================================

Each crash carries the surfaces the user visited just before it. Weighted
n-grams of those surfaces become real-valued features, mined directly with
ANOVA instead of being chopped into bins.
"""

import numpy as np

from crashcontrast import CcsmConfig, SyntheticSpec, generate_synthetic, mine_continuous
from crashcontrast.ccsm import vocabulary_features
from crashcontrast.dataset import NavSpec, PlantedNGram
from crashcontrast.navfeat import extract_ngrams, idf

# A single log and its bi-grams; repeated transitions count twice.
log = ["Feed", "Photos", "Fundraiser", "Feed", "Photos", "Friends"]
print(extract_ngrams(log, 2))

# Rare grams get a positive weight, grams present in most logs are clamped to 0.
print("idf(10 logs, seen in 2):", round(idf(10, 2), 4), " idf(10, 8):", idf(10, 8))

# Crashes in group "comments" often pass through Comments -> Compose.
spec = SyntheticSpec(groups={"comments": 800, "video": 800, "feed": 800},
                     nav=NavSpec(planted=[PlantedNGram("comments", ["Comments", "Compose"], 0.4)]),
                     seed=3)
crashes = generate_synthetic(spec)
features = vocabulary_features(crashes, n=2, min_df=5)
print(len(features.names), "bi-gram features")

# Survivors are extended by one trailing event, up to max_ngram.
found = mine_continuous(crashes, features, CcsmConfig(alpha=0.05, max_ngram=3))
print("findings per level:", {lvl: sum(r.level == lvl for r in found) for lvl in (1, 2, 3)})
for dev in sorted(found, key=lambda r: r.p_value)[:8]:
    means = np.round([s.mean for s in dev.stats.samples], 3) + 0.0
    print(f"level {dev.level}  {dev.candidate.name:30s} means={means}  p={dev.p_value:.1e}")
