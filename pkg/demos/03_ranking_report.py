"""
Ranking findings of both kinds on one scale
===========================================

Categorical findings are scored with Cohen's h and continuous ones with
Cohen's d. Both are standardized, so a single per-group list can hold both.
"""

from crashcontrast import (CategoricalFeature, CcsmConfig, ContinuousFeature, MinerConfig, PlantedCategorical,
                           PlantedContinuous, SyntheticSpec, generate_synthetic, mine_categorical,
                           mine_continuous, rank_findings, render_report, score_deviations)
from crashcontrast.ranking import score_categorical
from crashcontrast.stucco import ContrastSet, SupportTable

spec = SyntheticSpec(
    groups={"G1": 1500, "G2": 1500, "G3": 1500},
    categorical=[CategoricalFeature("country", 4), CategoricalFeature("os", 3)],
    continuous=[ContinuousFeature("uptime_s", 300.0, 60.0), ContinuousFeature("free_mem_mb", 900.0, 150.0)],
    planted_categorical=[PlantedCategorical("G1", "country", 1, 0.5, 0.1)],
    planted_continuous=[PlantedContinuous("G2", "free_mem_mb", -1.0), PlantedContinuous("G3", "uptime_s", 0.8)],
    seed=4,
)
crashes = generate_synthetic(spec)
mined = mine_categorical(crashes, MinerConfig()) + mine_continuous(crashes, cfg=CcsmConfig())

# Every mined set is scored one group against the rest; only positive scores
# are ranked by default, with intervals widened for the number kept.
ranked = rank_findings(score_deviations(mined, crashes), top_k=3)
print(render_report(ranked, "markdown", run={"config": {"top_k": 3}}))

# G2's memory drop is a negative effect, so it only shows up in absolute mode.
g2 = [f for f in rank_findings(score_deviations(mined, crashes), top_k=3, absolute=True) if f.group == "G2"]
print("G2 by |score|:", [(f.feature, round(f.score, 3)) for f in g2])

# Percent difference favours rare baselines: the same 0.04 absolute lift is
# a 400% jump from 1% but only 10% from 40%. Cohen's h barely moves.
for base in (10, 400):
    s = SupportTable(("A", "B"), [base + 40, base], [1000, 1000])
    f = score_categorical(ContrastSet(((0, 0),)), "A", s)
    print(f"expected {f.expected:.2f}: percent {f.percent_diff:6.1%}  h {f.score:.3f}  [{f.magnitude}]")
