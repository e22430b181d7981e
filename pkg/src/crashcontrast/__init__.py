"""Contrast set mining for groups of crash reports.

Categorical attributes are mined with a level-wise tree search and
chi-squared tests. Real-valued features, including TF-IDF weighted
navigation n-grams, are mined directly with ANOVA. Findings of both kinds
are ranked per group on a shared effect-size scale.
"""

from .ccsm import (CcsmConfig, ContinuousCandidate, ContinuousDeviation, ContinuousStats,
                   mine_binned_baseline, mine_continuous)
from .dataset import (CategoricalFeature, Column, ContinuousFeature, Dataset, NavSpec, PlantedCategorical,
                      PlantedContinuous, PlantedNGram, SyntheticSpec, discretize_equiwidth, generate_synthetic,
                      load, stratified_sample, write)
from .navfeat import FeatureMatrix, NGramVocabulary, build_vocabulary, extract_ngrams, vectorize
from .ranking import (ScoredFinding, magnitude_label, rank_findings, render_report, score_categorical,
                      score_continuous, score_deviations)
from .stucco import ContrastSet, Deviation, MinerConfig, SupportTable, mine_categorical

__version__ = "0.1.0"
