"""Continuous contrast set mining without discretization.

Candidates are real-valued features: plain continuous columns (depth 1 only)
and TF-IDF weighted navigation n-grams, which are refined level by level by
appending one observed trailing event. A candidate is significant when a
one-way ANOVA rejects equal group means at the level-corrected alpha, and
large when the largest pairwise difference of group means exceeds ``delta``.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import stats
from .dataset import Dataset, discretize_equiwidth
from .navfeat import (FeatureMatrix, NGramVocabulary, build_vocabulary, extract_ngrams, gram_name, idf,
                      vectorize)
from .stucco import Deviation, MinerConfig, SearchStats, _check_groups, mine_categorical


@dataclass(frozen=True, order=True)
class ContinuousCandidate:
    """A plain continuous column (``gram`` is None) or a navigation n-gram."""

    name: str
    gram: tuple[str, ...] | None = None

    @property
    def depth(self) -> int:
        return len(self.gram) if self.gram else 1

    @property
    def is_ngram(self) -> bool:
        return self.gram is not None


@dataclass(frozen=True)
class ContinuousStats:
    groups: tuple[str, ...]
    samples: tuple[stats.GroupSample, ...]

    def sample(self, group: str) -> stats.GroupSample:
        return self.samples[self.groups.index(group)]

    def complement(self, group: str) -> stats.GroupSample:
        i = self.groups.index(group)
        return stats.pool(s for j, s in enumerate(self.samples) if j != i)

    def population(self) -> stats.GroupSample:
        return stats.pool(self.samples)

    @property
    def means_difference(self) -> float:
        means = [s.mean for s in self.samples if s.n > 0]
        return max(means) - min(means) if means else 0.0


@dataclass
class CcsmConfig:
    """Knobs for the continuous search. ``delta`` is in raw feature units."""

    delta: float = 0.0
    alpha: float = 0.05
    max_ngram: int = 3
    min_count: int = 5
    prune_min_count: bool = True
    prune_same_as_parent: bool = True

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_ngram < 2:
            raise ValueError("max_ngram must be >= 2")


class ContinuousTest(NamedTuple):
    significant: bool
    large: bool
    means_difference: float
    result: stats.TestResult


@dataclass(frozen=True, eq=False)
class ContinuousDeviation:
    candidate: ContinuousCandidate
    stats: ContinuousStats
    p_value: float
    statistic: float
    alpha_level: float
    means_difference: float
    level: int = 1


def test_continuous(s: ContinuousStats, cfg: CcsmConfig, alpha_level: float) -> ContinuousTest:
    result = stats.anova_f_test(s.samples)
    diff = s.means_difference
    if not result.testable:
        return ContinuousTest(False, False, diff, result)
    return ContinuousTest(result.p_value < alpha_level, diff > cfg.delta, diff, result)


test_continuous.__test__ = False


def group_moments(x: np.ndarray, group_codes: np.ndarray, k: int, valid: np.ndarray | None = None):
    """Per-group count, mean and M2 for every column of ``x``.

    Returns three (n_columns, k) arrays. Rows where ``valid`` is False are
    left out of that column's statistics.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
        valid = None if valid is None else valid[:, None]
    onehot = np.zeros((k, len(group_codes)))
    onehot[group_codes, np.arange(len(group_codes))] = 1.0
    if valid is None:
        shift = x.mean(axis=0) if len(x) else np.zeros(x.shape[1])
        xc = x - shift
        n = np.repeat(onehot.sum(axis=1)[None, :], x.shape[1], axis=0)
    else:
        vf = valid.astype(float)
        cnt = vf.sum(axis=0)
        shift = np.where(cnt > 0, (x * vf).sum(axis=0) / np.maximum(cnt, 1), 0.0)
        xc = (x - shift) * vf
        n = (onehot @ vf).T
    s1 = (onehot @ xc).T
    s2 = (onehot @ (xc * xc)).T
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_c = np.where(n > 0, s1 / np.maximum(n, 1), 0.0)
    m2 = np.maximum(s2 - s1 * mean_c, 0.0)
    mean = np.where(n > 0, mean_c + shift[:, None], 0.0)
    return n, mean, m2


def _stats_rows(groups, n, mean, m2) -> list[ContinuousStats]:
    return [ContinuousStats(groups, tuple(stats.GroupSample(int(a), float(b), float(c))
                                          for a, b, c in zip(n[i], mean[i], m2[i])))
            for i in range(len(n))]


def column_stats(d: Dataset, name: str) -> ContinuousStats:
    col = d.column(name)
    n, mean, m2 = group_moments(col.values, d.group_codes, d.n_groups, col.valid)
    return _stats_rows(d.groups, n, mean, m2)[0]


def gen_candidates(survivors: Sequence[ContinuousCandidate], logs: Sequence[Sequence[str]],
                   cfg: CcsmConfig) -> FeatureMatrix | None:
    """Extend surviving n-grams by one trailing event observed in ``logs``.

    Document frequency and IDF are recounted over all logs for each longer
    gram. Extensions present in fewer than ``cfg.min_count`` logs, and
    survivors already at ``cfg.max_ngram``, produce nothing. Returns the
    materialized TF-IDF columns of the extensions, or None when there are none.
    """
    prefixes = {q.gram for q in survivors if q.is_ngram and len(q.gram) < cfg.max_ngram}
    if not prefixes or not logs:
        return None
    lengths = {len(p) for p in prefixes}
    df: Counter = Counter()
    per_log = []
    for log in logs:
        grams = Counter()
        for n in lengths:
            for g, c in extract_ngrams(log, n + 1).items():
                if g[:-1] in prefixes:
                    grams[g] = c
        per_log.append(grams)
        df.update(grams.keys())
    keep = sorted(g for g, f in df.items() if f >= max(cfg.min_count, 1))
    if not keep:
        return None
    doc_count = len(logs)
    vocab = NGramVocabulary(0, tuple(keep), tuple(df[g] for g in keep),
                            tuple(idf(doc_count, df[g]) for g in keep), doc_count)
    pos = {g: j for j, g in enumerate(keep)}
    w = np.zeros((doc_count, len(keep)))
    weights = np.asarray(vocab.idf)
    for i, grams in enumerate(per_log):
        for g, c in grams.items():
            j = pos.get(g)
            if j is not None:
                w[i, j] = c * weights[j]
    return FeatureMatrix(vocab, w)


def mine_continuous(d: Dataset, features: FeatureMatrix | Sequence[str] | None = None,
                    cfg: CcsmConfig | None = None, *, columns: Sequence[str] = (),
                    logs: Sequence[Sequence[str]] | None = None, search: SearchStats | None = None,
                    deadline: float | None = None) -> list[ContinuousDeviation]:
    """Level-wise continuous contrast set search.

    Args:
        d: dataset supplying group labels and plain continuous columns.
        features: a FeatureMatrix of n-gram weights, or names of continuous
            columns. None means every continuous column of ``d``.
        cfg: search configuration.
        columns: extra plain continuous columns to mine alongside a FeatureMatrix.
        logs: navigation logs for n-gram extension; defaults to ``d.nav_logs``.
        search: optional stats object filled with per-level counts.
        deadline: ``time.monotonic()`` cut-off checked at level boundaries.
    """
    cfg = cfg or CcsmConfig()
    search = search if search is not None else SearchStats()
    t0 = time.perf_counter()
    sizes = _check_groups(d)
    if isinstance(features, FeatureMatrix):
        plain = list(columns)
        matrix = features
        if logs is None:
            logs = d.nav_logs
        if matrix.weights.shape[0] != d.n_rows:
            raise ValueError("feature matrix is not row-aligned with the dataset")
    else:
        plain = list(features) if features is not None else [d.columns[i].name for i in d.continuous_indices()]
        plain += [c for c in columns if c not in plain]
        matrix = None
    for name in plain:
        if d.column(name).kind != "continuous":
            raise ValueError(f"column {name!r} is not continuous")
    if not plain and (matrix is None or matrix.weights.shape[1] == 0):
        raise ValueError("no candidate features")

    k = d.n_groups
    active = sizes > 0
    results: list[ContinuousDeviation] = []

    # level 1: plain columns plus the initial gram vocabulary
    cands = [ContinuousCandidate(name) for name in plain]
    blocks = []
    if plain:
        # stacking rows then transposing avoids a slow strided column copy
        x = np.array([d.column(c).values for c in plain]).T
        v = None
        if not all(d.column(c).valid.all() for c in plain):
            v = np.array([d.column(c).valid for c in plain]).T
        blocks.append((x, v))
    if matrix is not None and matrix.weights.shape[1]:
        cands += [ContinuousCandidate(gram_name(g), tuple(g)) for g in matrix.vocabulary.grams]
        blocks.append((matrix.weights, None))
    parent_of: dict | None = None
    level = 1
    while cands:
        if deadline is not None and time.monotonic() >= deadline:
            search.timed_out = True
            break
        search.generated.append(len(cands))
        parts = [group_moments(x, d.group_codes, k, v) for x, v in blocks]
        n = np.vstack([p[0] for p in parts])
        mean = np.vstack([p[1] for p in parts])
        m2 = np.vstack([p[2] for p in parts])
        nonzero = np.concatenate([((x != 0) if v is None else (x != 0) & v).sum(axis=0) for x, v in blocks])

        keep = np.ones(len(cands), dtype=bool)
        if cfg.prune_min_count:
            keep &= nonzero >= cfg.min_count
        if cfg.prune_same_as_parent and parent_of is not None:
            for i, q in enumerate(cands):
                pn, pm = parent_of[q.gram[:-1]]
                if np.array_equal(n[i], pn) and np.allclose(mean[i], pm, rtol=1e-12, atol=0.0):
                    keep[i] = False
        f, p, status = stats.anova_batch(n[:, active], mean[:, active], m2[:, active])
        keep &= status != 2
        n_tested = int(keep.sum())
        search.tested.append(n_tested)
        alpha_level = stats.level_alpha(cfg.alpha, level, n_tested)
        am = np.where(n[:, active] > 0, mean[:, active], np.nan)
        with np.errstate(invalid="ignore"):
            diff = np.nan_to_num(np.nanmax(am, axis=1) - np.nanmin(am, axis=1))
        passed = keep & (p < alpha_level) & (diff > cfg.delta)
        search.emitted.append(int(passed.sum()))

        rows = _stats_rows(d.groups, n, mean, m2)
        survivors = []
        for i in np.flatnonzero(passed):
            results.append(ContinuousDeviation(cands[i], rows[i], float(p[i]), float(f[i]),
                                               alpha_level, float(diff[i]), level))
            if cands[i].is_ngram:
                survivors.append(i)

        level += 1
        ext = gen_candidates([cands[i] for i in survivors], logs or (), cfg) if survivors else None
        if ext is None:
            break
        parent_of = {cands[i].gram: (n[i], mean[i]) for i in survivors}
        cands = [ContinuousCandidate(gram_name(g), tuple(g)) for g in ext.vocabulary.grams]
        blocks = [(ext.weights, None)]
    search.elapsed = time.perf_counter() - t0
    results.sort(key=lambda r: (r.level, r.candidate.name))
    return results


def mine_binned_baseline(d: Dataset, bins: int, cfg: MinerConfig | None = None, *,
                         search: SearchStats | None = None, deadline: float | None = None) -> list[Deviation]:
    """Equal-width discretization followed by categorical mining."""
    if not d.continuous_indices():
        raise ValueError("no continuous columns to discretize")
    t0 = time.perf_counter()
    search = search if search is not None else SearchStats()
    out = mine_categorical(discretize_equiwidth(d, bins), cfg, search=search, deadline=deadline)
    search.elapsed = time.perf_counter() - t0
    return out


def vocabulary_features(d: Dataset, n: int = 2, min_df: int = 5) -> FeatureMatrix:
    """Build the initial n-gram features from ``d.nav_logs``."""
    if d.nav_logs is None:
        raise ValueError("dataset has no navigation logs")
    vocab = build_vocabulary(d.nav_logs, n, min_df)
    return vectorize(d.nav_logs, vocab)
