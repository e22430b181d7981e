"""Categorical contrast set mining by level-wise tree search.

Candidates are conjunctions of ``column=value`` predicates kept in canonical
(increasing column index) order, so each conjunction is generated once. A
node survives when its support differs significantly across groups (Pearson
chi-squared on the 2 x k table) and by at least ``delta`` between some pair
of groups. Only survivors are expanded.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import stats
from .dataset import MISSING, Dataset


@dataclass(frozen=True, order=True)
class ContrastSet:
    """Conjunction of ``(column index, value code)`` predicates."""

    items: tuple[tuple[int, int], ...]

    def __post_init__(self):
        cols = [c for c, _ in self.items]
        if any(b <= a for a, b in zip(cols, cols[1:])):
            raise ValueError("contrast set columns must be strictly increasing")

    @property
    def depth(self) -> int:
        return len(self.items)

    @property
    def last_column(self) -> int:
        return self.items[-1][0] if self.items else -1

    def extend(self, column: int, code: int) -> "ContrastSet":
        return ContrastSet(self.items + ((column, code),))

    def parent(self) -> "ContrastSet":
        return ContrastSet(self.items[:-1])

    def describe(self, d: Dataset) -> list[dict]:
        return [{"column": d.columns[c].name, "value": d.columns[c].label(v)} for c, v in self.items]

    def label(self, d: Dataset) -> str:
        return "{" + ", ".join(f"{p['column']}: {p['value']}" for p in self.describe(d)) + "}"

    def mask(self, d: Dataset) -> np.ndarray:
        m = np.ones(d.n_rows, dtype=bool)
        for c, v in self.items:
            m &= d.columns[c].values == v
        return m


@dataclass(frozen=True, eq=False)
class SupportTable:
    groups: tuple[str, ...]
    counts: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if counts.shape != sizes.shape or (counts > sizes).any() or (counts < 0).any():
            raise ValueError("counts must satisfy 0 <= count <= group size")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "sizes", sizes)

    @property
    def supports(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.sizes > 0, self.counts / np.maximum(self.sizes, 1), 0.0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def max_difference(self) -> float:
        s = self.supports[self.sizes > 0]
        return float(s.max() - s.min()) if s.size else 0.0

    def contingency(self) -> np.ndarray:
        keep = self.sizes > 0
        return np.vstack([self.counts[keep], self.sizes[keep] - self.counts[keep]])

    def group_index(self, group: str) -> int:
        return self.groups.index(group)

    def __eq__(self, other):
        return (isinstance(other, SupportTable) and self.groups == other.groups
                and np.array_equal(self.counts, other.counts) and np.array_equal(self.sizes, other.sizes))


@dataclass
class MinerConfig:
    """Knobs for the categorical search.

    Each ``prune_*`` flag toggles one pruning rule so it can be tested alone.
    """

    delta: float = 0.05
    alpha: float = 0.05
    max_depth: int = 3
    min_count: int = 5
    prune_min_count: bool = True
    prune_same_as_parent: bool = True
    prune_bound: bool = True
    low_count_expected: float = 5.0
    threads: int = 1

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


class NodeTest(NamedTuple):
    significant: bool
    large: bool
    result: stats.TestResult


@dataclass(frozen=True, eq=False)
class Deviation:
    """A contrast set that passed both tests, with its mining evidence."""

    contrast: ContrastSet
    supports: SupportTable
    p_value: float
    statistic: float
    alpha_level: float
    low_count: bool = False

    @property
    def depth(self) -> int:
        return self.contrast.depth


@dataclass
class SearchStats:
    """Per-level bookkeeping filled in by the miners."""

    tested: list[int] = field(default_factory=list)
    generated: list[int] = field(default_factory=list)
    emitted: list[int] = field(default_factory=list)
    timed_out: bool = False
    elapsed: float = 0.0

    @property
    def total_tested(self) -> int:
        return sum(self.tested)

    @property
    def peak_width(self) -> int:
        return max(self.generated, default=0)


def _check_groups(d: Dataset) -> np.ndarray:
    sizes = d.group_sizes
    if (sizes > 0).sum() < 2:
        raise ValueError("contrast mining requires >= 2 groups")
    return sizes


def enumerate_initial(d: Dataset) -> list[ContrastSet]:
    """One depth-1 candidate per observed (categorical column, value)."""
    _check_groups(d)
    out = []
    for ci in d.categorical_indices():
        present = np.unique(d.columns[ci].values)
        out.extend(ContrastSet(((ci, int(v)),)) for v in present if v != MISSING)
    return out


def count_support(d: Dataset, x: ContrastSet) -> SupportTable:
    m = x.mask(d)
    counts = np.bincount(d.group_codes[m], minlength=d.n_groups)
    return SupportTable(d.groups, counts, d.group_sizes)


def test_node(s: SupportTable, cfg: MinerConfig, alpha_level: float) -> NodeTest:
    result = stats.chi_squared_test(s.contingency())
    if not result.testable:
        return NodeTest(False, False, result)
    return NodeTest(result.p_value < alpha_level, s.max_difference >= cfg.delta, result)


test_node.__test__ = False


def gen_children(survivors: Sequence[ContrastSet], d: Dataset) -> list[ContrastSet]:
    """Extend each survivor by one predicate on every higher categorical column."""
    cat = d.categorical_indices()
    values = {ci: [int(v) for v in np.unique(d.columns[ci].values) if v != MISSING] for ci in cat}
    out = []
    for x in survivors:
        for ci in cat:
            if ci > x.last_column:
                out.extend(x.extend(ci, v) for v in values[ci])
    return out


class _Level(NamedTuple):
    contrasts: list[ContrastSet]
    counts: np.ndarray  # (m, k)
    parent_counts: np.ndarray | None  # (m, k) or None at depth 1
    parent_rows: list[np.ndarray] | None  # rows of each candidate's parent


def _initial_level(d: Dataset, cols: list[int]) -> _Level:
    k = d.n_groups
    g = d.group_codes
    contrasts, counts = [], []
    for ci in cols:
        codes = d.columns[ci].values
        ok = codes != MISSING
        ncat = len(d.columns[ci].categories)
        table = np.bincount(codes[ok].astype(np.int64) * k + g[ok], minlength=ncat * k).reshape(ncat, k)
        for v in np.flatnonzero(table.sum(axis=1)):
            contrasts.append(ContrastSet(((ci, int(v)),)))
            counts.append(table[v])
    counts = np.array(counts, dtype=np.int64).reshape(len(contrasts), k)
    return _Level(contrasts, counts, None, None)


def _children_of(d: Dataset, cols: list[int], x: ContrastSet, rows: np.ndarray):
    k = d.n_groups
    g = d.group_codes[rows]
    out = []
    for ci in cols:
        if ci <= x.last_column:
            continue
        codes = d.columns[ci].values[rows]
        ok = codes != MISSING
        ncat = len(d.columns[ci].categories)
        table = np.bincount(codes[ok].astype(np.int64) * k + g[ok], minlength=ncat * k).reshape(ncat, k)
        for v in np.flatnonzero(table.sum(axis=1)):
            out.append((x.extend(ci, int(v)), table[v]))
    return out


def mine_categorical(d: Dataset, cfg: MinerConfig | None = None, *, search: SearchStats | None = None,
                     deadline: float | None = None) -> list[Deviation]:
    """Run the level-wise search and return every significant and large set.

    Args:
        d: dataset; only its categorical columns are mined.
        cfg: search configuration.
        search: optional stats object filled with per-level counts.
        deadline: ``time.monotonic()`` value after which the search stops at
            the next level boundary and returns what it has.
    """
    cfg = cfg or MinerConfig()
    search = search if search is not None else SearchStats()
    t0 = time.perf_counter()
    sizes = _check_groups(d)
    active = sizes > 0
    cols = d.categorical_indices()
    if not cols:
        raise ValueError("no categorical columns")

    level = _initial_level(d, cols)
    results: list[Deviation] = []
    depth = 1
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        while level.contrasts and depth <= cfg.max_depth:
            if deadline is not None and time.monotonic() >= deadline:
                search.timed_out = True
                break
            search.generated.append(len(level.contrasts))
            counts = level.counts
            keep = np.ones(len(counts), dtype=bool)
            if cfg.prune_min_count:
                keep &= counts.sum(axis=1) >= cfg.min_count
            if cfg.prune_same_as_parent and level.parent_counts is not None:
                keep &= ~(counts == level.parent_counts).all(axis=1)
            stat, p, testable, min_exp = stats.chi_squared_batch(counts[:, active], sizes[active])
            keep &= testable
            n_tested = int(keep.sum())
            search.tested.append(n_tested)
            alpha_level = stats.level_alpha(cfg.alpha, depth, n_tested)
            with np.errstate(invalid="ignore", divide="ignore"):
                sup = counts[:, active] / sizes[active]
            large = (sup.max(axis=1) - sup.min(axis=1)) >= cfg.delta
            passed = keep & (p < alpha_level) & large

            survivors = []
            for i in np.flatnonzero(passed):
                x = level.contrasts[i]
                results.append(Deviation(x, SupportTable(d.groups, counts[i], sizes), float(p[i]),
                                         float(stat[i]), alpha_level,
                                         bool(min_exp[i] < cfg.low_count_expected)))
                if cfg.prune_bound and sup[i].max() < cfg.delta:
                    continue
                survivors.append(i)
            search.emitted.append(int(passed.sum()))

            depth += 1
            if depth > cfg.max_depth or not survivors:
                break
            level = _next_level(d, cols, level, survivors, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    search.elapsed = time.perf_counter() - t0
    results.sort(key=lambda r: (r.contrast.depth, r.contrast.items))
    return results


def _next_level(d, cols, level: _Level, survivors: list[int], pool) -> _Level:
    def rows_of(i):
        x = level.contrasts[i]
        if level.parent_rows is None:
            ci, v = x.items[0]
            return np.flatnonzero(d.columns[ci].values == v)
        prow = level.parent_rows[i]
        ci, v = x.items[-1]
        return prow[d.columns[ci].values[prow] == v]

    def expand(i):
        rows = rows_of(i)
        return rows, _children_of(d, cols, level.contrasts[i], rows)

    expanded = list(pool.map(expand, survivors)) if pool is not None else [expand(i) for i in survivors]
    contrasts, counts, parents, prow = [], [], [], []
    for i, (rows, children) in zip(survivors, expanded):
        for child, c in children:
            contrasts.append(child)
            counts.append(c)
            parents.append(level.counts[i])
            prow.append(rows)
    k = d.n_groups
    return _Level(contrasts, np.array(counts, dtype=np.int64).reshape(len(contrasts), k),
                  np.array(parents, dtype=np.int64).reshape(len(contrasts), k), prow)
