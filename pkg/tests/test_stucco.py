import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashcontrast.dataset import (CategoricalFeature, Column, Dataset, PlantedCategorical, SyntheticSpec,
                                   generate_synthetic)
from crashcontrast.stucco import (ContrastSet, MinerConfig, SearchStats, SupportTable, count_support,
                                  enumerate_initial, gen_children, mine_categorical, test_node)
from oracles import brute_force_stucco


def table(groups, **cols):
    labels = sorted(set(groups))
    return Dataset(tuple(Column.from_strings(n, v) for n, v in cols.items()), "sig", tuple(labels),
                   np.array([labels.index(g) for g in groups]))


TOY = table(["A", "A", "B", "B"], country=["US", "IN", "US", "IN"], os=["4.0", "5.0", "5.0", "4.0"])


def labels_of(d, sets):
    return [x.label(d) for x in sets]


def test_enumerate_initial_toy():
    assert labels_of(TOY, enumerate_initial(TOY)) == [
        "{country: US}", "{country: IN}", "{os: 4.0}", "{os: 5.0}"]


def test_enumerate_initial_edge_cases():
    d = table(["A", "B"], single=["x", "x"], empty=["", ""])
    assert labels_of(d, enumerate_initial(d)) == ["{single: x}"]
    with pytest.raises(ValueError, match="2 groups"):
        enumerate_initial(table(["A", "A"], c=["x", "y"]))


def test_gen_children_canonical():
    india = ContrastSet(((0, TOY.column("country").categories.index("IN")),))
    assert labels_of(TOY, gen_children([india], TOY)) == [
        "{country: IN, os: 4.0}", "{country: IN, os: 5.0}"]
    last = ContrastSet(((1, 0),))
    assert gen_children([last], TOY) == []
    assert gen_children([], TOY) == []


def test_contrast_set_requires_canonical_order():
    with pytest.raises(ValueError):
        ContrastSet(((1, 0), (0, 0)))


def test_count_support():
    everyone = table(["A", "B", "B"], c=["x", "x", "x"])
    s = count_support(everyone, ContrastSet(((0, 0),)))
    assert s.supports.tolist() == [1.0, 1.0]
    us_and_5 = count_support(TOY, ContrastSet(((0, 0), (1, 1))))
    assert us_and_5.counts.tolist() == [0, 1]
    assert us_and_5.supports.tolist() == [0.0, 0.5]


def test_count_support_planted():
    spec = SyntheticSpec(groups={"G1": 1000, "G2": 1000}, categorical=[CategoricalFeature("a", 3)],
                         planted_categorical=[PlantedCategorical("G1", "a", 0, 0.5, 0.1)], seed=2)
    d = generate_synthetic(spec)
    s = count_support(d, ContrastSet(((0, 0),))).supports
    assert 0.45 <= s[0] <= 0.55 and 0.07 <= s[1] <= 0.13


def sup(a, b, n=100):
    return SupportTable(("A", "B"), [a, b], [n, n])


def test_node_examples():
    cfg = MinerConfig(delta=0.1, alpha=0.05)
    t = test_node(sup(30, 10), cfg, 0.05)
    assert t.significant and t.large
    assert t.result.p_value == pytest.approx(4.0695e-4, rel=1e-3)
    t = test_node(sup(20, 20), cfg, 0.05)
    assert not t.significant and not t.large
    assert not test_node(sup(30, 25), cfg, 0.05).large
    t = test_node(sup(0, 0), cfg, 0.05)
    assert not t.significant and not t.large


def test_mine_planted_depth1():
    spec = SyntheticSpec(groups={"G1": 1000, "G2": 1000},
                         categorical=[CategoricalFeature("a", 4), CategoricalFeature("b", 3)],
                         planted_categorical=[PlantedCategorical("G1", "a", 2, 0.5, 0.1)], seed=5)
    d = generate_synthetic(spec)
    found = mine_categorical(d, MinerConfig())
    depth1 = [r for r in found if r.depth == 1]
    assert ContrastSet(((0, 2),)) in [r.contrast for r in depth1]
    assert all(r.contrast.items[0] == (0, 2) or r.contrast.items[0][0] == 0 for r in depth1)
    for r in found:
        assert r.supports.max_difference >= 0.05
        assert r.p_value < r.alpha_level


def test_mine_null_mostly_empty():
    empty = 0
    for seed in range(20):
        spec = SyntheticSpec(groups={"G1": 500, "G2": 500},
                             categorical=[CategoricalFeature("a", 4), CategoricalFeature("b", 3)], seed=seed)
        empty += not mine_categorical(generate_synthetic(spec), MinerConfig())
    assert empty >= 18


def random_tiny(rng):
    n = int(rng.integers(3, 9))
    n_groups = int(rng.integers(2, 4))
    n_cols = int(rng.integers(1, 4))
    groups = [f"G{i}" for i in rng.integers(0, n_groups, n)]
    if len(set(groups)) < 2:
        groups[0], groups[-1] = "G0", "G1"
    cols = {f"c{j}": [str(v) if v >= 0 else "" for v in rng.integers(-1, 3, n)] for j in range(n_cols)}
    return groups, cols


def mined_as_tuples(d, found):
    return {tuple((d.columns[c].name, d.columns[c].label(v)) for c, v in r.contrast.items) for r in found}


@pytest.mark.parametrize("seed", range(40))
def test_matches_brute_force_on_tiny_data(seed):
    rng = np.random.default_rng(seed)
    groups, cols = random_tiny(rng)
    d = table(groups, **cols)
    rows = [{c: (v or None) for c, v in zip(cols, vals)} for vals in zip(*cols.values())]
    for delta, alpha, min_count in [(0.05, 0.05, 1), (0.2, 0.5, 2), (0.0, 0.9, 0)]:
        cfg = MinerConfig(delta=delta, alpha=alpha, max_depth=2, min_count=min_count)
        expected = brute_force_stucco(rows, groups, list(cols), delta=delta, alpha=alpha, min_count=min_count)
        assert mined_as_tuples(d, mine_categorical(d, cfg)) == expected


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_row_order_and_thread_independence(seed):
    rng = np.random.default_rng(seed)
    n = 60
    groups = [f"G{i}" for i in rng.integers(0, 3, n)]
    cols = {f"c{j}": [f"v{v}" for v in rng.integers(0, 3, n)] for j in range(3)}
    cfg = MinerConfig(delta=0.05, alpha=0.5, min_count=2)
    d = table(groups, **cols)
    perm = rng.permutation(n)
    shuffled = table([groups[i] for i in perm], **{k: [v[i] for i in perm] for k, v in cols.items()})
    a = mined_as_tuples(d, mine_categorical(d, cfg))
    b = mined_as_tuples(shuffled, mine_categorical(shuffled, cfg))
    c = mined_as_tuples(d, mine_categorical(d, MinerConfig(delta=0.05, alpha=0.5, min_count=2, threads=4)))
    assert a == b == c


def test_children_counts_never_exceed_parent():
    rng = np.random.default_rng(4)
    n = 400
    d = table([f"G{i}" for i in rng.integers(0, 2, n)],
              **{f"c{j}": [f"v{v}" for v in rng.integers(0, 2, n)] for j in range(4)})
    found = mine_categorical(d, MinerConfig(delta=0.0, alpha=0.99, min_count=1, max_depth=3))
    by_set = {r.contrast: r.supports.counts for r in found}
    assert any(x.depth >= 2 for x in by_set)
    for x, counts in by_set.items():
        if x.depth > 1 and x.parent() in by_set:
            assert (counts <= by_set[x.parent()]).all()


def test_min_count_prunes():
    d = table(["A"] * 6 + ["B"] * 6, c=["x"] * 6 + ["y"] * 6)
    assert mine_categorical(d, MinerConfig(alpha=0.5, min_count=7)) == []
    assert mine_categorical(d, MinerConfig(alpha=0.5, min_count=6))


def test_same_as_parent_rule_toggle():
    # b is a copy of a, so every {a, b} child repeats its parent's supports
    d = table(["A"] * 10 + ["B"] * 10, a=["x"] * 8 + ["y"] * 12, b=["p"] * 8 + ["q"] * 12)
    on = mine_categorical(d, MinerConfig(alpha=0.5, min_count=1, max_depth=2))
    off = mine_categorical(d, MinerConfig(alpha=0.5, min_count=1, max_depth=2, prune_same_as_parent=False))
    assert max(r.depth for r in on) == 1
    assert max(r.depth for r in off) == 2


def test_search_stats_and_deadline():
    d = table(["A"] * 10 + ["B"] * 10, a=["x"] * 8 + ["y"] * 12, b=["p", "q"] * 10)
    s = SearchStats()
    mine_categorical(d, MinerConfig(alpha=0.5, min_count=1), search=s)
    assert s.tested[0] == 4 and s.generated[0] == 4
    late = SearchStats()
    assert mine_categorical(d, MinerConfig(), search=late, deadline=0.0) == []
    assert late.timed_out


def test_low_count_flag():
    d = table(["A"] * 6 + ["B"] * 6, c=["x"] * 6 + ["y"] * 6)
    found = mine_categorical(d, MinerConfig(alpha=0.5, min_count=1))
    # every cell expects 3 rows, under the usual threshold of 5
    assert found and all(r.low_count for r in found)
    big = table(["A"] * 60 + ["B"] * 60, c=["x"] * 40 + ["y"] * 50 + ["x"] * 30)
    assert not any(r.low_count for r in mine_categorical(big, MinerConfig()))
