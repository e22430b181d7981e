"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line through the ``acceptance`` fixture; the
lines are printed together in the terminal summary.
"""

import math
from collections import Counter

import mpmath as mp
import numpy as np
import pytest

from crashcontrast import stats
from crashcontrast.bench import run_engine
from crashcontrast.ccsm import CcsmConfig, mine_continuous
from crashcontrast.dataset import (CategoricalFeature, Column, ContinuousFeature, Dataset, PlantedCategorical,
                                   PlantedContinuous, SyntheticSpec, generate_synthetic)
from crashcontrast.navfeat import build_vocabulary, extract_ngrams, idf
from crashcontrast.ranking import MAGNITUDES, magnitude_label, rank_findings, score_categorical, score_deviations
from crashcontrast.stats import GroupSample
from crashcontrast.stucco import ContrastSet, MinerConfig, SupportTable, mine_categorical
from oracles import brute_force_stucco

# Five crash attributes of one signature: in-group count per 1000 rows and
# overall count per 10000 rows, scored against the whole population.
TRIAGE = [
    ("app version = 2", 1000, 6800),
    ("app build = 123", 1000, 6800),
    ("time since init", 214, 810),
    ("OS version = 12", 858, 7420),
    ("background time", 172, 860),
]


def triage():
    out = []
    for i, (_, inside, total) in enumerate(TRIAGE):
        s = SupportTable(("sig", "rest"), [inside, total - inside], [1000, 9000])
        out.append(score_categorical(ContrastSet(((i, 0),)), "sig", s, expected_basis="population"))
    return out


def test_criterion_1_percent_difference(acceptance):
    reference = [0.472, 0.471, 1.657, 0.156, 1.008]
    got = [f.percent_diff for f in triage()]
    worst = max(abs(a - b) for a, b in zip(got, reference))
    assert acceptance(1, "percent-difference reproduction within 0.02", worst <= 0.02, f"max error {worst:.4f}")


def test_criterion_2_ranking_order(acceptance):
    found = triage()
    by_h = [f.contrast.items[0][0] for f in rank_findings(found)]
    by_pct = [f.contrast.items[0][0] for f in rank_findings(found, key="percent_diff")]
    h_ok = by_h == [0, 1, 2, 3, 4]
    # the two low-expected-support rows jump ahead of everything under percent difference
    promoted = by_pct[:2] == [2, 4]
    assert acceptance(2, "h order matches weighted-score order; percent difference promotes rare rows",
                      h_ok and promoted, f"h order {by_h}, percent order {by_pct}")


def _chi2_ref(x, k):
    return mp.gammainc(mp.mpf(k) / 2, mp.mpf(x) / 2, mp.inf, regularized=True)


def _f_ref(x, d1, d2):
    z = mp.mpf(d2) / (d2 + d1 * mp.mpf(x))
    return mp.betainc(mp.mpf(d2) / 2, mp.mpf(d1) / 2, 0, z, regularized=True)


def test_criterion_3_statistical_kernels(acceptance):
    mp.mp.dps = 40
    chi = stats.chi_squared_test([[30, 10], [70, 90]])
    f = stats.anova_f_test([GroupSample.from_values(v) for v in ([1, 2, 3], [2, 3, 4], [3, 4, 5])])
    w = stats.wilson_interval(50, 100)
    welch = stats.welch_interval(GroupSample.from_values([2, 3, 4]), GroupSample.from_values([1, 2, 3, 4, 5, 5, 1]))
    # Welch reference worked by hand: diff 0.0, se^2 = 1/3 + 3.2857/7, dof from Welch-Satterthwaite
    va, vb = 1.0 / 3, np.var([1, 2, 3, 4, 5, 5, 1], ddof=1) / 7
    dof = (va + vb) ** 2 / (va ** 2 / 2 + vb ** 2 / 6)
    half = float(mp.sqrt(va + vb)) * _t_quantile(0.975, dof)
    hand = [abs(chi.statistic - 12.5), abs(f.statistic - 3.0), abs(f.p_value - 0.125),
            abs(w.lo - 0.40383), abs(w.hi - 0.59617), abs(welch.lo + half), abs(welch.hi - half)]
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        x, k = float(rng.uniform(0.1, 60)), int(rng.integers(1, 12))
        worst = max(worst, abs(float(stats.chi2_sf(x, k)) / float(_chi2_ref(x, k)) - 1))
        x, d1, d2 = float(rng.uniform(0.05, 15)), int(rng.integers(1, 8)), int(rng.integers(2, 200))
        worst = max(worst, abs(float(stats.f_sf(x, d1, d2)) / float(_f_ref(x, d1, d2)) - 1))
    ok = max(hand) <= 1e-3 and worst <= 1e-8
    assert acceptance(3, "chi-squared, ANOVA, Wilson, Welch examples and tail accuracy", ok,
                      f"max hand error {max(hand):.2e}, max tail rel error {worst:.2e}")


def _t_quantile(q, dof):
    mp.mp.dps = 40
    return float(mp.findroot(lambda t: mp.betainc(dof / 2, 0.5, 0, dof / (dof + t * t), regularized=True) / 2
                             - (1 - q), 2.0))


def _tiny(rng):
    n = int(rng.integers(3, 9))
    n_groups = int(rng.integers(2, 4))
    groups = [f"G{i}" for i in rng.integers(0, n_groups, n)]
    if len(set(groups)) < 2:
        groups[0], groups[-1] = "G0", "G1"
    cols = {f"c{j}": [f"v{v}" if v >= 0 else None for v in rng.integers(-1, 3, n)]
            for j in range(int(rng.integers(1, 4)))}
    return groups, cols


def test_criterion_4_brute_force_equivalence(acceptance):
    rng = np.random.default_rng(2024)
    runs = agree = nonempty = deep = 0
    for _ in range(150):
        groups, cols = _tiny(rng)
        labels = sorted(set(groups))
        d = Dataset(tuple(Column.from_strings(c, v) for c, v in cols.items()), "sig", tuple(labels),
                    np.array([labels.index(g) for g in groups]))
        rows = [dict(zip(cols, vals)) for vals in zip(*cols.values())]
        for delta, alpha, min_count in [(0.05, 0.05, 1), (0.2, 0.5, 2), (0.0, 0.95, 0)]:
            cfg = MinerConfig(delta=delta, alpha=alpha, max_depth=2, min_count=min_count)
            got = {tuple((d.columns[c].name, d.columns[c].label(v)) for c, v in r.contrast.items)
                   for r in mine_categorical(d, cfg)}
            want = brute_force_stucco(rows, groups, list(cols), delta=delta, alpha=alpha, min_count=min_count)
            runs += 1
            agree += got == want
            nonempty += bool(want)
            deep += any(len(x) == 2 for x in want)
    assert acceptance(4, "miner equals exhaustive enumeration on tiny datasets", agree == runs,
                      f"{agree}/{runs} agree over 150 datasets; {nonempty} non-empty, {deep} with depth-2 sets")


def _planted_case(seed):
    rng = np.random.default_rng(seed)
    k = 2 + seed % 4
    rows = int(rng.integers(1000, 10_001))
    names = [f"G{i}" for i in range(k)]
    groups = {g: rows // k for g in names}
    cat = [CategoricalFeature(f"a{i}", 4) for i in range(k)]
    cont = [ContinuousFeature(f"x{i}", 50.0, 10.0) for i in range(k)]
    plants, pc, pn = {}, [], []
    for i, g in enumerate(names):
        if i % 2 == 0:
            pc.append(PlantedCategorical(g, f"a{i}", 1, 0.5, 0.1))
            plants[g] = (("a" + str(i), "a" + str(i) + "_1"),)
        else:
            pn.append(PlantedContinuous(g, f"x{i}", float(rng.uniform(0.5, 1.0))))
            plants[g] = (f"x{i}",)
    spec = SyntheticSpec(groups=groups, categorical=cat, continuous=cont, planted_categorical=pc,
                         planted_continuous=pn, seed=seed)
    return generate_synthetic(spec), plants


def _key(f):
    if f.kind == "continuous":
        return (f.items[0]["column"],)
    return tuple((i["column"], i["value"]) for i in f.items)


def _mine_all(d, alpha=0.05, delta=0.05, cont_delta=0.0):
    found = mine_categorical(d, MinerConfig(delta=delta, alpha=alpha))
    found += mine_continuous(d, cfg=CcsmConfig(delta=cont_delta, alpha=alpha))
    return found


@pytest.mark.slow
def test_criterion_5_planted_recovery_and_null(acceptance):
    recovered = 0
    misses = []
    for seed in range(50):
        d, plants = _planted_case(seed)
        ranked = rank_findings(score_deviations(_mine_all(d), d))
        top = {}
        for f in ranked:
            top.setdefault(f.group, _key(f))
        if all(top.get(g) == want for g, want in plants.items()):
            recovered += 1
        else:
            misses.append(seed)
    clean = 0
    for seed in range(50):
        rng = np.random.default_rng(10_000 + seed)
        k = 2 + seed % 4
        spec = SyntheticSpec(groups={f"G{i}": int(rng.integers(1000, 10_001)) // k for i in range(k)},
                             categorical=[CategoricalFeature(f"a{i}", 4) for i in range(3)],
                             continuous=[ContinuousFeature(f"x{i}", 0.0, 1.0) for i in range(3)], seed=seed)
        clean += not _mine_all(generate_synthetic(spec), cont_delta=0.05)
    ok = recovered >= 48 and clean >= 45
    assert acceptance(5, "planted anomalies ranked first; null data mostly silent", ok,
                      f"recovered {recovered}/50 (misses {misses}), null clean {clean}/50")


def _speed_dataset():
    spec = SyntheticSpec(groups={"A": 5000, "B": 5000},
                         continuous=[ContinuousFeature(f"x{i}", 0.0, 1.0) for i in range(500)],
                         planted_continuous=[PlantedContinuous("A", f"x{i}", 0.5) for i in range(5)], seed=0)
    return generate_synthetic(spec)


def _best_of(engine, d, repeats):
    cfg = dict(ccsm_cfg=CcsmConfig(), miner_cfg=MinerConfig(), timeout=3600.0)
    return min((run_engine(engine, d, **cfg) for _ in range(repeats)), key=lambda r: r.wall_time)


@pytest.fixture(scope="module")
def speed_rows():
    d = _speed_dataset()
    # binned-3 explodes at depth 2 and takes about a minute, so it runs once
    return {"ccsm": _best_of("ccsm", d, 3), "binned-10": _best_of("binned-10", d, 3),
            "binned-3": _best_of("binned-3", d, 1)}


@pytest.mark.slow
def test_criterion_6_speedup(acceptance, speed_rows):
    r = speed_rows
    s10 = r["binned-10"].wall_time / r["ccsm"].wall_time
    s3 = r["binned-3"].wall_time / r["ccsm"].wall_time
    c10 = r["binned-10"].depth1_tested / r["ccsm"].depth1_tested
    ok = s10 >= 5 and s3 >= 2 and c10 >= 5
    assert acceptance(6, "continuous mining beats binning on 10k rows x 500 columns", ok,
                      f"speedup {s10:.1f}x vs 10 bins, {s3:.1f}x vs 3 bins; "
                      f"10-bin depth-1 candidates {c10:.1f}x")


@pytest.mark.slow
def test_criterion_6_three_bin_candidate_ratio(acceptance, speed_rows):
    # Three bins give at most three depth-1 candidates per column, so this
    # ratio cannot exceed 3. Kept as a separate, expected failure.
    c3 = speed_rows["binned-3"].depth1_tested / speed_rows["ccsm"].depth1_tested
    assert acceptance("6b", "3-bin engine tests >= 5x more depth-1 candidates", c3 >= 5,
                      f"ratio {c3:.2f}, bounded above by 3")


def test_criterion_7_interval_coverage(acceptance):
    rng = np.random.default_rng(7)
    reps, n, p = 10_000, 100, 0.3
    hits = rng.binomial(n, p, reps)
    wilson = np.mean([p in stats.wilson_interval(int(x), n) for x in hits])
    welch_hits = 0
    for _ in range(reps):
        a = GroupSample.from_values(rng.normal(0.5, 1.0, n))
        b = GroupSample.from_values(rng.normal(0.0, 2.0, n))
        welch_hits += 0.5 in stats.welch_interval(a, b)
    welch = welch_hits / reps
    ok = 0.93 <= wilson <= 0.97 and 0.93 <= welch <= 0.97
    assert acceptance(7, "95% Wilson and Welch coverage in [0.93, 0.97]", ok,
                      f"Wilson {wilson:.4f}, Welch {welch:.4f}")


def test_criterion_8_effect_size_properties(acceptance):
    rng = np.random.default_rng(8)
    failures = Counter()
    for _ in range(500):
        x, y = rng.normal(size=int(rng.integers(3, 40))), rng.normal(1, 2, size=int(rng.integers(3, 40)))
        shift, scale = rng.uniform(-50, 50), rng.uniform(0.1, 20)
        d = stats.cohens_d(GroupSample.from_values(x), GroupSample.from_values(y))
        moved = stats.cohens_d(GroupSample.from_values(x * scale + shift), GroupSample.from_values(y * scale + shift))
        failures["affine"] += not math.isclose(d, moved, rel_tol=1e-7, abs_tol=1e-9)
        back = stats.cohens_d(GroupSample.from_values(y), GroupSample.from_values(x))
        failures["d antisymmetry"] += not math.isclose(d, -back, rel_tol=1e-12)
        p1, p2 = rng.uniform(size=2)
        failures["h antisymmetry"] += not math.isclose(stats.cohens_h(p1, p2), -stats.cohens_h(p2, p1),
                                                       rel_tol=1e-12, abs_tol=1e-15)
        p2 = rng.uniform(0.2, 0.8)
        c = rng.uniform(-0.05, 0.05)
        approx = c / math.sqrt(p2 * (1 - p2))
        failures["taylor"] += abs(stats.cohens_h(p2 + c, p2) - approx) > 0.1 * abs(approx)
        n_g, n_r = (int(v) for v in rng.integers(20, 2000, size=2))
        x_g, x_r = int(rng.integers(1, n_g)), int(rng.integers(1, n_r))
        tot = n_g + n_r
        obs, exp = x_g / n_g, (x_g + x_r) / tot
        chi2 = stats.chi_squared_test([[x_g, x_r], [n_g - x_g, n_r - x_r]]).statistic
        failures["chi2 identity"] += not math.isclose(
            chi2, tot * n_g / n_r * (obs - exp) ** 2 / (exp * (1 - exp)), rel_tol=1e-9)
    for threshold, name in MAGNITUDES:
        failures["boundaries"] += magnitude_label(threshold) != name
        failures["boundaries"] += magnitude_label(np.nextafter(threshold, 0)) == name
    bad = {k: v for k, v in failures.items() if v}
    assert acceptance(8, "effect-size properties on random inputs", not bad, f"violations {bad or 'none'}")


def test_criterion_9_featurizer(acceptance):
    nav = ["Feed", "Photos", "Fundraiser", "Feed", "Photos", "Friends"]
    grams = extract_ngrams(nav, 2)
    multiset_ok = grams == Counter({("Feed", "Photos"): 2, ("Photos", "Fundraiser"): 1,
                                    ("Fundraiser", "Feed"): 1, ("Photos", "Friends"): 1})
    idf_err = abs(idf(10, 2) - math.log(8.5 / 2.5))
    vocab = build_vocabulary([["X", "Y"]] * 8 + [["A", "B"]] * 2, 2, min_df=1)
    clamp_ok = vocab.weight(("X", "Y")) == 0.0 and vocab.weight(("A", "B")) > 0
    ok = multiset_ok and idf_err <= 1e-9 and clamp_ok
    assert acceptance(9, "IDF formula, bi-gram multiset and clamping", ok,
                      f"idf error {idf_err:.1e}, multiset {'exact' if multiset_ok else 'wrong'}")
