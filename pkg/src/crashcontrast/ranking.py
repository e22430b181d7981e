"""Anomaly scores, magnitude labels, confidence intervals and reports.

Categorical findings are scored with Cohen's h and continuous ones with
Cohen's d, so both kinds share one scale and can be ranked in one list per
group. The legacy percent-difference score is kept alongside for comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Sequence

from . import stats
from .ccsm import ContinuousCandidate, ContinuousDeviation, ContinuousStats
from .dataset import Dataset
from .stucco import ContrastSet, Deviation, SupportTable

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
COMPLEMENT = "complement"
POPULATION = "population"

MAGNITUDES = (
    (0.01, "very small"),
    (0.2, "small"),
    (0.5, "medium"),
    (0.8, "large"),
    (1.2, "very large"),
    (2.0, "huge"),
)
NEGLIGIBLE = "negligible"


def magnitude_label(score: float) -> str:
    """Label of the largest threshold not exceeding ``|score|``."""
    s = abs(score)
    label = NEGLIGIBLE
    for threshold, name in MAGNITUDES:
        if s >= threshold:
            label = name
    return label


@dataclass(frozen=True)
class ScoredFinding:
    group: str
    contrast: ContrastSet | ContinuousCandidate
    kind: str
    score: float
    score_ci: stats.Interval
    raw_diff: float
    raw_diff_ci: stats.Interval
    percent_diff: float | None
    magnitude: str
    p_value: float
    observed: float
    expected: float
    feature: str = ""
    items: tuple[dict, ...] = ()
    flags: tuple[str, ...] = ()
    # sufficient statistics kept so intervals can be rebuilt at another level
    evidence: tuple = field(default=(), repr=False, compare=False)

    def with_level(self, level: float) -> "ScoredFinding":
        if self.kind == CATEGORICAL:
            score_ci, diff_ci = _categorical_intervals(self.score, *self.evidence, level)
        else:
            score_ci, diff_ci = _continuous_intervals(self.score, *self.evidence, level)
        return replace(self, score_ci=score_ci, raw_diff_ci=diff_ci)

    def to_dict(self) -> dict:
        out = {
            "group": self.group,
            "contrast": [dict(i) for i in self.items],
            "kind": self.kind,
            "observed": _num(self.observed),
            "expected": _num(self.expected),
            "score": _num(self.score),
            "score_ci": [_num(self.score_ci.lo), _num(self.score_ci.hi)],
            "raw_diff": _num(self.raw_diff),
            "raw_diff_ci": [_num(self.raw_diff_ci.lo), _num(self.raw_diff_ci.hi)],
            "magnitude": self.magnitude,
            "p_value": _num(self.p_value),
            "flags": list(self.flags),
        }
        if self.kind == CATEGORICAL:
            out["percent_diff"] = _num(self.percent_diff)
        return out


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _degenerate(point: float, level: float) -> stats.Interval:
    return stats.Interval(point, point, level)


def _categorical_intervals(score, x1, n1, x2, n2, level):
    if n1 < 2 or n2 < 2:
        return _degenerate(score, level), _degenerate(x1 / n1 - x2 / n2, level)
    return (stats.effect_size_interval("h", score, n1, n2, level),
            stats.proportion_difference_interval(x1, n1, x2, n2, level))


def _continuous_intervals(score, a, b, level):
    diff = a.mean - b.mean
    if a.n < 2 or b.n < 2:
        return _degenerate(score, level), _degenerate(diff, level)
    return stats.effect_size_interval("d", score, a.n, b.n, level), stats.welch_interval(a, b, level)


def score_categorical(x: ContrastSet, group: str, supports: SupportTable, *,
                      expected_basis: str = COMPLEMENT, p_value: float = math.nan,
                      level: float = 0.95, dataset: Dataset | None = None,
                      flags: Iterable[str] = ()) -> ScoredFinding:
    """Cohen's h of the in-group support against the expected support.

    ``expected_basis`` selects the comparison population: all other groups
    pooled (``"complement"``) or every group including this one
    (``"population"``).
    """
    g = supports.group_index(group)
    x1, n1 = int(supports.counts[g]), int(supports.sizes[g])
    if n1 == 0:
        raise ValueError(f"group {group!r} is empty")
    total, size = int(supports.counts.sum()), int(supports.sizes.sum())
    if expected_basis == COMPLEMENT:
        x2, n2 = total - x1, size - n1
    elif expected_basis == POPULATION:
        x2, n2 = total, size
    else:
        raise ValueError(f"unknown expected basis {expected_basis!r}")
    if n2 == 0:
        raise ValueError("no records outside the group to compare against")
    observed, expected = x1 / n1, x2 / n2
    score = stats.cohens_h(observed, expected)
    flags = list(flags)
    if expected > 0:
        percent = (observed - expected) / expected
    else:
        percent = math.inf if observed > 0 else 0.0
        if observed > 0:
            flags.append("infinite-percent")
    if n1 < 2 or n2 < 2:
        flags.append("small-sample")
    score_ci, diff_ci = _categorical_intervals(score, x1, n1, x2, n2, level)
    items = tuple(x.describe(dataset)) if dataset is not None else tuple(
        {"column": str(c), "value": str(v)} for c, v in x.items)
    feature = "{" + ", ".join(f"{i['column']}: {i['value']}" for i in items) + "}"
    return ScoredFinding(group, x, CATEGORICAL, score, score_ci, observed - expected, diff_ci, percent,
                         magnitude_label(score), p_value, observed, expected, feature, items,
                         tuple(flags), (x1, n1, x2, n2))


def score_continuous(q: ContinuousCandidate, group: str, cstats: ContinuousStats, *,
                     expected_basis: str = COMPLEMENT, p_value: float = math.nan,
                     level: float = 0.95, flags: Iterable[str] = ()) -> ScoredFinding:
    """Cohen's d of the in-group mean against the complement (or population) mean."""
    a = cstats.sample(group)
    if expected_basis == COMPLEMENT:
        b = cstats.complement(group)
    elif expected_basis == POPULATION:
        b = cstats.population()
    else:
        raise ValueError(f"unknown expected basis {expected_basis!r}")
    if a.n == 0 or b.n == 0:
        raise ValueError(f"group {group!r} or its comparison set is empty")
    flags = list(flags)
    if a.n + b.n < 3:
        score = 0.0
        flags.append("small-sample")
    else:
        score = stats.cohens_d(a, b)
    if math.isinf(score):
        flags.append("infinite-effect")
    elif a.n < 2 or b.n < 2:
        flags.append("small-sample")
    score_ci, diff_ci = _continuous_intervals(score, a, b, level)
    items = ({"column": q.name},)
    return ScoredFinding(group, q, CONTINUOUS, score, score_ci, a.mean - b.mean, diff_ci, None,
                         "huge" if math.isinf(score) else magnitude_label(score), p_value, a.mean,
                         b.mean, "{" + q.name + "}", items, tuple(flags), (a, b))


def score_deviations(deviations: Iterable[Deviation | ContinuousDeviation], dataset: Dataset | None = None, *,
                     expected_basis: str = COMPLEMENT, level: float = 0.95) -> list[ScoredFinding]:
    """Score every mined set against every non-empty group, one versus rest."""
    out = []
    for dev in deviations:
        if isinstance(dev, ContinuousDeviation):
            for g, s in zip(dev.stats.groups, dev.stats.samples):
                if s.n == 0:
                    continue
                out.append(score_continuous(dev.candidate, g, dev.stats, expected_basis=expected_basis,
                                            p_value=dev.p_value, level=level))
        else:
            flags = ("low-count",) if dev.low_count else ()
            for gi, g in enumerate(dev.supports.groups):
                if dev.supports.sizes[gi] == 0:
                    continue
                out.append(score_categorical(dev.contrast, g, dev.supports, expected_basis=expected_basis,
                                             p_value=dev.p_value, level=level, dataset=dataset, flags=flags))
    return out


def rank_findings(findings: Sequence[ScoredFinding], top_k: int = 20, *, absolute: bool = False,
                  level: float = 0.95, key: str = "score") -> list[ScoredFinding]:
    """Top findings per group, highest score first.

    Negative scores are dropped unless ``absolute`` is set, in which case
    findings are ordered by ``|score|``. ``key="percent_diff"`` ranks by the
    legacy percent difference instead. Intervals are rebuilt at the
    Bonferroni-adjusted level for the number of findings kept per group.
    Ties keep their input order.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    groups: dict[str, list[ScoredFinding]] = {}
    for f in findings:
        groups.setdefault(f.group, []).append(f)
    out = []
    for g in sorted(groups):
        def value(f):
            v = f.score if key == "score" else f.percent_diff
            return -math.inf if v is None else v
        items = groups[g] if absolute else [f for f in groups[g] if value(f) > 0]
        items = sorted(items, key=lambda f: -abs(value(f)) if absolute else -value(f))[:top_k]
        if not items:
            continue
        adjusted = 1.0 - stats.bonferroni(1.0 - level, len(items))
        out.extend(f.with_level(adjusted) for f in items)
    return out


def render_report(findings: Sequence[ScoredFinding], format: str = "json", *, run: dict | None = None) -> str:
    """JSON document or markdown table of ranked findings."""
    run = dict(run or {})
    run.setdefault("timestamp", datetime.now(timezone.utc).isoformat(timespec="seconds"))
    run.setdefault("config", {})
    run.setdefault("dataset_fingerprint", None)
    if format == "json":
        return json.dumps({"run": run, "findings": [f.to_dict() for f in findings]}, indent=2)
    if format != "markdown":
        raise ValueError(f"unknown report format {format!r}")
    lines = [
        f"<!-- run {json.dumps(run, sort_keys=True)} -->",
        "",
        "| Group | Feature | Observed | Expected | Score | CI | Magnitude | Percent Deviation |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for f in findings:
        pct = "n/a" if f.percent_diff is None else ("inf" if math.isinf(f.percent_diff)
                                                     else f"{f.percent_diff * 100:.0f}%")
        lines.append(
            f"| {f.group} | {f.feature} | {f.observed:.4g} | {f.expected:.4g} | {f.score:.3f} "
            f"| ({f.score_ci.lo:.3f}, {f.score_ci.hi:.3f}) | {f.magnitude} | {pct} |")
    return "\n".join(lines) + "\n"
