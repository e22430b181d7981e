"""Columnar crash-record tables, file I/O, sampling, binning and synthetic data."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
MISSING = -1
NAV_FIELD = "nav_log"


@dataclass(frozen=True, eq=False)
class Column:
    """One feature column.

    Categorical columns store dense integer codes into ``categories`` with
    ``MISSING`` (-1) for absent cells. Continuous columns store float64 values
    plus a ``valid`` mask; masked-out cells hold 0.0, never NaN.
    """

    name: str
    kind: str
    values: np.ndarray
    categories: tuple[str, ...] = ()
    valid: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            codes = np.asarray(self.values, dtype=np.int32)
            if codes.size and (codes.min() < MISSING or codes.max() >= len(self.categories)):
                raise ValueError(f"column {self.name!r}: code out of range")
            object.__setattr__(self, "values", codes)
        elif self.kind == CONTINUOUS:
            x = np.asarray(self.values, dtype=np.float64)
            valid = np.isfinite(x) if self.valid is None else np.asarray(self.valid, dtype=bool) & np.isfinite(x)
            x = np.where(valid, x, 0.0)
            object.__setattr__(self, "values", x)
            object.__setattr__(self, "valid", valid)
        else:
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")
        self.values.setflags(write=False)
        if self.valid is not None:
            self.valid.setflags(write=False)

    def __len__(self):
        return len(self.values)

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @classmethod
    def from_strings(cls, name: str, raw: Sequence[str | None]) -> "Column":
        cats: dict[str, int] = {}
        codes = np.empty(len(raw), dtype=np.int32)
        for i, v in enumerate(raw):
            if v is None or v == "":
                codes[i] = MISSING
            else:
                codes[i] = cats.setdefault(str(v), len(cats))
        return cls(name, CATEGORICAL, codes, tuple(cats))

    def label(self, code: int) -> str:
        return self.categories[code]

    def take(self, idx: np.ndarray) -> "Column":
        valid = None if self.valid is None else self.valid[idx]
        return Column(self.name, self.kind, self.values[idx], self.categories, valid)

    def cell(self, i: int):
        if self.kind == CATEGORICAL:
            c = int(self.values[i])
            return None if c == MISSING else self.categories[c]
        return float(self.values[i]) if self.valid[i] else None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable columnar table with one group label per row."""

    columns: tuple[Column, ...]
    group_column: str
    groups: tuple[str, ...]
    group_codes: np.ndarray
    nav_logs: tuple[tuple[str, ...], ...] | None = None
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        codes = np.asarray(self.group_codes, dtype=np.int32)
        codes.setflags(write=False)
        object.__setattr__(self, "group_codes", codes)
        n = len(codes)
        if codes.size and (codes.min() < 0 or codes.max() >= len(self.groups)):
            raise ValueError("group codes must index into groups")
        for c in self.columns:
            if len(c) != n:
                raise ValueError(f"column {c.name!r} has {len(c)} values, expected {n}")
            if c.name == self.group_column:
                raise ValueError("group column must not also be a feature column")
        if self.nav_logs is not None and len(self.nav_logs) != n:
            raise ValueError("nav_logs must be row-aligned")
        self._index.update({c.name: i for i, c in enumerate(self.columns)})
        if len(self._index) != len(self.columns):
            raise ValueError("duplicate column names")

    @property
    def n_rows(self) -> int:
        return len(self.group_codes)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group_codes, minlength=self.n_groups)

    def column(self, name: str) -> Column:
        return self.columns[self._index[name]]

    def column_index(self, name: str) -> int:
        return self._index[name]

    def categorical_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.columns) if c.kind == CATEGORICAL]

    def continuous_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.columns) if c.kind == CONTINUOUS]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        logs = None if self.nav_logs is None else tuple(self.nav_logs[i] for i in idx)
        return Dataset(tuple(c.take(idx) for c in self.columns), self.group_column,
                       self.groups, self.group_codes[idx], logs)

    def with_columns(self, columns: Iterable[Column]) -> "Dataset":
        return Dataset(tuple(self.columns) + tuple(columns), self.group_column,
                       self.groups, self.group_codes, self.nav_logs)

    def replace_columns(self, columns: Iterable[Column]) -> "Dataset":
        return Dataset(tuple(columns), self.group_column, self.groups, self.group_codes, self.nav_logs)

    def schema(self) -> dict[str, str]:
        return {c.name: c.kind for c in self.columns}

    def fingerprint(self) -> str:
        """Content hash of labels and every column, stable across runs."""
        h = hashlib.sha256()
        h.update(self.group_column.encode())
        h.update("\x00".join(self.groups).encode())
        h.update(self.group_codes.tobytes())
        for c in self.columns:
            h.update(c.name.encode() + c.kind.encode())
            h.update("\x00".join(c.categories).encode())
            h.update(np.ascontiguousarray(c.values).tobytes())
            if c.valid is not None:
                h.update(c.valid.tobytes())
        if self.nav_logs is not None:
            h.update(json.dumps(self.nav_logs).encode())
        return h.hexdigest()[:16]

    def rows(self) -> Iterable[dict]:
        for i in range(self.n_rows):
            row = {self.group_column: self.groups[self.group_codes[i]]}
            for c in self.columns:
                row[c.name] = c.cell(i)
            if self.nav_logs is not None:
                row[NAV_FIELD] = list(self.nav_logs[i])
            yield row


def from_records(records: Sequence[Mapping], schema: Mapping[str, str], group_column: str,
                 *, source: str = "record") -> Dataset:
    """Build a Dataset from row dictionaries.

    Continuous cells that do not parse as finite numbers and categorical
    cells that are absent or empty become missing.
    """
    if not records:
        raise ValueError("no rows")
    for name, kind in schema.items():
        if kind not in (CATEGORICAL, CONTINUOUS):
            raise ValueError(f"schema: column {name!r} has unknown kind {kind!r}")
    labels = []
    for i, rec in enumerate(records):
        g = rec.get(group_column)
        if g is None or g == "":
            raise ValueError(f"{source} {i}: missing group label {group_column!r}")
        labels.append(str(g))
    groups = tuple(sorted(set(labels)))
    lookup = {g: i for i, g in enumerate(groups)}
    codes = np.array([lookup[g] for g in labels], dtype=np.int32)

    cols = []
    for name, kind in schema.items():
        if name == group_column:
            continue
        raw = [rec.get(name) for rec in records]
        if kind == CATEGORICAL:
            cols.append(Column.from_strings(name, [None if v is None else str(v) for v in raw]))
        else:
            cols.append(Column(name, CONTINUOUS, np.array([_to_float(v) for v in raw])))
    logs = None
    if any(NAV_FIELD in rec for rec in records):
        logs = tuple(tuple(str(e) for e in (rec.get(NAV_FIELD) or ())) for rec in records)
    return Dataset(tuple(cols), group_column, groups, codes, logs)


def _to_float(v) -> float:
    if v is None or isinstance(v, bool):
        return math.nan
    try:
        x = float(v)
    except (TypeError, ValueError):
        return math.nan
    return x if math.isfinite(x) else math.nan


def load(path, format: str | None = None, schema: Mapping[str, str] | None = None,
         group_column: str = "sig") -> Dataset:
    """Read a CSV or JSONL file.

    Args:
        path: input file.
        format: ``"csv"`` or ``"jsonl"``; inferred from the suffix when omitted.
        schema: column name to kind. Columns absent from the schema are
            ignored. When omitted, columns whose present cells all parse as
            numbers are continuous and the rest categorical.
        group_column: name of the group label column.
    """
    path = Path(path)
    format = format or ("jsonl" if path.suffix in (".jsonl", ".ndjson", ".json") else "csv")
    if format == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            records = [dict(r) for r in reader]
        source = "row"
    elif format == "jsonl":
        records = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
        header = list(dict.fromkeys(k for r in records for k in r))
        source = "record"
    else:
        raise ValueError(f"unsupported format {format!r}")
    if not records:
        raise ValueError(f"{path}: no rows")
    if group_column not in header:
        raise ValueError(f"{path}: group column {group_column!r} not found")
    if schema is None:
        schema = infer_schema(records, exclude=(group_column, NAV_FIELD))
    unknown = [c for c in schema if c not in header]
    if unknown:
        raise ValueError(f"{path}: schema names unknown column(s) {unknown}")
    return from_records(records, schema, group_column, source=source)


def infer_schema(records: Sequence[Mapping], exclude=()) -> dict[str, str]:
    names = list(dict.fromkeys(k for r in records for k in r if k not in exclude))
    schema = {}
    for name in names:
        present = [r.get(name) for r in records if r.get(name) not in (None, "")]
        numeric = bool(present) and all(
            not isinstance(v, (bool, list, dict)) and math.isfinite(_to_float(v)) for v in present)
        schema[name] = CONTINUOUS if numeric else CATEGORICAL
    return schema


def write(d: Dataset, path, format: str | None = None) -> None:
    """Write ``d`` so that ``load`` with ``d.schema()`` reproduces it."""
    path = Path(path)
    format = format or ("jsonl" if path.suffix in (".jsonl", ".ndjson", ".json") else "csv")
    if format == "csv":
        if d.nav_logs is not None:
            raise ValueError("navigation logs can only be written as jsonl")
        names = [d.group_column] + [c.name for c in d.columns]
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=names, lineterminator="\n")
            w.writeheader()
            for row in d.rows():
                w.writerow({k: "" if v is None else (repr(v) if isinstance(v, float) else v)
                            for k, v in row.items()})
    elif format == "jsonl":
        with path.open("w", encoding="utf-8") as fh:
            for row in d.rows():
                fh.write(json.dumps(row) + "\n")
    else:
        raise ValueError(f"unsupported format {format!r}")


def stratified_sample(d: Dataset, target_per_group: int, seed: int = 0) -> Dataset:
    """Keep each row of group g independently with prob min(1, target / |g|)."""
    if target_per_group < 1:
        raise ValueError("target_per_group must be >= 1")
    sizes = d.group_sizes
    with np.errstate(divide="ignore"):
        prob = np.minimum(1.0, target_per_group / np.maximum(sizes, 1))
    u = np.random.default_rng(seed).random(d.n_rows)
    keep = np.flatnonzero(u < prob[d.group_codes])
    return d.take(keep)


def equiwidth_edges(values: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(bins + 1, lo)
    return lo + (hi - lo) / bins * np.arange(bins + 1)


def bin_labels(edges: np.ndarray) -> tuple[str, ...]:
    bins = len(edges) - 1
    return tuple(
        f"[{edges[b]:.6g}, {edges[b + 1]:.6g}{']' if b == bins - 1 else ')'}" for b in range(bins))


def discretize_column(col: Column, bins: int) -> Column:
    valid = col.valid
    codes = np.full(len(col), MISSING, dtype=np.int32)
    if not valid.any():
        return Column(col.name, CATEGORICAL, codes, bin_labels(np.zeros(bins + 1)))
    x = col.values[valid]
    edges = equiwidth_edges(x, bins)
    lo, hi = edges[0], edges[-1]
    if hi == lo:
        codes[valid] = 0
    else:
        width = (hi - lo) / bins
        codes[valid] = np.clip(np.floor((x - lo) / width), 0, bins - 1).astype(np.int32)
    return Column(col.name, CATEGORICAL, codes, bin_labels(edges))


def discretize_equiwidth(d: Dataset, bins: int) -> Dataset:
    """Replace every continuous column by ``bins`` equal-width interval labels.

    Edges come from the whole column (all groups pooled); the top bin is
    closed on the right so the maximum falls inside it.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    return d.replace_columns(
        discretize_column(c, bins) if c.kind == CONTINUOUS else c for c in d.columns)


# -- synthetic data -------------------------------------------------------


@dataclass
class CategoricalFeature:
    name: str
    cardinality: int
    distribution: list[float] | None = None

    def probs(self) -> np.ndarray:
        if self.distribution is None:
            return np.full(self.cardinality, 1.0 / self.cardinality)
        p = np.asarray(self.distribution, dtype=float)
        return p / p.sum()

    def labels(self) -> tuple[str, ...]:
        return tuple(f"{self.name}_{i}" for i in range(self.cardinality))


@dataclass
class ContinuousFeature:
    name: str
    mean: float = 0.0
    std: float = 1.0


@dataclass
class PlantedCategorical:
    group: str
    attribute: str
    value: int | str
    in_support: float
    out_support: float


@dataclass
class PlantedContinuous:
    group: str
    feature: str
    shift: float  # in baseline standard deviations


@dataclass
class PlantedNGram:
    """Insert ``events`` into a fraction ``rate`` of the group's navigation logs."""

    group: str
    events: list[str]
    rate: float
    repeats: int = 1


@dataclass
class NavSpec:
    surfaces: int = 20
    min_length: int = 5
    max_length: int = 15
    planted: list[PlantedNGram] = field(default_factory=list)


@dataclass
class SyntheticSpec:
    groups: dict[str, int]
    categorical: list[CategoricalFeature] = field(default_factory=list)
    continuous: list[ContinuousFeature] = field(default_factory=list)
    planted_categorical: list[PlantedCategorical] = field(default_factory=list)
    planted_continuous: list[PlantedContinuous] = field(default_factory=list)
    nav: NavSpec | None = None
    seed: int = 0
    group_column: str = "sig"

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SyntheticSpec":
        nav = doc.get("nav")
        if nav is not None:
            nav = NavSpec(**{**nav, "planted": [PlantedNGram(**p) for p in nav.get("planted", [])]})
        return cls(
            groups=dict(doc["groups"]),
            categorical=[CategoricalFeature(**f) for f in doc.get("categorical", [])],
            continuous=[ContinuousFeature(**f) for f in doc.get("continuous", [])],
            planted_categorical=[PlantedCategorical(**p) for p in doc.get("planted_categorical", [])],
            planted_continuous=[PlantedContinuous(**p) for p in doc.get("planted_continuous", [])],
            nav=nav,
            seed=int(doc.get("seed", 0)),
            group_column=doc.get("group_column", "sig"),
        )

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def validate(self) -> None:
        if not self.groups:
            raise ValueError("synthetic spec needs at least one group")
        for g, n in self.groups.items():
            if int(n) < 1:
                raise ValueError(f"group {g!r} must have size >= 1")
        cats = {f.name: f for f in self.categorical}
        conts = {f.name for f in self.continuous}
        if len(cats) + len(conts) != len(self.categorical) + len(self.continuous) or cats.keys() & conts:
            raise ValueError("feature names must be unique")
        for f in self.categorical:
            if f.cardinality < 1:
                raise ValueError(f"feature {f.name!r}: cardinality must be >= 1")
            if f.distribution is not None and (len(f.distribution) != f.cardinality
                                               or min(f.distribution) < 0 or sum(f.distribution) <= 0):
                raise ValueError(f"feature {f.name!r}: bad baseline distribution")
        for f in self.continuous:
            if f.std < 0:
                raise ValueError(f"feature {f.name!r}: std must be >= 0")
        for p in self.planted_categorical:
            if p.group not in self.groups:
                raise ValueError(f"planted anomaly names unknown group {p.group!r}")
            if p.attribute not in cats:
                raise ValueError(f"planted anomaly names unknown categorical feature {p.attribute!r}")
            self._value_code(p)
            if not (0 <= p.in_support <= 1 and 0 <= p.out_support <= 1):
                raise ValueError("planted supports must lie in [0, 1]")
        for p in self.planted_continuous:
            if p.group not in self.groups:
                raise ValueError(f"planted anomaly names unknown group {p.group!r}")
            if p.feature not in conts:
                raise ValueError(f"planted anomaly names unknown continuous feature {p.feature!r}")
        if self.nav is not None:
            for p in self.nav.planted:
                if p.group not in self.groups:
                    raise ValueError(f"planted n-gram names unknown group {p.group!r}")
                if not 0 <= p.rate <= 1 or len(p.events) < 2:
                    raise ValueError("planted n-gram needs rate in [0, 1] and >= 2 events")

    def _value_code(self, p: PlantedCategorical) -> int:
        f = next(f for f in self.categorical if f.name == p.attribute)
        if isinstance(p.value, str):
            labels = f.labels()
            if p.value not in labels:
                raise ValueError(f"planted value {p.value!r} outside {p.attribute!r} cardinality")
            return labels.index(p.value)
        if not 0 <= int(p.value) < f.cardinality:
            raise ValueError(f"planted value {p.value!r} outside {p.attribute!r} cardinality")
        return int(p.value)

    def manifest(self) -> dict:
        out = {"categorical": [], "continuous": [], "ngram": []}
        for p in self.planted_categorical:
            f = next(f for f in self.categorical if f.name == p.attribute)
            out["categorical"].append({"group": p.group, "column": p.attribute,
                                       "value": f.labels()[self._value_code(p)],
                                       "in_support": p.in_support, "out_support": p.out_support})
        for p in self.planted_continuous:
            out["continuous"].append({"group": p.group, "column": p.feature, "shift": p.shift})
        for p in (self.nav.planted if self.nav else ()):
            out["ngram"].append({"group": p.group, "events": list(p.events), "rate": p.rate})
        return out


def _draw_excluding(rng, probs: np.ndarray, exclude: int, size: int) -> np.ndarray:
    p = probs.copy()
    p[exclude] = 0.0
    if p.sum() <= 0:
        return np.full(size, exclude)
    return rng.choice(len(p), size=size, p=p / p.sum())


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Sample a dataset with the planted anomalies described by ``spec``.

    A planted categorical anomaly fixes the probability of ``attribute=value``
    inside and outside its group; the remaining mass follows the baseline
    distribution over the other values. A planted continuous shift moves the
    group's mean by ``shift`` baseline standard deviations.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    names = list(spec.groups)
    sizes = np.array([int(spec.groups[g]) for g in names])
    order = sorted(range(len(names)), key=lambda i: names[i])
    groups = tuple(names[i] for i in order)
    remap = {names[i]: j for j, i in enumerate(order)}
    codes = np.concatenate([np.full(n, remap[g], dtype=np.int32) for g, n in zip(names, sizes)])
    n = len(codes)

    cols = []
    for f in spec.categorical:
        probs = f.probs()
        values = rng.choice(f.cardinality, size=n, p=probs)
        for p in (p for p in spec.planted_categorical if p.attribute == f.name):
            v = spec._value_code(p)
            inside = codes == remap[p.group]
            target = np.where(inside, p.in_support, p.out_support)
            hit = rng.random(n) < target
            values = np.where(hit, v, np.where(values == v, _draw_excluding(rng, probs, v, n), values))
        cols.append(Column(f.name, CATEGORICAL, values, f.labels()))
    for f in spec.continuous:
        x = rng.normal(f.mean, f.std, size=n)
        for p in (p for p in spec.planted_continuous if p.feature == f.name):
            x = x + np.where(codes == remap[p.group], p.shift * f.std, 0.0)
        cols.append(Column(f.name, CONTINUOUS, x))

    logs = None
    if spec.nav is not None:
        logs = _synthetic_logs(rng, spec.nav, codes, remap)
    return Dataset(tuple(cols), spec.group_column, groups, codes, logs)


def _synthetic_logs(rng, nav: NavSpec, codes, remap) -> tuple[tuple[str, ...], ...]:
    surfaces = [f"S{i}" for i in range(nav.surfaces)]
    # Zipf-like popularity so some transitions are common and others rare
    weights = 1.0 / np.arange(1, nav.surfaces + 1)
    weights /= weights.sum()
    lengths = rng.integers(nav.min_length, nav.max_length + 1, size=len(codes))
    logs = []
    for i, length in enumerate(lengths):
        log = [surfaces[j] for j in rng.choice(nav.surfaces, size=length, p=weights)]
        for p in nav.planted:
            if codes[i] == remap[p.group] and rng.random() < p.rate:
                for _ in range(p.repeats):
                    pos = int(rng.integers(0, len(log) + 1))
                    log[pos:pos] = list(p.events)
        logs.append(tuple(log))
    return tuple(logs)
