"""Runtime comparison of continuous mining against equal-width binning."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass, fields
from typing import Sequence

from .ccsm import CcsmConfig, mine_binned_baseline, mine_continuous
from .dataset import Dataset, stratified_sample
from .stucco import MinerConfig, SearchStats


@dataclass
class BenchRow:
    size: int
    engine: str
    rows: int
    wall_time: float
    tested: int
    depth1_tested: int
    emitted: int
    peak_width: int
    timed_out: bool


def run_engine(engine: str, d: Dataset, *, ccsm_cfg: CcsmConfig, miner_cfg: MinerConfig,
               timeout: float | None = None, size: int = 0) -> BenchRow:
    """Time one engine (``"ccsm"`` or ``"binned-<b>"``) on ``d``."""
    search = SearchStats()
    t0 = time.perf_counter()
    deadline = None if timeout is None else time.monotonic() + timeout
    if engine == "ccsm":
        found = mine_continuous(d, None, ccsm_cfg, search=search, deadline=deadline)
    elif engine.startswith("binned-"):
        found = mine_binned_baseline(d, int(engine.split("-", 1)[1]), miner_cfg, search=search,
                                     deadline=deadline)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    wall = time.perf_counter() - t0
    return BenchRow(size, engine, d.n_rows, wall, search.total_tested,
                    search.tested[0] if search.tested else 0, len(found), search.peak_width,
                    timeout is not None and wall >= timeout)


def run_bench(d: Dataset, sizes: Sequence[int], *, ccsm_cfg: CcsmConfig | None = None,
              miner_cfg: MinerConfig | None = None, bins: Sequence[int] = (3, 10),
              timeout: float | None = 3600.0, seed: int = 0) -> list[BenchRow]:
    """Stratified-sample ``d`` to each size and run every engine on the same sample.

    Each group is sampled to ``size / n_groups`` rows in expectation.
    """
    ccsm_cfg = ccsm_cfg or CcsmConfig(alpha=(miner_cfg or MinerConfig()).alpha)
    miner_cfg = miner_cfg or MinerConfig(alpha=ccsm_cfg.alpha)
    engines = ["ccsm"] + [f"binned-{b}" for b in bins]
    out = []
    for size in sizes:
        sample = stratified_sample(d, max(1, round(size / d.n_groups)), seed)
        for engine in engines:
            out.append(run_engine(engine, sample, ccsm_cfg=ccsm_cfg, miner_cfg=miner_cfg,
                                  timeout=timeout, size=size))
    return out


def to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=[f.name for f in fields(BenchRow)], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**asdict(r), "wall_time": f"{r.wall_time:.4f}"})
    return buf.getvalue()


def to_table(rows: Sequence[BenchRow]) -> str:
    head = f"{'size':>8} {'engine':<10} {'rows':>7} {'time(s)':>9} {'tested':>8} {'d1':>7} {'emitted':>8} {'peak':>7} timeout"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.size:>8} {r.engine:<10} {r.rows:>7} {r.wall_time:>9.3f} {r.tested:>8} "
                     f"{r.depth1_tested:>7} {r.emitted:>8} {r.peak_width:>7} {'yes' if r.timed_out else 'no'}")
    return "\n".join(lines)
