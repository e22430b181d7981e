"""Command-line entry point: ``crashcontrast {mine,bench,featurize,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bench, dataset, navfeat, ranking
from .ccsm import CcsmConfig, mine_continuous
from .stucco import MinerConfig, mine_categorical

EXIT_OK, EXIT_ERROR, EXIT_EMPTY = 0, 1, 2


class CliError(Exception):
    pass


def _schema(arg: str | None):
    if arg is None:
        return None
    if os.path.exists(arg):
        return json.loads(Path(arg).read_text())
    out = {}
    for part in arg.split(","):
        name, _, kind = part.partition(":")
        out[name.strip()] = {"cat": dataset.CATEGORICAL, "num": dataset.CONTINUOUS}.get(kind.strip(), kind.strip())
    return out


def _load(args) -> dataset.Dataset:
    try:
        return dataset.load(args.input, args.format, _schema(args.schema), args.group_col)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        raise CliError(str(e)) from e


def _config_echo(args) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_mine(args) -> int:
    d = _load(args)
    deviations = []
    has_cat = bool(d.categorical_indices())
    has_cont = bool(d.continuous_indices()) or d.nav_logs is not None
    if args.mode == "categorical" and not has_cat:
        raise CliError("no categorical columns")
    if args.mode == "continuous" and not has_cont:
        raise CliError("no continuous columns or navigation logs")
    if args.mode in ("categorical", "mixed") and has_cat:
        cfg = MinerConfig(delta=args.delta, alpha=args.alpha, max_depth=args.max_depth,
                          min_count=args.min_count, threads=args.threads)
        deviations += mine_categorical(d, cfg)
    if args.mode in ("continuous", "mixed") and has_cont:
        cfg = CcsmConfig(delta=args.cont_delta, alpha=args.alpha, max_ngram=args.max_ngram,
                         min_count=args.min_count)
        plain = [d.columns[i].name for i in d.continuous_indices()]
        if d.nav_logs is not None:
            vocab = navfeat.build_vocabulary(d.nav_logs, 2, args.min_df)
            if len(vocab) == 0 and not plain:
                raise CliError("no candidate features: empty vocabulary")
            features = navfeat.vectorize(d.nav_logs, vocab) if len(vocab) else None
            deviations += mine_continuous(d, features if features is not None else plain, cfg,
                                          columns=plain if features is not None else ())
        else:
            deviations += mine_continuous(d, plain, cfg)
    scored = ranking.score_deviations(deviations, d, expected_basis=args.expected_basis)
    ranked = ranking.rank_findings(scored, args.top_k, absolute=args.absolute)
    run = {"config": _config_echo(args), "dataset_fingerprint": d.fingerprint(),
           "n_rows": d.n_rows, "groups": list(d.groups), "mined_sets": len(deviations)}
    _emit(ranking.render_report(ranked, args.out_format, run=run), args.out)
    return EXIT_OK if ranked else EXIT_EMPTY


def cmd_bench(args) -> int:
    d = _load(args)
    if not d.continuous_indices():
        raise CliError("bench needs continuous columns")
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else [d.n_rows]
    bins = [int(b) for b in args.bins.split(",")]
    rows = bench.run_bench(
        d, sizes,
        ccsm_cfg=CcsmConfig(delta=args.cont_delta, alpha=args.alpha, min_count=args.min_count),
        miner_cfg=MinerConfig(delta=args.delta, alpha=args.alpha, max_depth=args.max_depth,
                              min_count=args.min_count, threads=args.threads),
        bins=bins, timeout=args.timeout_secs, seed=args.seed)
    header = json.dumps({"config": _config_echo(args), "dataset_fingerprint": d.fingerprint()})
    _emit(f"# {header}\n" + bench.to_csv(rows), args.out)
    print(bench.to_table(rows), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_featurize(args) -> int:
    try:
        records = [json.loads(line) for line in Path(args.input).read_text(encoding="utf-8").splitlines()
                   if line.strip()]
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(str(e)) from e
    if not records:
        raise CliError("no rows")
    if not any(dataset.NAV_FIELD in r for r in records):
        raise CliError(f"input has no {dataset.NAV_FIELD!r} field")
    logs = [tuple(str(e) for e in (r.get(dataset.NAV_FIELD) or ())) for r in records]
    vocab = navfeat.build_vocabulary(logs, args.ngram, args.min_df)
    if len(vocab) == 0:
        raise CliError("empty vocabulary: no n-gram reaches --min-df")
    fm = navfeat.vectorize(logs, vocab)
    names = [args.prefix + n for n in fm.names]
    out = Path(args.out)
    with out.open("w", encoding="utf-8") as fh:
        for rec, row in zip(records, fm.weights):
            meta = {k: v for k, v in rec.items() if k != dataset.NAV_FIELD}
            meta.update({n: float(w) for n, w in zip(names, row)})
            fh.write(json.dumps(meta) + "\n")
    vocab.save(out.with_name(out.name + ".vocab.json"))
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = dataset.SyntheticSpec.from_json(args.spec)
        d = dataset.generate_synthetic(spec)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        raise CliError(f"invalid synthetic spec: {e}") from e
    dataset.write(d, args.out)
    print(json.dumps({"output": str(args.out), "rows": d.n_rows, "planted": spec.manifest()}, indent=2))
    return EXIT_OK


def _input_flags(p):
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--group-col", default="sig")
    p.add_argument("--schema", help="JSON file or 'col:categorical,col:continuous'")


def _mining_flags(p):
    p.add_argument("--delta", type=float, default=0.05, help="minimum support difference")
    p.add_argument("--cont-delta", type=float, default=0.0, help="minimum mean difference, raw units")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--max-ngram", type=int, default=3)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--min-df", type=int, default=5)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crashcontrast", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="mine and rank contrast sets")
    _input_flags(p)
    _mining_flags(p)
    p.add_argument("--mode", choices=["categorical", "continuous", "mixed"], default="mixed")
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--expected-basis", choices=[ranking.COMPLEMENT, ranking.POPULATION],
                   default=ranking.COMPLEMENT)
    p.add_argument("--absolute", action="store_true", help="rank by |score|")
    p.add_argument("--out")
    p.add_argument("--out-format", choices=["json", "markdown"], default="json")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("bench", help="time continuous mining against binned baselines")
    _input_flags(p)
    _mining_flags(p)
    p.add_argument("--sizes", help="comma-separated row counts")
    p.add_argument("--bins", default="3,10")
    p.add_argument("--timeout-secs", type=float, default=3600.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("featurize", help="add TF-IDF n-gram columns from nav_log arrays")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-df", type=int, default=5)
    p.add_argument("--ngram", type=int, default=2)
    p.add_argument("--prefix", default="nav:")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted anomalies")
    p.add_argument("spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
