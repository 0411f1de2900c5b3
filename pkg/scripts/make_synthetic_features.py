#!/usr/bin/env python3
"""Generate Gaussian-blob feature files for the CLI to train and evaluate on.

Writes three files (train/db/query) sharing one class structure, so a
pipeline like

    python3 scripts/make_synthetic_features.py --out-dir /tmp/demo
    ecochash train --features /tmp/demo/train.csv --k 32 --model-out /tmp/demo/m.model
    ecochash index --model /tmp/demo/m.model --features /tmp/demo/db.csv \
        --mode codeword --index-out /tmp/demo/i.index
    ecochash eval --model /tmp/demo/m.model --index /tmp/demo/i.index \
        --queries /tmp/demo/query.csv

runs end to end on synthetic data.
"""

import argparse
from pathlib import Path

from ecochash.evaluation import make_gaussian_classes
from ecochash.storage import write_features


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--dims", type=int, default=32)
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--db", type=int, default=5000)
    ap.add_argument("--queries", type=int, default=500)
    ap.add_argument("--separation", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--format", choices=["csv", "binary"], default="csv")
    ap.add_argument("--integer-labels", action="store_true",
                    help="write labels as bare integers (required for binary)")
    args = ap.parse_args()

    if args.format == "binary" and not args.integer_labels:
        ap.error("--format binary needs --integer-labels")

    total = args.train + args.db + args.queries
    X, labels = make_gaussian_classes(args.classes, args.dims, total,
                                      separation=args.separation, seed=args.seed)
    if args.integer_labels:
        labels = [y.removeprefix("c") for y in labels]

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    suffix = "csv" if args.format == "csv" else "feat"
    splits = (("train", 0, args.train),
              ("db", args.train, args.train + args.db),
              ("query", args.train + args.db, total))
    for name, lo, hi in splits:
        path = out / f"{name}.{suffix}"
        write_features(path, list(range(lo, hi)), labels[lo:hi], X[lo:hi],
                       fmt=args.format)
        print(f"{path}: {hi - lo} rows, {args.dims} dims")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
