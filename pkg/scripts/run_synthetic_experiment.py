#!/usr/bin/env python3
"""Compare index-maintenance strategies on one synthetic stream.

Runs the same training streams under codeword indexing, eager phi
indexing, and batched phi indexing at several refresh cadences, then
prints a table of mAP against total bit updates. Optionally writes each
configuration's checkpoint curve to CSV for plotting elsewhere.
"""

import argparse
from pathlib import Path

from ecochash.evaluation import (ExperimentConfig, make_gaussian_classes,
                                 run_stream_experiment, write_curve_csv)
from ecochash.index import MODE_CODEWORD, MODE_PHI


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--dims", type=int, default=32)
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--db", type=int, default=2000)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--separation", type=float, default=4.0)
    ap.add_argument("--k", type=int, default=32)
    ap.add_argument("--rho", type=int, default=None)
    ap.add_argument("--eta", type=float, default=1.0)
    ap.add_argument("--orderings", type=int, default=3)
    ap.add_argument("--refresh-cadences", type=int, nargs="+",
                    default=[10, 50, 200])
    ap.add_argument("--checkpoint-every", type=int, default=250)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--curve-dir", default=None,
                    help="write per-configuration checkpoint curves here")
    args = ap.parse_args()

    total = args.train + args.db + args.queries
    X, labels = make_gaussian_classes(args.classes, args.dims, total,
                                      separation=args.separation, seed=args.seed)
    tr = slice(0, args.train)
    db = slice(args.train, args.train + args.db)
    q = slice(args.train + args.db, total)
    splits = (X[tr], labels[tr], X[db], labels[db], X[q], labels[q])

    configs = [("codeword", ExperimentConfig(
        k=args.k, rho=args.rho, eta=args.eta, orderings=args.orderings,
        seed=args.seed, checkpoint_every=args.checkpoint_every))]
    configs.append(("phi-eager", ExperimentConfig(
        k=args.k, rho=args.rho, eta=args.eta, orderings=args.orderings,
        seed=args.seed, checkpoint_every=args.checkpoint_every,
        mode=MODE_PHI)))
    for r in args.refresh_cadences:
        configs.append((f"phi-every-{r}", ExperimentConfig(
            k=args.k, rho=args.rho, eta=args.eta, orderings=args.orderings,
            seed=args.seed, checkpoint_every=args.checkpoint_every,
            mode=MODE_PHI, refresh_every=r)))

    curve_dir = Path(args.curve_dir) if args.curve_dir else None
    if curve_dir:
        curve_dir.mkdir(parents=True, exist_ok=True)

    print("configuration,mean_map,mean_bit_updates,mean_flipped_bits")
    for name, config in configs:
        result = run_stream_experiment(*splits, config)
        bits = sum(result.bit_updates_per_ordering) / len(result.bit_updates_per_ordering)
        flips = sum(result.flipped_bits_per_ordering) / len(result.flipped_bits_per_ordering)
        print(f"{name},{result.mean_map:.4f},{bits:.0f},{flips:.0f}")
        if curve_dir:
            write_curve_csv(result.curve, curve_dir / f"{name}.csv")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
