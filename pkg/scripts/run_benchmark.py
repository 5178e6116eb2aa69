"""Repeated-split evaluation on user-downloaded benchmark datasets.

Each dataset is looked up as <name>.csv (or .txt/.data) in --dir, which
defaults to $ISBOR_BENCHMARK_DIR, and checked against the bundled manifest.
Split sizes come from the manifest; theta comes from CV on the first split.

    python3 scripts/run_benchmark.py --dir ~/data/ordinal --names bank,swd
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from isbor.data import BENCHMARK_ENV, load_benchmark, load_manifest
from isbor.evaluation import DEFAULT_GRID, run_benchmark, write_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dir", help=f"dataset directory (default ${BENCHMARK_ENV})")
    ap.add_argument("--names", default="bank,swd")
    ap.add_argument("--partitions", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--grid", default=",".join(f"{t:g}" for t in DEFAULT_GRID))
    ap.add_argument("--out", help="per-partition report; the dataset name is prefixed to the file name")
    args = ap.parse_args(argv)

    manifest = load_manifest()
    grid = tuple(float(t) for t in args.grid.split(","))
    status = 0
    for name in args.names.split(","):
        try:
            ds = load_benchmark(name, args.dir)
        except Exception as exc:
            print(f"{name}: {exc}", file=sys.stderr)
            status = 1
            continue
        spec = manifest[name.lower()]
        theta, rows = run_benchmark(ds, spec.n_train, args.partitions, grid, seed=args.seed,
                                    n_test=spec.n_test)
        ok = [r for r in rows if not r.error]
        maes = np.array([r.mae for r in ok])
        ms = np.array([r.n_active for r in ok])
        print(f"{spec.name}: theta={theta:g} partitions={len(ok)}/{len(rows)} "
              f"mae={maes.mean():.3f} ({maes.std():.3f}) M={ms.mean():.1f} ({ms.std():.1f})")
        if args.out:
            out = Path(args.out)
            write_report(rows, out.with_name(f"{name.lower()}_{out.name}"))
    return status


if __name__ == "__main__":
    sys.exit(main())
