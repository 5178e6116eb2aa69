"""Training-size sweep on the synthetic saddle data.

Picks theta by 5-fold CV on a 1000-row training set, then fits every size in
1000..10000 with that theta and reports active-set size, warm-cache fit time
and test MAE on the remaining rows.

    python3 scripts/synthetic_sweep.py --out sweep.csv
"""

import argparse
import csv
import sys

from isbor.data import generate_synthetic, partition
from isbor.evaluation import DEFAULT_GRID, cross_validate, evaluate_model, fit_timed, majority_mae
from isbor.trainer import TrainConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sizes", default=",".join(str(n) for n in range(1000, 10001, 1000)))
    ap.add_argument("--theta", type=float, help="skip CV and use this width")
    ap.add_argument("--test-size", type=int, default=5000)
    ap.add_argument("--out", help="CSV report path (default stdout)")
    args = ap.parse_args(argv)

    ds = generate_synthetic(21000, seed=args.seed)
    theta = args.theta
    if theta is None:
        (tr, _), = partition(ds, 1000, 1, seed=args.seed)
        cv = cross_validate(tr, DEFAULT_GRID, k=5, seed=args.seed)
        theta = cv.best_theta
        print("cv " + " ".join(f"{t:g}:{v:.4f}" for t, v in cv.table.items()), file=sys.stderr)

    cfg = TrainConfig(seed=args.seed)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["size", "theta", "n_active", "cache_seconds", "fit_seconds", "mae", "majority_mae"])
    for n in (int(s) for s in args.sizes.split(",")):
        (tr, te), = partition(ds, n, 1, seed=args.seed)
        te = te.take(range(min(args.test_size, te.n)))
        model, cache_s, fit_s = fit_timed(tr, cfg, theta)
        m, _ = evaluate_model(model, te)
        w.writerow([n, theta, model.m, f"{cache_s:.3f}", f"{fit_s:.3f}", f"{m:.4f}",
                    f"{majority_mae(tr.Y, te.Y):.4f}"])
        fh.flush()
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
