#!/usr/bin/env python3
"""Empirical check of the privacy guarantee on adjacent databases.

Runs the counting query many times on databases of n and n+1 rows and
tests the (eps, delta) inequality bin by bin:

    Pr[out in B | n rows] <= e^eps * Pr[out in B | n+1 rows] + delta

in both directions. Prints the worst bin. This is the runtime half of
the story; the typechecker proved the (eps, delta) price statically.

    python scripts/dp_histogram_experiment.py --runs 100000 --rows 100
"""

import argparse
import math
import sys
from decimal import Decimal
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from miniduet.interp import Database, apply_query, evaluate
from miniduet.lang import parse, parse_type
from miniduet.mech import NoiseRng, gauss_sigma

SCHEMA_TEXT = "M [L1, U | star, dR :: dR :: []]"
COUNTING_QUERY = """
plam . df : M [L1, U | star, dR :: dR :: []] =>
  let eps = R+[1.0] in
  let delta = R+[0.001] in
  gauss[R+[1.0], eps, delta] <df> { real (rows df) }
"""


def outputs(n_rows: int, runs: int, seed: int) -> np.ndarray:
    db = Database(parse_type(SCHEMA_TEXT))
    for i in range(n_rows):
        db.add_row((Decimal(i), Decimal(i)))
    rng = NoiseRng(seed)
    fn = evaluate(parse(COUNTING_QUERY), {}, rng)
    return np.array([apply_query(fn, db, rng) for _ in range(runs)])


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--runs", type=int, default=100_000)
    parser.add_argument("--rows", type=int, default=100)
    parser.add_argument("--seed", type=int, default=424242)
    args = parser.parse_args()

    eps, delta = 1.0, 0.001
    sigma = gauss_sigma(1, 1, Decimal("0.001"))
    print(f"sigma = {sigma:.6f}, eps = {eps}, delta = {delta}")
    print(f"sampling {args.runs} outputs on {args.rows} and "
          f"{args.rows + 1} rows ...")
    xs = outputs(args.rows, args.runs, args.seed)
    ys = outputs(args.rows + 1, args.runs, args.seed + 1)

    width = sigma / 4
    edges = np.arange(args.rows - 6 * sigma, args.rows + 1 + 6 * sigma + width,
                      width)
    px = np.histogram(xs, bins=edges)[0] / args.runs
    py = np.histogram(ys, bins=edges)[0] / args.runs

    bound_xy = math.e ** eps * py + delta
    bound_yx = math.e ** eps * px + delta
    worst_xy = float(np.max(px - bound_xy))
    worst_yx = float(np.max(py - bound_yx))
    print(f"worst slack x vs y: {worst_xy:+.6f}  (<= 0 means satisfied)")
    print(f"worst slack y vs x: {worst_yx:+.6f}")
    ok = worst_xy <= 0 and worst_yx <= 0
    print("DP inequality satisfied on every bin" if ok
          else "VIOLATION: some bin exceeds the bound")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
