#!/usr/bin/env python3
"""Interval refinement study: both liftings of the mollified straight line meet 1/2."""

import argparse
import pathlib

from mvlift.analysis import superposition_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", default="16,32,64", help="node counts (cells match)")
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--out", default="superposition.csv")
    args = ap.parse_args()
    levels = tuple((int(s), int(s)) for s in args.levels.split(","))
    study = superposition_study(levels=levels, sigma=args.sigma)
    pathlib.Path(args.out).write_text(study.to_csv())
    print(study.to_csv())
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
