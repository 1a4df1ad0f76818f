#!/usr/bin/env python3
"""Two-branch circle gallery: exact coupling values diverge, flux values stay at pi/4."""

import argparse
import pathlib

from mvlift.analysis import divergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", default="6,8,10,12", help="comma-separated even node counts")
    ap.add_argument("--out", default="circle_gallery.csv")
    args = ap.parse_args()
    study = divergence_study(tuple(int(s) for s in args.nodes.split(",")))
    pathlib.Path(args.out).write_text(study.to_csv())
    print(study.to_csv())
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
