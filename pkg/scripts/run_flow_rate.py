#!/usr/bin/env python3
"""Ray-flow construction on shrinking arcs: error per volume decays with the diameter."""

import argparse
import pathlib

from mvlift.analysis import flow_rate_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", default="96,192,384")
    ap.add_argument("--arc-nodes", type=int, default=13)
    ap.add_argument("--circulation", type=float, default=0.003)
    ap.add_argument("--out", default="flow_rate.csv")
    args = ap.parse_args()
    study = flow_rate_study(levels=tuple(int(s) for s in args.levels.split(",")),
                            arc_nodes=args.arc_nodes, circulation=args.circulation)
    pathlib.Path(args.out).write_text(study.to_csv())
    print(study.to_csv())
    print("log-log slope:", study.loglog_slope("normalized_error", "diameter"))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
