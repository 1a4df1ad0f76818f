#!/usr/bin/env python3
"""Disk sector gallery: flux value against the 5/8 volume bound (informational)."""

import argparse
import json

from mvlift.analysis import disk_gallery


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=12)
    ap.add_argument("--width", type=float, default=0.5, help="excluded wedge half-width")
    args = ap.parse_args()
    out = disk_gallery(n=args.resolution, width=args.width)
    clean = {k: (v if not isinstance(v, float) or abs(v) != float("inf") else "inf")
             for k, v in out.items()}
    print(json.dumps(clean, indent=2, sort_keys=True))
    if out["flux_value"] == float("inf"):
        print("note: no finite-energy flux at this resolution; raise --resolution")


if __name__ == "__main__":
    main()
