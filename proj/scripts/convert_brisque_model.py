#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Copy a libsvm BRISQUE model and write its svm-scale style range sidecar
from a pickle holding per-feature min_/max_ lists."""

import argparse
import pickle
import shutil


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("svm", help="libsvm model text file")
    ap.add_argument("ranges", help="pickle with min_ and max_ lists")
    ap.add_argument("out_stem", help="output path without extension")
    args = ap.parse_args()

    shutil.copyfile(args.svm, args.out_stem + ".svm")
    with open(args.ranges, "rb") as f:
        d = pickle.load(f)
    lo, hi = d["min_"], d["max_"]
    assert len(lo) == len(hi) == 36
    with open(args.out_stem + ".range", "w") as f:
        f.write("x\n-1 1\n")
        for i, (a, b) in enumerate(zip(lo, hi), start=1):
            f.write(f"{i} {float(a)!r} {float(b)!r}\n")


if __name__ == "__main__":
    main()
