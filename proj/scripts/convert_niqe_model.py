#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Convert a MATLAB NIQE pristine model (.mat with mu_prisparam and
cov_prisparam) into the hqc-niqe-model text container."""

import argparse

import numpy as np
import scipy.io


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("mat", help="model .mat file")
    ap.add_argument("out", help="output text model")
    ap.add_argument("--source", default="", help="provenance note written as a comment")
    args = ap.parse_args()

    m = scipy.io.loadmat(args.mat)
    mu = np.asarray(m["mu_prisparam"], dtype=np.float64).reshape(-1)
    cov = np.asarray(m["cov_prisparam"], dtype=np.float64)
    assert mu.shape == (36,) and cov.shape == (36, 36)
    cov = (cov + cov.T) / 2.0

    with open(args.out, "w") as f:
        f.write("# NIQE pristine multivariate Gaussian\n")
        if args.source:
            f.write(f"# source: {args.source}\n")
        f.write("format hqc-niqe-model 1\n")
        f.write("dim 36\n")
        f.write("patch_size 96\n")
        f.write("sharpness_fraction 0.75\n")
        f.write("mean\n")
        f.write(" ".join(repr(float(v)) for v in mu) + "\n")
        f.write("covariance\n")
        for row in cov:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


if __name__ == "__main__":
    main()
