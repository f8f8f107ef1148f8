#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Write the canonical NIQE test images and their reference scores.

The reference scores come from pyiqa's NIQE implementation evaluated with the
pristine model shipped in data/niqe_pristine_model.txt, so the comparison
exercises the feature pipeline and not the model choice.
"""

import json
import pathlib

import numpy as np
import pyiqa
import skimage.data
import skimage.io
import torch
from pyiqa.archs.niqe_arch import calculate_niqe

ROOT = pathlib.Path(__file__).resolve().parents[1]
OUT = ROOT / "tests" / "data" / "canonical"


def load_model(path):
    lines = [l for l in path.read_text().splitlines() if l and not l.startswith("#")]
    i = lines.index("mean")
    mu = np.array(lines[i + 1].split(), dtype=np.float64)
    j = lines.index("covariance")
    cov = np.array([r.split() for r in lines[j + 1 : j + 37]], dtype=np.float64)
    return torch.from_numpy(mu), torch.from_numpy(cov)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    mu, cov = load_model(ROOT / "data" / "niqe_pristine_model.txt")
    images = {
        "camera.png": skimage.data.camera(),
        "astronaut.png": skimage.data.astronaut(),
        "coffee.png": skimage.data.coffee(),
    }
    ref = {"tool": f"pyiqa {pyiqa.__version__} calculate_niqe (yiq Y, rounded)", "scores": {}}
    for name, arr in images.items():
        skimage.io.imsave(OUT / name, arr, check_contrast=False)
        arr = skimage.io.imread(OUT / name)
        t = torch.from_numpy(arr.astype(np.float64) / 255.0)
        t = t[None, None] if t.ndim == 2 else t.permute(2, 0, 1)[None]
        score = calculate_niqe(t, mu_pris_param=mu, cov_pris_param=cov)
        ref["scores"][name] = float(score.reshape(-1)[0])
        print(name, ref["scores"][name])
    (OUT / "niqe_reference.json").write_text(json.dumps(ref, indent=2) + "\n")
    brisque_reference(images)


def brisque_reference(images):
    """Scores from the brisque 0.2.0 package (needs libsvm-official), whose
    bundled LIVE model is the one converted into data/."""
    try:
        from brisque import BRISQUE
    except ImportError as exc:
        print("skipping BRISQUE reference:", exc)
        return
    model = BRISQUE(url=False)
    ref = {"tool": "brisque 0.2.0 BRISQUE.score (RGB input)", "scores": {}}
    for name in images:
        arr = skimage.io.imread(OUT / name)
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        ref["scores"][name] = float(model.score(arr))
        print("brisque", name, ref["scores"][name])
    (OUT / "brisque_reference.json").write_text(json.dumps(ref, indent=2) + "\n")


if __name__ == "__main__":
    main()
