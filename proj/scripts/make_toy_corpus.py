#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Build the 50-image toy corpus, its annotations in all four source formats,
the toy pipeline config and the expected funnel counts.

Every expected count follows from how the corpus is constructed: sharp images
are kept well above the blur threshold and blurred ones well below it (checked
with an independent Laplacian-variance computation on the decoded files), box
sizes sit far from the size gate, and overlapping boxes are either near
duplicates or disjoint. The script also writes a 10-image pristine corpus for
NIQE fitting tests.
"""

import json
import math
import pathlib

import numpy as np
import skimage.data
import skimage.transform
from PIL import Image, ImageFilter

ROOT = pathlib.Path(__file__).resolve().parents[1]
TOY = ROOT / "tests" / "data" / "toy"
PRISTINE = ROOT / "tests" / "data" / "pristine"

BLUR_THRESHOLD = 100.0
SHARP_MIN = 250.0
BLURRED_MAX = 40.0
MIN_SIDE = 200
IOU_THRESHOLD = 0.45
W_LAND, H_LAND = 480, 360


def source_images():
    import matplotlib.cbook
    from sklearn.datasets import load_sample_images

    out = {}
    for name in ["astronaut", "coffee", "chelsea", "rocket", "motorcycle_left", "motorcycle_right",
                 "hubble_deep_field", "retina", "immunohistochemistry", "camera", "brick", "grass",
                 "gravel", "moon", "coins", "clock", "cell", "page", "text"]:
        try:
            out[name] = getattr(skimage.data, name)()
        except Exception:
            pass
    for i, img in enumerate(load_sample_images().images):
        out[f"sklearn_{i}"] = img
    with matplotlib.cbook.get_sample_data("grace_hopper.jpg") as f:
        out["grace_hopper"] = np.asarray(Image.open(f).convert("RGB"))
    rgb = {}
    for k, v in out.items():
        v = np.asarray(v)
        if v.ndim == 2:
            v = np.stack([v] * 3, axis=-1)
        if v.shape[-1] == 4:
            v = v[..., :3]
        if v.dtype != np.uint8:
            v = (255 * (v.astype(np.float64) / max(1, v.max()))).astype(np.uint8)
        if min(v.shape[:2]) >= 300:
            rgb[k] = v
    return rgb


def luma(rgb):
    rgb = rgb.astype(np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def laplacian_variance(gray):
    p = np.pad(gray, 1, mode="edge")
    lap = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * p[1:-1, 1:-1]
    return float(lap.var())


def squarify(box, W, H):
    x, y, w, h = box
    x0, y0 = math.floor(x + 1e-9), math.floor(y + 1e-9)
    x1, y1 = math.ceil(x + w - 1e-9), math.ceil(y + h - 1e-9)
    side = min(max(x1 - x0, y1 - y0), min(W, H))

    def place(lo, hi, limit):
        ext = hi - lo
        start = lo - (side - ext) // 2 if ext <= side else lo
        return min(max(start, 0), limit - side)

    return place(x0, x1, W), place(y0, y1, H), side


def iou(a, b):
    ax, ay, s = a
    bx, by, t = b
    ix = max(0, min(ax + s, bx + t) - max(ax, bx))
    iy = max(0, min(ay + s, by + t) - max(ay, by))
    inter = ix * iy
    return inter / (s * s + t * t - inter) if inter else 0.0


def window(src, rng, portrait):
    H, W = src.shape[:2]
    aspect = 3 / 4 if portrait else 4 / 3
    for _ in range(100):
        h = int(rng.uniform(0.75, 1.0) * H)
        w = int(h * aspect)
        if w > W:
            w = int(rng.uniform(0.75, 1.0) * W)
            h = int(w / aspect)
        if h > H or w > W:
            continue
        y = int(rng.integers(0, H - h + 1))
        x = int(rng.integers(0, W - w + 1))
        crop = src[y:y + h, x:x + w]
        size = (H_LAND, W_LAND) if not portrait else (W_LAND, H_LAND)
        res = skimage.transform.resize(crop, size, anti_aliasing=True, preserve_range=True)
        return np.clip(np.round(res), 0, 255).astype(np.uint8)
    raise RuntimeError("no window")


def save_jpeg(arr, path, blur_sigma=0.0):
    img = Image.fromarray(arr)
    if blur_sigma > 0:
        img = img.filter(ImageFilter.GaussianBlur(blur_sigma))
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, quality=95)
    decoded = np.asarray(Image.open(path).convert("RGB"))
    return laplacian_variance(luma(decoded))


def boxes_for(pattern, W, H, rng):
    """Pixel boxes (x, y, w, h) for a layout pattern."""
    def big(cx=None):
        w = int(rng.integers(220, min(W, H) - 20))
        h = int(rng.integers(220, min(W, H) - 10))
        x = int(rng.integers(0, W - w)) if cx is None else cx
        y = int(rng.integers(0, H - h))
        return (x, y, w, h)

    def small():
        w, h = int(rng.integers(50, 110)), int(rng.integers(80, 150))
        return (int(rng.integers(0, W - w)), int(rng.integers(0, H - h)), w, h)

    if pattern == "one_big":
        return [big()]
    if pattern == "big_small":
        return [big(), small()]
    if pattern == "overlap":
        a = big()
        dx, dy = int(rng.integers(-15, 16)), int(rng.integers(-10, 11))
        b = (min(max(a[0] + dx, 0), W - a[2]), min(max(a[1] + dy, 0), H - a[3]), a[2], a[3])
        return [a, b]
    if pattern == "separate":
        h1, h2 = int(rng.integers(220, H - 10)), int(rng.integers(220, H - 10))
        w1, w2 = int(rng.integers(120, 200)), int(rng.integers(120, 200))
        return [(5 + int(rng.integers(0, 5)), int(rng.integers(0, H - h1)), w1, h1),
                (W - w2 - 5 - int(rng.integers(0, 5)), int(rng.integers(0, H - h2)), w2, h2)]
    if pattern == "small_only":
        return [small()]
    raise ValueError(pattern)


def expected_statuses(boxes, W, H, passed):
    squares = [squarify(b, W, H) for b in boxes]
    status = ["failed_blur_gate" if not passed else None for _ in boxes]
    if passed:
        for i, s in enumerate(squares):
            if s[2] < MIN_SIDE:
                status[i] = "failed_size_gate"
        cand = [i for i in range(len(boxes)) if status[i] is None]
        cx, cy = W / 2, H / 2
        cand.sort(key=lambda i: (math.hypot(squares[i][0] + squares[i][2] / 2 - cx,
                                            squares[i][1] + squares[i][2] / 2 - cy), squares[i][0], squares[i][1]))
        kept = []
        for i in cand:
            overlaps = [iou(squares[i], squares[k]) for k in kept]
            # Layouts are built so that overlaps are far from the threshold.
            if not all(o < 0.2 or o > 0.7 for o in overlaps):
                raise ValueError("ambiguous overlap")
            if any(o > IOU_THRESHOLD for o in overlaps):
                status[i] = "suppressed_nms"
            else:
                status[i] = "scored"
                kept.append(i)
    return squares, status


def main():
    rng = np.random.default_rng(20250101)
    sources = source_images()
    names = sorted(sources)
    print(f"{len(names)} source images")

    # (source file kind, count, per-image specs)
    plan = []
    kinds = [("coco", 20), ("oid", 12), ("odgt", 10), ("det", 8)]
    patterns = ["one_big", "big_small", "overlap", "separate", "small_only"]
    idx = 0
    for kind, n in kinds:
        for k in range(n):
            spec = {"kind": kind, "index": k}
            if k == 0:
                spec["unlabeled"] = True  # no person box survives the parser
                spec["pattern"] = "one_big"
            else:
                spec["pattern"] = patterns[idx % len(patterns)]
            spec["blurred"] = (k in (1, 6)) and not spec.get("unlabeled")
            spec["portrait"] = (idx % 4 == 3) and spec["pattern"] != "separate"
            plan.append(spec)
            idx += 1

    images = []
    src_cursor = 0
    for spec in plan:
        for attempt in range(200):
            name = names[src_cursor % len(names)]
            src_cursor += 1
            arr = window(sources[name], rng, spec["portrait"])
            H, W = arr.shape[:2]
            base = f"{spec['kind']}_{spec['index']:02d}"
            path = TOY / "images" / spec["kind"] / f"{base}.jpg"
            lv = save_jpeg(arr, path, blur_sigma=4.0 if spec["blurred"] else 0.0)
            if spec["blurred"] and lv <= BLURRED_MAX:
                break
            if not spec["blurred"] and lv >= SHARP_MIN:
                break
        else:
            raise RuntimeError(f"could not satisfy blur margin for {spec}")
        passed = lv >= BLUR_THRESHOLD
        for _ in range(1000):
            boxes = boxes_for(spec["pattern"], W, H, rng)
            try:
                squares, status = expected_statuses(boxes, W, H, True)
            except ValueError:
                continue
            break
        else:
            raise RuntimeError(f"no unambiguous layout for {spec}")
        if not passed:
            squares, status = expected_statuses(boxes, W, H, False)
        images.append({**spec, "file": str(path.relative_to(TOY)), "source": name, "width": W, "height": H,
                       "laplacian_variance": lv, "boxes": boxes, "squares": squares, "statuses": status})

    write_annotations(images, rng)
    write_expected(images)
    write_config()
    write_pristine(sources, names)


def write_annotations(images, rng):
    ann = TOY / "annotations"
    ann.mkdir(parents=True, exist_ok=True)

    coco = {"images": [], "annotations": [], "categories": [{"id": 1, "name": "person"}, {"id": 18, "name": "dog"}]}
    aid = 1
    for im in [i for i in images if i["kind"] == "coco"]:
        iid = 1000 + im["index"]
        coco["images"].append({"id": iid, "file_name": pathlib.Path(im["file"]).name,
                               "width": im["width"], "height": im["height"]})
        cat = 18 if im.get("unlabeled") else 1
        for b in im["boxes"]:
            coco["annotations"].append({"id": aid, "image_id": iid, "category_id": cat, "bbox": list(b),
                                        "area": b[2] * b[3], "iscrowd": 0})
            aid += 1
        if not im.get("unlabeled"):
            coco["annotations"].append({"id": aid, "image_id": iid, "category_id": 18,
                                        "bbox": [10, 10, 40, 30], "area": 1200, "iscrowd": 0})
            aid += 1
        im["image_id"] = f"coco:{iid}"
    (ann / "coco.json").write_text(json.dumps(coco, indent=1) + "\n")

    rows = ["ImageID,Source,LabelName,Confidence,XMin,XMax,YMin,YMax"]
    for im in [i for i in images if i["kind"] == "oid"]:
        stem = pathlib.Path(im["file"]).stem
        W, H = im["width"], im["height"]
        for j, (x, y, w, h) in enumerate(im["boxes"]):
            label = "/m/0bt9lr" if im.get("unlabeled") else ("/m/01g317" if j % 2 == 0 else "Human body")
            rows.append(f"{stem},xclick,{label},1,{x / W!r},{(x + w) / W!r},{y / H!r},{(y + h) / H!r}")
        im["image_id"] = f"oid:{stem}"
    (ann / "oid.csv").write_text("\n".join(rows) + "\n")

    lines = []
    for im in [i for i in images if i["kind"] == "odgt"]:
        stem = pathlib.Path(im["file"]).stem
        tag = "mask" if im.get("unlabeled") else "person"
        gt = [{"tag": tag, "fbox": list(b), "extra": {"box_id": j}} for j, b in enumerate(im["boxes"])]
        if not im.get("unlabeled"):
            gt.append({"tag": "person", "fbox": [0, 0, 300, 300], "extra": {"ignore": 1}})
        lines.append(json.dumps({"ID": stem, "gtboxes": gt}))
        im["image_id"] = f"odgt:{stem}"
    (ann / "crowdhuman.odgt").write_text("\n".join(lines) + "\n")

    lines = []
    for im in [i for i in images if i["kind"] == "det"]:
        name = pathlib.Path(im["file"]).name
        conf = 0.3 if im.get("unlabeled") else 0.9
        boxes = [{"x1": x, "y1": y, "x2": x + w, "y2": y + h, "conf": conf, "cls": 0} for x, y, w, h in im["boxes"]]
        if not im.get("unlabeled"):
            boxes.append({"x1": 5, "y1": 5, "x2": 300, "y2": 300, "conf": 0.2, "cls": 0})
        lines.append(json.dumps({"image": name, "width": im["width"], "height": im["height"], "boxes": boxes}))
        im["image_id"] = f"det:{name}"
    (ann / "detections.jsonl").write_text("\n".join(lines) + "\n")


def write_expected(images):
    labeled = [i for i in images if not i.get("unlabeled")]
    passed = [i for i in labeled if i["laplacian_variance"] >= BLUR_THRESHOLD]
    st = [s for i in labeled for s in i["statuses"]]
    scored = st.count("scored")
    funnel = {
        "collected": len(images),
        "person_labeled": len(labeled),
        "passed_blur_gate": len(passed),
        "boxes_total": sum(len(i["boxes"]) for i in passed),
        "boxes_after_size_gate": sum(s in ("scored", "suppressed_nms") for s in st),
        "crops_after_nms": scored,
        "scored": scored,
        "top_fraction": scored // 3,
        "selected": scored // 3,
        "reasons": {
            "failed_blur_gate": st.count("failed_blur_gate"),
            "failed_size_gate": st.count("failed_size_gate"),
            "suppressed_nms": st.count("suppressed_nms"),
            "below_top_fraction": scored - scored // 3,
        },
    }
    per_image = []
    for i in images:
        per_image.append({
            "image_id": i["image_id"], "file": i["file"], "source": i["source"], "unlabeled": bool(i.get("unlabeled")),
            "blurred": i["blurred"], "pattern": i["pattern"], "width": i["width"], "height": i["height"],
            "laplacian_variance": i["laplacian_variance"], "boxes": i["boxes"],
            "squares": i["squares"], "statuses": i["statuses"] if not i.get("unlabeled") else [],
        })
    out = {"blur_threshold": BLUR_THRESHOLD, "min_side": MIN_SIDE, "iou_threshold": IOU_THRESHOLD,
           "funnel": funnel, "images": per_image}
    (TOY / "expected_funnel.json").write_text(json.dumps(out, indent=1) + "\n")
    print(json.dumps(funnel, indent=1))


def write_config():
    cfg = {
        "schema_version": 1,
        "sources": [
            {"name": "coco", "origin": "coco", "annotations": "annotations/coco.json", "images": "images/coco"},
            {"name": "oid", "origin": "oid", "annotations": "annotations/oid.csv", "images": "images/oid"},
            {"name": "odgt", "origin": "crowdhuman", "annotations": "annotations/crowdhuman.odgt",
             "images": "images/odgt"},
            {"name": "det", "origin": "detection_import", "annotations": "annotations/detections.jsonl",
             "images": "images/det"},
        ],
        "blur_variance_threshold": BLUR_THRESHOLD,
        "blur_scope": "image",
        "min_side": MIN_SIDE,
        "iou_threshold": IOU_THRESHOLD,
        "output_side": 512,
        "metrics": [{"name": "niqe", "direction": "lower_better", "source": "in_core"}],
        "fraction": 1 / 3,
        "workers": 1,
        "shard_size": 10,
        "checkpoint_dir": "../../../build/toy_run/checkpoints",
        "output_dir": "../../../build/toy_run/out",
    }
    (TOY / "toy_config.json").write_text(json.dumps(cfg, indent=2) + "\n")


def write_pristine(sources, names):
    PRISTINE.mkdir(parents=True, exist_ok=True)
    picked = 0
    for name in names:
        src = sources[name]
        H, W = src.shape[:2]
        if min(H, W) < 288:
            continue
        y, x = (H - 288) // 2, (W - 288) // 2
        crop = src[y:y + 288, x:x + 288]
        if laplacian_variance(luma(crop)) < SHARP_MIN:
            continue
        Image.fromarray(crop).save(PRISTINE / f"{name}.png")
        picked += 1
        if picked == 10:
            break
    assert picked == 10, picked


if __name__ == "__main__":
    main()
