"""Converts PaviaU.mat / PaviaU_gt.mat into TDF tensors plus a manifest.

    python tools/pavia_to_tdf.py PaviaU.mat PaviaU_gt.mat out/

Writes out/cube.tdf (height x width x bands), out/gt.tdf (height x width)
and out/manifest.json, ready for `cmp patches --manifest out/manifest.json
--preset pavia-man-made`.
"""
import argparse
import json
import pathlib
import struct
import zlib

import numpy as np
import scipy.io

CLASS_NAMES = {
    1: "asphalt",
    2: "meadows",
    3: "gravel",
    4: "trees",
    5: "painted metal sheets",
    6: "bare soil",
    7: "bitumen",
    8: "self-blocking bricks",
    9: "shadows",
}
MAN_MADE = [1, 5, 7, 8]


def write_tdf(path, array):
    array = np.ascontiguousarray(array, dtype="<f8")
    head = b"TDF1" + bytes([0, array.ndim, 0, 0])
    head += b"".join(struct.pack("<I", d) for d in array.shape)
    body = head + array.tobytes()
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def only_array(mat, path):
    arrays = [v for k, v in mat.items() if not k.startswith("__")]
    if len(arrays) != 1:
        raise SystemExit(f"{path}: expected exactly one variable, found {len(arrays)}")
    return arrays[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("cube")
    ap.add_argument("gt")
    ap.add_argument("out")
    args = ap.parse_args()

    cube = only_array(scipy.io.loadmat(args.cube), args.cube).astype(np.float64)
    gt = only_array(scipy.io.loadmat(args.gt), args.gt).astype(np.float64)
    if cube.ndim != 3 or gt.shape != cube.shape[:2]:
        raise SystemExit(f"shape mismatch: cube {cube.shape}, ground truth {gt.shape}")

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tdf(out / "cube.tdf", cube)
    write_tdf(out / "gt.tdf", gt)
    present = sorted(int(i) for i in np.unique(gt) if i != 0)
    manifest = {
        "cube": "cube.tdf",
        "ground_truth": "gt.tdf",
        "class_names": {str(i): CLASS_NAMES.get(i, f"class {i}") for i in present},
        "positive_ids": MAN_MADE,
        "binary_class_names": ["natural", "man-made"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"cube {cube.shape}, {len(present)} classes, {int((gt != 0).sum())} labeled pixels")


if __name__ == "__main__":
    main()
