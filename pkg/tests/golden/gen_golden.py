"""Regenerate the golden click-map fixture with a scalar reference path.

Run from the repository root:

    python3 tests/golden/gen_golden.py

Writes ``human_clicks.jsonl`` (3 subjects x 10 clicks for one
image-object pair) and ``human_map_golden.bin`` (the expected map as a
float32 blob). The pipeline here is written with explicit per-cell
loops and no imports from the package, so the test that compares the
library output against this fixture is a genuine cross-check; only the
Gaussian kernel construction mirrors the library's vectorized
expression, because kernel normalization must agree bit for bit for
the comparison to be meaningful.
"""

import json
import struct
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
IMAGE_W = IMAGE_H = 800
GRID = 32
CELL = IMAGE_W // GRID
KERNEL_SIZE = 11
SIGMA = 1.5
OUT_SIZE = 224
SEED = 20260814


def make_clicks():
    rng = np.random.default_rng(SEED)
    logs = []
    for subject in range(3):
        clicks = []
        seen = set()
        while len(clicks) < 10:
            x = int(rng.integers(0, IMAGE_W))
            y = int(rng.integers(0, IMAGE_H))
            if (x, y) in seen:
                continue
            seen.add((x, y))
            clicks.append({"x": x, "y": y, "t_ms": 500 * (len(clicks) + 1)})
        logs.append(
            {
                "image_id": 42,
                "target_class": "red-square",
                "subject_id": f"subj{subject}",
                "image_size": [IMAGE_W, IMAGE_H],
                "clicks": clicks,
            }
        )
    return logs


def kernel2d(size, sigma):
    # mirrors the library expression so normalization bits agree
    half = size // 2
    offs = np.arange(-half, half + 1, dtype=np.float64)
    dy = offs[:, None]
    dx = offs[None, :]
    k = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    return k / np.sum(k)


def reference_map(logs):
    grid = np.zeros((GRID, GRID), dtype=np.float64)
    for log in logs:
        for c in log["clicks"]:
            grid[c["y"] // CELL, c["x"] // CELL] += 1.0

    k = kernel2d(KERNEL_SIZE, SIGMA)
    half = KERNEL_SIZE // 2
    padded = np.zeros((GRID + 2 * half, GRID + 2 * half), dtype=np.float64)
    padded[half : half + GRID, half : half + GRID] = grid
    smoothed = np.zeros((GRID, GRID), dtype=np.float64)
    for y in range(GRID):
        for x in range(GRID):
            acc = np.float64(0.0)
            for ky in range(KERNEL_SIZE):
                for kx in range(KERNEL_SIZE):
                    acc = acc + k[ky, kx] * padded[y + ky, x + kx]
            smoothed[y, x] = acc

    sy = GRID / OUT_SIZE
    sx = GRID / OUT_SIZE
    resized = np.zeros((OUT_SIZE, OUT_SIZE), dtype=np.float64)
    for oy in range(OUT_SIZE):
        ys = (oy + 0.5) * sy - 0.5
        ys = min(max(ys, 0.0), GRID - 1)
        y0 = int(np.floor(ys))
        y1 = min(y0 + 1, GRID - 1)
        fy = ys - y0
        for ox in range(OUT_SIZE):
            xs = (ox + 0.5) * sx - 0.5
            xs = min(max(xs, 0.0), GRID - 1)
            x0 = int(np.floor(xs))
            x1 = min(x0 + 1, GRID - 1)
            fx = xs - x0
            top = (1 - fx) * smoothed[y0, x0] + fx * smoothed[y0, x1]
            bot = (1 - fx) * smoothed[y1, x0] + fx * smoothed[y1, x1]
            resized[oy, ox] = (1 - fy) * top + fy * bot

    lo = resized.min()
    hi = resized.max()
    out = np.zeros((OUT_SIZE, OUT_SIZE), dtype=np.float64)
    if hi != lo:
        for oy in range(OUT_SIZE):
            for ox in range(OUT_SIZE):
                out[oy, ox] = (resized[oy, ox] - lo) / (hi - lo)
    return out


def write_blob(path, arr32):
    dims = list(arr32.shape) + [0] * (4 - arr32.ndim)
    header = struct.pack("<4sI4H", b"SECO", arr32.ndim, *dims)
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr32.astype("<f4").tobytes(order="C"))


def main():
    logs = make_clicks()
    with open(HERE / "human_clicks.jsonl", "w", encoding="utf-8") as f:
        for log in logs:
            f.write(json.dumps(log, sort_keys=True) + "\n")
    ref = reference_map(logs)
    write_blob(HERE / "human_map_golden.bin", ref.astype(np.float32))
    print("wrote", HERE / "human_clicks.jsonl")
    print("wrote", HERE / "human_map_golden.bin")
    print("map stats: min=%.6f max=%.6f mean=%.6f" % (ref.min(), ref.max(), ref.mean()))


if __name__ == "__main__":
    main()
