"""Bottom-up region proposals: over-segmentation plus greedy grouping.

Single-strategy pipeline: one graph-based over-segmentation of the
(optionally downscaled) image, then hierarchical agglomeration of
adjacent segments ranked by color-histogram, size, and fill similarity
(texture optionally). Every intermediate bounding box is emitted, which
gives proposals at all scales of the merge tree.
"""

from __future__ import annotations

import numpy as np
from skimage.segmentation import felzenszwalb

from .imageops import bilinear_resize, rgb_to_hsv
from .pairs import BoundingBox, union_box

__all__ = ["propose"]

_COLOR_BINS = 25
_TEXTURE_BINS = 8


def _color_histograms(hsv: np.ndarray, labels: np.ndarray, n: int) -> np.ndarray:
    """Per-region L1-normalized HSV histograms, 25 bins per channel."""
    flat_labels = labels.ravel()
    hists = np.zeros((n, 3 * _COLOR_BINS), dtype=np.float64)
    for c in range(3):
        bins = np.clip(
            (hsv[..., c].ravel() * _COLOR_BINS).astype(np.int64), 0, _COLOR_BINS - 1
        )
        idx = flat_labels * (3 * _COLOR_BINS) + c * _COLOR_BINS + bins
        hists += np.bincount(idx, minlength=n * 3 * _COLOR_BINS).reshape(hists.shape)
    sums = hists.sum(axis=1, keepdims=True)
    return hists / np.maximum(sums, 1.0)


def _texture_histograms(img: np.ndarray, labels: np.ndarray, n: int) -> np.ndarray:
    """Per-region gradient-orientation histograms, 8 bins per channel."""
    flat_labels = labels.ravel()
    hists = np.zeros((n, 3 * _TEXTURE_BINS), dtype=np.float64)
    for c in range(3):
        gy, gx = np.gradient(img[..., c])
        mag = np.hypot(gx, gy).ravel()
        ori = np.arctan2(gy, gx).ravel()
        bins = np.clip(
            ((ori + np.pi) / (2 * np.pi) * _TEXTURE_BINS).astype(np.int64),
            0,
            _TEXTURE_BINS - 1,
        )
        idx = flat_labels * (3 * _TEXTURE_BINS) + c * _TEXTURE_BINS + bins
        hists += np.bincount(
            idx, weights=mag, minlength=n * 3 * _TEXTURE_BINS
        ).reshape(hists.shape)
    sums = hists.sum(axis=1, keepdims=True)
    return hists / np.maximum(sums, 1e-12)


def _region_boxes(labels: np.ndarray, n: int) -> list[BoundingBox]:
    boxes = []
    for r in range(n):
        ys, xs = np.nonzero(labels == r)
        boxes.append(
            BoundingBox(
                x=int(xs.min()),
                y=int(ys.min()),
                w=int(xs.max() - xs.min() + 1),
                h=int(ys.max() - ys.min() + 1),
            )
        )
    return boxes


def _adjacency(labels: np.ndarray) -> set[tuple[int, int]]:
    pairs = set()
    a, b = labels[:, :-1].ravel(), labels[:, 1:].ravel()
    diff = a != b
    pairs.update(zip(np.minimum(a, b)[diff].tolist(), np.maximum(a, b)[diff].tolist()))
    a, b = labels[:-1, :].ravel(), labels[1:, :].ravel()
    diff = a != b
    pairs.update(zip(np.minimum(a, b)[diff].tolist(), np.maximum(a, b)[diff].tolist()))
    return pairs


def propose(
    image: np.ndarray,
    scale: float = 100.0,
    sigma: float = 0.8,
    min_size: int = 50,
    max_side: int = 256,
    use_texture: bool = False,
) -> list[BoundingBox]:
    """Propose boxes for a uint8 HWC RGB image, in original coordinates.

    Segmentation runs on a copy downscaled so the longer side is at most
    ``max_side``; emitted boxes are mapped back and clipped. Returns the
    initial segment boxes plus one box per merge, deduplicated in
    emission order.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected HWC RGB image, got shape {image.shape}")
    orig_h, orig_w = image.shape[:2]
    img = image.astype(np.float32) / 255.0
    longer = max(orig_h, orig_w)
    if max_side and longer > max_side:
        small_h = max(1, int(round(orig_h * max_side / longer)))
        small_w = max(1, int(round(orig_w * max_side / longer)))
        img = np.clip(bilinear_resize(img, small_h, small_w), 0.0, 1.0)
    h, w = img.shape[:2]
    total_px = h * w

    labels = felzenszwalb(img, scale=scale, sigma=sigma, min_size=min_size)
    n = int(labels.max()) + 1

    sizes = np.bincount(labels.ravel(), minlength=n).astype(np.float64)
    color = _color_histograms(rgb_to_hsv(img), labels, n)
    texture = _texture_histograms(img, labels, n) if use_texture else None
    boxes = _region_boxes(labels, n)
    emitted = list(boxes)

    def similarity(a: int, b: int) -> float:
        s = float(np.minimum(color[a], color[b]).sum())
        s += 1.0 - (sizes[a] + sizes[b]) / total_px
        bb = union_box(boxes[a], boxes[b])
        s += 1.0 - (bb.area - sizes[a] - sizes[b]) / total_px
        if texture is not None:
            s += float(np.minimum(texture[a], texture[b]).sum())
        return s

    sims = {pair: similarity(*pair) for pair in _adjacency(labels)}
    neighbors: dict[int, set[int]] = {r: set() for r in range(n)}
    for a, b in sims:
        neighbors[a].add(b)
        neighbors[b].add(a)

    # grow arrays as merges create regions; at most n - 1 merges
    sizes = np.concatenate([sizes, np.zeros(n - 1)])
    color = np.concatenate([color, np.zeros((n - 1, color.shape[1]))])
    if texture is not None:
        texture = np.concatenate([texture, np.zeros((n - 1, texture.shape[1]))])
    next_id = n

    while sims:
        (a, b) = max(sims, key=lambda p: (sims[p], -p[0], -p[1]))
        t = next_id
        next_id += 1
        sa, sb = sizes[a], sizes[b]
        sizes[t] = sa + sb
        color[t] = (color[a] * sa + color[b] * sb) / (sa + sb)
        if texture is not None:
            texture[t] = (texture[a] * sa + texture[b] * sb) / (sa + sb)
        merged_box = union_box(boxes[a], boxes[b])
        boxes.append(merged_box)
        emitted.append(merged_box)

        nbrs = (neighbors[a] | neighbors[b]) - {a, b}
        for r in (a, b):
            for other in neighbors[r]:
                sims.pop((min(r, other), max(r, other)), None)
                neighbors[other].discard(r)
            neighbors[r] = set()
        neighbors[t] = nbrs
        for other in nbrs:
            neighbors[other].add(t)
            sims[(other, t)] = similarity(other, t)

    if max_side and longer > max_side:
        fy = orig_h / h
        fx = orig_w / w
        mapped = []
        for bx in emitted:
            x0 = int(round(bx.x * fx))
            y0 = int(round(bx.y * fy))
            x1 = int(round((bx.x + bx.w) * fx))
            y1 = int(round((bx.y + bx.h) * fy))
            x0, y0 = max(0, x0), max(0, y0)
            x1, y1 = min(orig_w, x1), min(orig_h, y1)
            if x1 - x0 >= 1 and y1 - y0 >= 1:
                mapped.append(BoundingBox(x0, y0, x1 - x0, y1 - y0))
        emitted = mapped

    seen = set()
    unique = []
    for bx in emitted:
        key = bx.as_tuple()
        if key not in seen:
            seen.add(key)
            unique.append(bx)
    return unique
