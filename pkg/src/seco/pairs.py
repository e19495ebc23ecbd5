"""Region proposals and context-object pair construction.

A pair is one candidate object region together with the scene it came
from: the target view is the cropped region, the context view is the
full image with that region blacked out in raw pixel space. Pairs carry
no category labels; the training path never sees one.

Box semantics: ``(x, y, w, h)`` in integer pixels, covering the
half-open ranges ``[x, x + w)`` and ``[y, y + h)``. Overlap is measured
on pixel counts, e.g. 10x10 boxes at x=0 and x=5 intersect in 50 pixels
and their iou is 50/150.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BoundingBox",
    "ProposalConfig",
    "ContextObjectPair",
    "InvalidRoiError",
    "iou",
    "union_box",
    "propose_regions",
    "filter_regions",
    "merge_regions",
    "mine_regions",
    "make_pair",
    "write_pair_manifest",
    "read_pair_manifest",
]


class InvalidRoiError(ValueError):
    """Raised for degenerate boxes or boxes outside the image bounds."""


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Integer pixel box; ``w`` and ``h`` must be at least 1."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise InvalidRoiError(f"degenerate box {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        return self.w / self.h

    def within(self, image_w: int, image_h: int) -> bool:
        return (
            self.x >= 0
            and self.y >= 0
            and self.x + self.w <= image_w
            and self.y + self.h <= image_h
        )

    def clipped(self, image_w: int, image_h: int) -> "BoundingBox | None":
        """Intersection with the image rectangle, or None if empty."""
        x0 = max(self.x, 0)
        y0 = max(self.y, 0)
        x1 = min(self.x + self.w, image_w)
        y1 = min(self.y + self.h, image_h)
        if x1 - x0 < 1 or y1 - y0 < 1:
            return None
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union on pixel counts."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def union_box(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    """Smallest box covering both inputs."""
    x0 = min(a.x, b.x)
    y0 = min(a.y, b.y)
    x1 = max(a.x + a.w, b.x + b.w)
    y1 = max(a.y + a.h, b.y + b.h)
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


@dataclass
class ProposalConfig:
    """Knobs for region proposal, filtering, and merging.

    ``source`` selects the proposal mechanism: "SS" (bottom-up
    segmentation + hierarchical grouping), "GT" (annotation boxes), or
    "RG" (random boxes matched in count to what SS yields). Area and
    aspect bounds are inclusive on both ends.
    """

    source: str = "SS"
    min_area_ratio: float = 0.001
    max_area_ratio: float = 0.1
    min_aspect: float = 0.2
    max_aspect: float = 5.0
    merge_iou: float = 0.3
    ss_scale: float = 100.0
    ss_sigma: float = 0.8
    ss_min_size: int = 50
    ss_max_side: int = 256
    ss_use_texture: bool = False
    rg_count: int | None = None

    def validate(self) -> None:
        if self.source not in ("SS", "GT", "RG"):
            raise ValueError(f"unknown proposal source {self.source!r}")
        if not 0.0 <= self.min_area_ratio <= self.max_area_ratio <= 1.0:
            raise ValueError("area ratio bounds must satisfy 0 <= min <= max <= 1")
        if not 0.0 < self.min_aspect <= self.max_aspect:
            raise ValueError("aspect bounds must satisfy 0 < min <= max")
        if not 0.0 <= self.merge_iou <= 1.0:
            raise ValueError("merge_iou must lie in [0, 1]")


@dataclass
class ContextObjectPair:
    """One training example: target crop plus blacked-out context."""

    image_id: int
    roi: BoundingBox
    target: np.ndarray
    context: np.ndarray


def make_pair(image: np.ndarray, roi: BoundingBox, image_id: int) -> ContextObjectPair:
    """Crop the target and zero its region in a copy of the scene."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected HWC RGB image, got shape {image.shape}")
    h, w = image.shape[:2]
    if not roi.within(w, h):
        raise InvalidRoiError(f"roi {roi.as_tuple()} outside {w}x{h} image")
    target = image[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w].copy()
    context = image.copy()
    context[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w] = 0
    return ContextObjectPair(image_id=image_id, roi=roi, target=target, context=context)


def filter_regions(
    boxes: Sequence[BoundingBox], image_w: int, image_h: int, cfg: ProposalConfig
) -> list[BoundingBox]:
    """Drop boxes outside the image or the area/aspect bounds."""
    image_area = image_w * image_h
    kept = []
    for b in boxes:
        if not b.within(image_w, image_h):
            continue
        ratio = b.area / image_area
        if not cfg.min_area_ratio <= ratio <= cfg.max_area_ratio:
            continue
        if not cfg.min_aspect <= b.aspect <= cfg.max_aspect:
            continue
        kept.append(b)
    return kept


def merge_regions(boxes: Sequence[BoundingBox], merge_iou: float) -> list[BoundingBox]:
    """Agglomerate overlapping boxes until all pairwise ious <= threshold.

    Greedy: repeatedly replace the pair with the highest iou (ties break
    to the smaller combined area, then lexicographic box order) by its
    union box. Terminates because every merge reduces the box count.
    """
    current = list(boxes)
    while len(current) > 1:
        arr = np.array([b.as_tuple() for b in current], dtype=np.float64)
        x0, y0 = arr[:, 0], arr[:, 1]
        x1, y1 = arr[:, 0] + arr[:, 2], arr[:, 1] + arr[:, 3]
        areas = arr[:, 2] * arr[:, 3]
        iw = np.minimum(x1[:, None], x1[None, :]) - np.maximum(x0[:, None], x0[None, :])
        ih = np.minimum(y1[:, None], y1[None, :]) - np.maximum(y0[:, None], y0[None, :])
        inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
        mat = inter / (areas[:, None] + areas[None, :] - inter)
        np.fill_diagonal(mat, 0.0)

        top = float(mat.max())
        if top <= merge_iou:
            break
        best = None
        for i, j in np.argwhere(mat == top):
            if i >= j:
                continue
            a, b = current[i], current[j]
            if a.as_tuple() > b.as_tuple():
                a, b = b, a
            key = (a.area + b.area, a.as_tuple(), b.as_tuple())
            if best is None or key < best[0]:
                best = (key, int(i), int(j))
        _, i, j = best
        merged = union_box(current[i], current[j])
        current = [b for k, b in enumerate(current) if k not in (i, j)]
        current.append(merged)
    return current


def _random_boxes(
    image_w: int,
    image_h: int,
    count: int,
    cfg: ProposalConfig,
    rng: np.random.Generator,
) -> list[BoundingBox]:
    """Uniform boxes re-sampled until they satisfy the area/aspect
    filter and keep pairwise iou at or below the merge threshold."""
    image_area = image_w * image_h
    out: list[BoundingBox] = []
    attempts = 0
    max_attempts = 10000 * max(count, 1)
    while len(out) < count:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(
                f"could not place {count} random boxes in {image_w}x{image_h}"
            )
        ratio = rng.uniform(cfg.min_area_ratio, cfg.max_area_ratio)
        aspect = rng.uniform(cfg.min_aspect, cfg.max_aspect)
        area = ratio * image_area
        w = int(round(np.sqrt(area * aspect)))
        h = int(round(np.sqrt(area / aspect)))
        if w < 1 or h < 1 or w > image_w or h > image_h:
            continue
        box = BoundingBox(
            x=int(rng.integers(0, image_w - w + 1)),
            y=int(rng.integers(0, image_h - h + 1)),
            w=w,
            h=h,
        )
        if not filter_regions([box], image_w, image_h, cfg):
            continue
        if any(iou(box, other) > cfg.merge_iou for other in out):
            continue
        out.append(box)
    return out


def propose_regions(
    image: np.ndarray,
    cfg: ProposalConfig,
    rng: np.random.Generator,
    gt_boxes: Sequence[BoundingBox] | None = None,
) -> list[BoundingBox]:
    """Raw proposals for one image, before filtering and merging.

    "GT" requires ``gt_boxes``. "RG" draws ``cfg.rg_count`` random boxes,
    or, when that is unset, as many as the full SS pipeline produces on
    the same image so ablations compare equal pair budgets.
    """
    cfg.validate()
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected HWC RGB image, got shape {image.shape}")
    h, w = image.shape[:2]
    if cfg.source == "GT":
        if gt_boxes is None:
            raise ValueError("GT source requires annotation boxes")
        clipped = [b.clipped(w, h) for b in gt_boxes]
        return [b for b in clipped if b is not None]
    if cfg.source == "SS":
        from . import selective_search

        return selective_search.propose(
            image,
            scale=cfg.ss_scale,
            sigma=cfg.ss_sigma,
            min_size=cfg.ss_min_size,
            max_side=cfg.ss_max_side,
            use_texture=cfg.ss_use_texture,
        )
    count = cfg.rg_count
    if count is None:
        ss_cfg = replace(cfg, source="SS")
        count = len(mine_regions(image, ss_cfg, rng))
    return _random_boxes(w, h, count, cfg, rng)


def mine_regions(
    image: np.ndarray,
    cfg: ProposalConfig,
    rng: np.random.Generator,
    gt_boxes: Sequence[BoundingBox] | None = None,
) -> list[BoundingBox]:
    """Full pipeline: propose, filter, then merge."""
    proposals = propose_regions(image, cfg, rng, gt_boxes=gt_boxes)
    h, w = image.shape[:2]
    kept = filter_regions(proposals, w, h, cfg)
    return merge_regions(kept, cfg.merge_iou)


def write_pair_manifest(path, entries: Iterable[dict]) -> int:
    """Write one JSON object per line: image_id, roi, source."""
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            roi = e["roi"]
            if isinstance(roi, BoundingBox):
                roi = list(roi.as_tuple())
            rec = {"image_id": int(e["image_id"]), "roi": roi, "source": e["source"]}
            f.write(json.dumps(rec) + "\n")
            n += 1
    return n


def read_pair_manifest(path) -> list[dict]:
    """Read manifest lines back with roi as a BoundingBox."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        x, y, w, h = rec["roi"]
        out.append(
            {
                "image_id": int(rec["image_id"]),
                "roi": BoundingBox(int(x), int(y), int(w), int(h)),
                "source": rec["source"],
            }
        )
    return out
