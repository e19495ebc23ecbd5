"""Annotation files and on-disk scene datasets.

Annotations follow the common detection-JSON convention: top-level
``images``, ``annotations`` (with ``bbox`` as ``[x, y, w, h]``), and
``categories`` lists. Scene images may carry an extra ``context_class``
string recording the background class that produced them.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .imageops import load_image
from .pairs import BoundingBox

__all__ = ["SceneDataset", "write_annotations", "load_annotations"]


def write_annotations(path, images: list[dict], annotations: list[dict], categories: list[dict]) -> None:
    doc = {"images": images, "annotations": annotations, "categories": categories}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_annotations(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("images", "annotations", "categories"):
        if key not in doc:
            raise ValueError(f"{path}: missing {key!r} list")
    return doc


class SceneDataset:
    """A directory holding ``annotations.json`` plus an ``images/`` tree."""

    def __init__(self, root):
        self.root = Path(root)
        doc = load_annotations(self.root / "annotations.json")
        self.images = {int(im["id"]): im for im in doc["images"]}
        self.categories = {int(c["id"]): c["name"] for c in doc["categories"]}
        self._boxes: dict[int, list[tuple[BoundingBox, int]]] = {i: [] for i in self.images}
        for ann in doc["annotations"]:
            x, y, w, h = ann["bbox"]
            box = BoundingBox(int(x), int(y), int(w), int(h))
            self._boxes[int(ann["image_id"])].append((box, int(ann["category_id"])))

    @property
    def image_ids(self) -> list[int]:
        return sorted(self.images)

    def image_path(self, image_id: int) -> Path:
        return self.root / self.images[image_id]["file_name"]

    def load_image(self, image_id: int) -> np.ndarray:
        return load_image(self.image_path(image_id))

    def boxes(self, image_id: int) -> list[tuple[BoundingBox, int]]:
        return list(self._boxes[image_id])

    def context_class(self, image_id: int) -> str | None:
        return self.images[image_id].get("context_class")

    def __len__(self) -> int:
        return len(self.images)
