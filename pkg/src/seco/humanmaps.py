"""Click logs and their conversion to smoothed ground-truth maps.

Subjects click where they expect a hidden object; clicks for one
image-object pair (pooled over subjects) are binned on a coarse grid,
smoothed with a small Gaussian, resized to the evaluation resolution,
and min-max normalized. Everything runs in float64 so the same log
always produces the identical map, byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imageops import (
    bilinear_resize,
    convolve2d_zero,
    gaussian_kernel2d,
    min_max_normalize,
)

__all__ = [
    "ClickLog",
    "HumanMapConfig",
    "validate_clicks",
    "clicks_to_map",
    "human_agreement",
    "read_click_logs",
    "write_click_logs",
]

REQUIRED_CLICKS = 10


@dataclass
class ClickLog:
    """All clicks from one subject for one image-object pair."""

    image_id: int
    target_class: str
    subject_id: str
    clicks: list[tuple[int, int, int]]
    image_size: tuple[int, int] = (800, 800)

    def to_json(self) -> str:
        rec = {
            "image_id": self.image_id,
            "target_class": self.target_class,
            "subject_id": self.subject_id,
            "image_size": list(self.image_size),
            "clicks": [{"x": x, "y": y, "t_ms": t} for x, y, t in self.clicks],
        }
        return json.dumps(rec, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ClickLog":
        rec = json.loads(line)
        return cls(
            image_id=int(rec["image_id"]),
            target_class=str(rec["target_class"]),
            subject_id=str(rec["subject_id"]),
            clicks=[(int(c["x"]), int(c["y"]), int(c["t_ms"])) for c in rec["clicks"]],
            image_size=tuple(rec.get("image_size", (800, 800))),
        )


@dataclass
class HumanMapConfig:
    """Binning and smoothing parameters for click maps."""

    grid: int = 32
    kernel_size: int = 11
    sigma: float = 1.5
    output_size: int = 224
    image_size: tuple[int, int] = (800, 800)

    def validate(self) -> None:
        w, h = self.image_size
        if self.grid < 1 or w % self.grid or h % self.grid:
            raise ValueError(
                f"grid {self.grid} must divide the image size {self.image_size}"
            )
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.output_size < 1:
            raise ValueError("output_size must be positive")


def validate_clicks(log: ClickLog, required: int = REQUIRED_CLICKS) -> list[str]:
    """Violation messages; an empty list means the log is acceptable.

    Checks click count, in-bounds coordinates, and pairwise-distinct
    positions.
    """
    problems = []
    if len(log.clicks) != required:
        problems.append(f"expected {required} clicks, got {len(log.clicks)}")
    w, h = log.image_size
    seen = set()
    for i, (x, y, _) in enumerate(log.clicks):
        if not (0 <= x < w and 0 <= y < h):
            problems.append(f"click {i} at ({x}, {y}) outside {w}x{h}")
        if (x, y) in seen:
            problems.append(f"click {i} at ({x}, {y}) duplicates an earlier click")
        seen.add((x, y))
    return problems


def clicks_to_map(logs: list[ClickLog], cfg: HumanMapConfig) -> np.ndarray:
    """Pool logs for one pair into a normalized float64 map.

    Pipeline: bin clicks on a ``grid x grid`` lattice of equal cells,
    zero-padded Gaussian smoothing, bilinear resize to ``output_size``,
    min-max normalize.
    """
    cfg.validate()
    if not logs:
        raise ValueError("no click logs given")
    keys = {(l.image_id, l.target_class) for l in logs}
    if len(keys) > 1:
        raise ValueError(f"logs mix image-object pairs: {sorted(keys)}")
    w, h = cfg.image_size
    cell_w = w // cfg.grid
    cell_h = h // cfg.grid
    grid = np.zeros((cfg.grid, cfg.grid), dtype=np.float64)
    for log in logs:
        if tuple(log.image_size) != (w, h):
            raise ValueError(
                f"log image size {log.image_size} does not match config {cfg.image_size}"
            )
        for i, (x, y, _) in enumerate(log.clicks):
            if not (0 <= x < w and 0 <= y < h):
                raise ValueError(f"click {i} at ({x}, {y}) outside {w}x{h}")
            grid[y // cell_h, x // cell_w] += 1.0
    smoothed = convolve2d_zero(grid, gaussian_kernel2d(cfg.kernel_size, cfg.sigma))
    resized = np.asarray(
        bilinear_resize(smoothed, cfg.output_size, cfg.output_size), dtype=np.float64
    )
    return min_max_normalize(resized)


def human_agreement(maps: list[np.ndarray]) -> float:
    """Mean pairwise root mean squared difference across subject maps."""
    if len(maps) < 2:
        raise ValueError(f"need at least 2 maps, got {len(maps)}")
    total = 0.0
    pairs = 0
    for i in range(len(maps)):
        for j in range(i + 1, len(maps)):
            a = np.asarray(maps[i], dtype=np.float64)
            b = np.asarray(maps[j], dtype=np.float64)
            if a.shape != b.shape:
                raise ValueError(f"map shape mismatch: {a.shape} vs {b.shape}")
            total += float(np.sqrt(np.mean((a - b) ** 2)))
            pairs += 1
    return total / pairs


def read_click_logs(path) -> list[ClickLog]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(ClickLog.from_json(line))
    return out


def write_click_logs(path, logs: list[ClickLog]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for log in logs:
            f.write(log.to_json() + "\n")
