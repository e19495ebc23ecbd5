"""Procedural scenes with controlled object-context co-occurrence.

A scene is a full-canvas background drawn from a named context style
plus a few glyph objects placed without overlap. Which object classes
appear is governed by a per-context categorical distribution, so the
mutual information between context and object identity is a config
choice, not an accident of rendering. Ground-truth boxes and the
context class are written as detection-style annotations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .datasets import write_annotations
from .imageops import bilinear_resize, hsv_to_rgb, save_image
from .pairs import BoundingBox, iou

__all__ = [
    "CoocConfig",
    "SceneRecord",
    "PlacementError",
    "CONTEXT_STYLES",
    "OBJECT_CLASSES",
    "generate_scene",
    "generate_dataset",
    "bayes_optimal_accuracy",
    "deterministic_cooc",
    "disjoint_pairs_cooc",
    "uniform_cooc",
]


class PlacementError(RuntimeError):
    """Raised when even the minimum object count cannot be placed."""


# ---------------------------------------------------------------- contexts

def _smooth_field(h: int, w: int, rng: np.random.Generator, cells: int = 6) -> np.ndarray:
    coarse = rng.uniform(0.0, 1.0, size=(cells, cells))
    return np.asarray(bilinear_resize(coarse, h, w), dtype=np.float64)


def _palette(hue: float, hue_span: float):
    def render(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
        hsv = np.empty((h, w, 3), dtype=np.float64)
        hsv[..., 0] = (hue + hue_span * (_smooth_field(h, w, rng) - 0.5)) % 1.0
        hsv[..., 1] = 0.35 + 0.25 * _smooth_field(h, w, rng)
        hsv[..., 2] = 0.45 + 0.35 * _smooth_field(h, w, rng)
        return hsv_to_rgb(hsv)

    return render


def _grating(angle_deg: float, period: float = 16.0):
    theta = np.deg2rad(angle_deg)

    def render(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = np.sin(2.0 * np.pi * (xs * np.cos(theta) + ys * np.sin(theta)) / period + phase)
        g = 0.5 + 0.18 * wave
        return np.repeat(g[..., None], 3, axis=-1)

    return render


def _checker(cell: int = 28):
    def render(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
        oy = int(rng.integers(0, cell))
        ox = int(rng.integers(0, cell))
        ys, xs = np.mgrid[0:h, 0:w]
        parity = (((ys + oy) // cell) + ((xs + ox) // cell)) % 2
        g = np.where(parity == 0, 0.42, 0.62)
        return np.repeat(g[..., None], 3, axis=-1)

    return render


def _dots(spacing: int = 24, radius: float = 5.0):
    def render(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
        oy = int(rng.integers(0, spacing))
        ox = int(rng.integers(0, spacing))
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        dy = np.minimum((ys + oy) % spacing, spacing - (ys + oy) % spacing)
        dx = np.minimum((xs + ox) % spacing, spacing - (xs + ox) % spacing)
        inside = (dy * dy + dx * dx) <= radius * radius
        g = np.where(inside, 0.38, 0.58)
        return np.repeat(g[..., None], 3, axis=-1)

    return render


def _split(top: str, bottom: str):
    """Two palettes stacked vertically.

    Styles that differ only in stacking order share all first-order
    color statistics, so telling them apart requires spatial layout,
    not just a color histogram.
    """

    def render(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
        cut = h // 2
        out = np.empty((h, w, 3), dtype=np.float64)
        out[:cut] = CONTEXT_STYLES[top](cut, w, rng)
        out[cut:] = CONTEXT_STYLES[bottom](h - cut, w, rng)
        return out

    return render


def _ticks(angle_deg: float, density: float = 1.6e-2, length: int = 9,
           contrast: float = 0.45, noise: float = 0.08):
    """Noisy gray field carrying small oriented tick marks.

    The marks are the only class signal; everything else is luminance
    nuisance. Orientation cannot be read off global color statistics,
    so telling these styles apart requires features tuned to the marks
    themselves. The marks are one pixel wide on purpose: a segmenter
    with a modest pre-smoothing blur washes them out and still sees a
    flat field, while at full resolution they are abundant enough to
    carry the class everywhere in the image.
    """
    theta = np.deg2rad(angle_deg)
    dy, dx = np.sin(theta), np.cos(theta)

    def render(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
        # iid noise only: unpredictable pixel to pixel, yet it averages
        # away under a segmenter's pre-blur, so the field contributes no
        # object-scale segments of its own
        g = np.full((h, w), 0.48, dtype=np.float64)
        g += rng.normal(0.0, noise, size=(h, w))
        n_marks = max(1, int(round(density * h * w)))
        half = length / 2.0
        pad = int(np.ceil(half)) + 1
        for _ in range(n_marks):
            cy = rng.uniform(pad, h - 1 - pad)
            cx = rng.uniform(pad, w - 1 - pad)
            for t in np.linspace(-half, half, 2 * length):
                y = int(round(cy + t * dy))
                x = int(round(cx + t * dx))
                g[y, x] = max(0.0, g[y, x] - contrast)
        g = np.clip(g, 0.0, 1.0)
        return np.repeat(g[..., None], 3, axis=-1)

    return render


CONTEXT_STYLES = {
    "warm": _palette(0.05, 0.08),
    "cool": _palette(0.58, 0.08),
    "moss": _palette(0.30, 0.08),
    "plum": _palette(0.80, 0.08),
    "grain0": _grating(0.0),
    "grain45": _grating(45.0),
    "grain90": _grating(90.0),
    "grain135": _grating(135.0),
    "checker": _checker(),
    "dots": _dots(),
}
CONTEXT_STYLES.update(
    {
        "warm-over-cool": _split("warm", "cool"),
        "cool-over-warm": _split("cool", "warm"),
        "moss-over-plum": _split("moss", "plum"),
        "plum-over-moss": _split("plum", "moss"),
        "tick0": _ticks(0.0),
        "tick45": _ticks(45.0),
        "tick90": _ticks(90.0),
        "tick135": _ticks(135.0),
    }
)


# ----------------------------------------------------------------- objects

# both hues keep a wide RGB distance from the mid-gray tick field so a
# blurred segmenter still separates small glyphs from the background
_HUES = {"red": (0.85, 0.16, 0.16), "blue": (0.15, 0.65, 1.0)}
_SHAPES = ("square", "circle", "triangle", "cross")
OBJECT_CLASSES = tuple(f"{hue}-{shape}" for shape in _SHAPES for hue in _HUES)


def _shape_mask(shape: str, h: int, w: int) -> np.ndarray:
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    if shape == "square":
        return np.ones((h, w), dtype=bool)
    if shape == "circle":
        return ((ys - cy) / (h / 2.0)) ** 2 + ((xs - cx) / (w / 2.0)) ** 2 <= 1.0
    if shape == "triangle":
        t = ys / max(h - 1, 1)
        half = (w / 2.0) * t
        return np.abs(xs - cx) <= half
    if shape == "cross":
        bar_h = max(1, h // 3)
        bar_w = max(1, w // 3)
        horiz = np.abs(ys - cy) <= bar_h / 2.0
        vert = np.abs(xs - cx) <= bar_w / 2.0
        return horiz | vert
    raise ValueError(f"unknown shape {shape!r}")


def draw_glyph(label: str, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Binary mask and RGB color for one object label at a given size."""
    hue, shape = label.split("-", 1)
    return _shape_mask(shape, h, w), np.asarray(_HUES[hue], dtype=np.float64)


# ------------------------------------------------------------------ config

@dataclass
class CoocConfig:
    """Scene statistics: contexts, objects, and their coupling.

    ``cooc`` rows are per-context object distributions and must each sum
    to one; ``context_prior`` weights context choice per scene.
    """

    context_classes: tuple[str, ...] = ("warm", "cool", "moss", "plum")
    object_classes: tuple[str, ...] = OBJECT_CLASSES
    cooc: list[list[float]] = field(default_factory=list)
    context_prior: list[float] = field(default_factory=list)
    objects_per_scene: tuple[int, int] = (3, 6)
    object_size: tuple[int, int] = (24, 56)
    canvas: int = 224
    margin: int = 4

    def __post_init__(self):
        if not self.cooc:
            self.cooc = uniform_cooc(len(self.context_classes), len(self.object_classes))
        if not self.context_prior:
            n = len(self.context_classes)
            self.context_prior = [1.0 / n] * n

    def validate(self) -> None:
        for name in self.context_classes:
            if name not in CONTEXT_STYLES:
                raise ValueError(
                    f"unknown context style {name!r}; choose from {sorted(CONTEXT_STYLES)}"
                )
        mat = np.asarray(self.cooc, dtype=np.float64)
        if mat.shape != (len(self.context_classes), len(self.object_classes)):
            raise ValueError(
                f"cooc must be {len(self.context_classes)}x{len(self.object_classes)}, "
                f"got {mat.shape}"
            )
        if np.any(mat < 0) or not np.allclose(mat.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("cooc rows must be non-negative and sum to 1")
        prior = np.asarray(self.context_prior, dtype=np.float64)
        if prior.shape != (len(self.context_classes),) or np.any(prior < 0):
            raise ValueError("context_prior must be a non-negative vector per context")
        if not np.isclose(prior.sum(), 1.0, atol=1e-9):
            raise ValueError("context_prior must sum to 1")
        lo, hi = self.objects_per_scene
        if not 1 <= lo <= hi:
            raise ValueError("objects_per_scene must satisfy 1 <= min <= max")
        slo, shi = self.object_size
        if not 4 <= slo <= shi <= self.canvas:
            raise ValueError("object_size must satisfy 4 <= min <= max <= canvas")


def uniform_cooc(n_ctx: int, n_obj: int) -> list[list[float]]:
    return [[1.0 / n_obj] * n_obj for _ in range(n_ctx)]


def deterministic_cooc(n_ctx: int, n_obj: int) -> list[list[float]]:
    """Each context deterministically produces one object class."""
    rows = []
    for c in range(n_ctx):
        row = [0.0] * n_obj
        row[c % n_obj] = 1.0
        rows.append(row)
    return rows


def disjoint_pairs_cooc(n_ctx: int, n_obj: int) -> list[list[float]]:
    """Each context draws uniformly from its own pair of object classes."""
    if n_obj < 2 * n_ctx:
        raise ValueError(f"need at least {2 * n_ctx} object classes, got {n_obj}")
    rows = []
    for c in range(n_ctx):
        row = [0.0] * n_obj
        row[2 * c] = 0.5
        row[2 * c + 1] = 0.5
        rows.append(row)
    return rows


# --------------------------------------------------------------- rendering

@dataclass
class SceneRecord:
    image: np.ndarray
    context_class: str
    boxes: list[tuple[BoundingBox, int]]


def generate_scene(cfg: CoocConfig, rng: np.random.Generator) -> SceneRecord:
    """Render one scene; category ids are 1-based into object_classes.

    Placement rejection-samples non-overlapping boxes (with a margin).
    After 200 consecutive rejections the scene keeps what it has if the
    minimum count is met, otherwise placement fails hard.
    """
    cfg.validate()
    size = cfg.canvas
    ctx_idx = int(rng.choice(len(cfg.context_classes), p=np.asarray(cfg.context_prior)))
    ctx_name = cfg.context_classes[ctx_idx]
    canvas = np.clip(CONTEXT_STYLES[ctx_name](size, size, rng), 0.0, 1.0)

    lo, hi = cfg.objects_per_scene
    want = int(rng.integers(lo, hi + 1))
    probs = np.asarray(cfg.cooc[ctx_idx], dtype=np.float64)
    placed: list[tuple[BoundingBox, int]] = []
    rejections = 0
    while len(placed) < want:
        if rejections >= 200:
            if len(placed) >= lo:
                break
            raise PlacementError(
                f"placed {len(placed)} < {lo} objects on {size}px canvas"
            )
        w = int(rng.integers(cfg.object_size[0], cfg.object_size[1] + 1))
        h = int(rng.integers(cfg.object_size[0], cfg.object_size[1] + 1))
        box = BoundingBox(
            x=int(rng.integers(0, size - w + 1)),
            y=int(rng.integers(0, size - h + 1)),
            w=w,
            h=h,
        )
        grown = BoundingBox(
            max(0, box.x - cfg.margin),
            max(0, box.y - cfg.margin),
            box.w + 2 * cfg.margin,
            box.h + 2 * cfg.margin,
        )
        if any(iou(grown, other) > 0.0 for other, _ in placed):
            rejections += 1
            continue
        rejections = 0
        cls_idx = int(rng.choice(len(cfg.object_classes), p=probs))
        placed.append((box, cls_idx + 1))

    for box, cat_id in placed:
        mask, color = draw_glyph(cfg.object_classes[cat_id - 1], box.h, box.w)
        region = canvas[box.y : box.y + box.h, box.x : box.x + box.w]
        region[mask] = color

    image = np.clip(np.round(canvas * 255.0), 0, 255).astype(np.uint8)
    return SceneRecord(image=image, context_class=ctx_name, boxes=placed)


def _write_split(cfg: CoocConfig, count: int, start_id: int, out_dir: Path, seed_tag: tuple) -> None:
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    images, annotations = [], []
    ann_id = 1
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(seed_tag + (i,)))
        scene = generate_scene(cfg, rng)
        image_id = start_id + i
        fname = f"images/{image_id:08d}.png"
        save_image(out_dir / fname, scene.image)
        images.append(
            {
                "id": image_id,
                "file_name": fname,
                "width": cfg.canvas,
                "height": cfg.canvas,
                "context_class": scene.context_class,
            }
        )
        for box, cat_id in scene.boxes:
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": cat_id,
                    "bbox": list(box.as_tuple()),
                    "area": box.area,
                    "iscrowd": 0,
                }
            )
            ann_id += 1
    categories = [
        {"id": i + 1, "name": name} for i, name in enumerate(cfg.object_classes)
    ]
    write_annotations(out_dir / "annotations.json", images, annotations, categories)


def generate_dataset(
    cfg: CoocConfig,
    n_train: int,
    n_test: int,
    out_dir,
    seed: int = 0,
    overwrite: bool = False,
) -> Path:
    """Write train/ and test/ splits plus a root manifest; returns root.

    Image ids are globally unique across splits. Each scene derives its
    own generator from (seed, split, index), so regeneration with the
    same config is bit-identical regardless of chunking.
    """
    cfg.validate()
    root = Path(out_dir)
    manifest_path = root / "manifest.json"
    if manifest_path.exists() and not overwrite:
        raise FileExistsError(f"{manifest_path} exists; pass overwrite to replace")
    _write_split(cfg, n_train, 1, root / "train", (seed, 0))
    _write_split(cfg, n_test, n_train + 1, root / "test", (seed, 1))
    digest = {}
    for split in ("train", "test"):
        data = (root / split / "annotations.json").read_bytes()
        digest[split] = hashlib.sha256(data).hexdigest()
    manifest = {
        "config": asdict(cfg),
        "seed": seed,
        "splits": {"train": n_train, "test": n_test},
        "annotation_sha256": digest,
    }
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return root


def bayes_optimal_accuracy(cfg: CoocConfig) -> float:
    """Top-1 accuracy of always guessing each context's likeliest object."""
    cfg.validate()
    prior = np.asarray(cfg.context_prior, dtype=np.float64)
    mat = np.asarray(cfg.cooc, dtype=np.float64)
    return float(np.sum(prior * mat.max(axis=1)))
