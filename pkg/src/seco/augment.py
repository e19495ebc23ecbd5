"""View construction: photometric jitter, context-aware crops, resizing.

The target view is the object crop resized to a small square; the
context view is a window of the blacked-out scene that always contains
the region of interest, resized to the full input size with the mapped
region re-zeroed after interpolation (so the blackout survives
resampling fringe). Both views share one horizontal-flip coin by
default so their geometry stays consistent.

All photometric work happens on float arrays in [0, 1]; per-channel
normalization is the last step of each path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imageops import bilinear_resize, gaussian_blur, hsv_to_rgb, resize_source_centers, rgb_to_hsv
from .pairs import BoundingBox, ContextObjectPair

__all__ = [
    "AugmentConfig",
    "photometric",
    "context_aware_crop",
    "map_box_to_resized",
    "augment_pair",
    "context_view",
    "target_view",
]

_GRAY = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass
class AugmentConfig:
    """Augmentation strengths and view geometry.

    Jitter strengths follow the usual convention: a strength ``s`` draws
    a factor uniformly from ``[max(0, 1 - s), 1 + s]`` (hue draws a
    shift from ``[-s, s]``). Zero strength skips the op entirely, so an
    all-zero config is the identity up to resizing and normalization.
    """

    context_size: int = 224
    target_size: int = 96
    brightness: float = 0.4
    contrast: float = 0.4
    saturation: float = 0.4
    hue: float = 0.1
    grayscale_prob: float = 0.2
    blur_prob: float = 0.5
    blur_sigma: tuple[float, float] = (0.1, 2.0)
    flip_prob: float = 0.5
    shared_flip: bool = True
    crop_scale: tuple[float, float] = (0.5, 1.0)
    crop_attempts: int = 10
    norm_mean: tuple[float, float, float] = (0.5, 0.5, 0.5)
    norm_std: tuple[float, float, float] = (0.5, 0.5, 0.5)

    def validate(self) -> None:
        if self.context_size < 1 or self.target_size < 1:
            raise ValueError("view sizes must be positive")
        for name in ("brightness", "contrast", "saturation"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} strength must be >= 0")
        if not 0.0 <= self.hue <= 0.5:
            raise ValueError("hue strength must lie in [0, 0.5]")
        for name in ("grayscale_prob", "blur_prob", "flip_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        lo, hi = self.crop_scale
        if not 0.0 < lo <= hi <= 1.0:
            raise ValueError("crop_scale must satisfy 0 < lo <= hi <= 1")
        if any(s <= 0 for s in self.norm_std):
            raise ValueError("norm_std entries must be positive")


def _grayscale(img: np.ndarray) -> np.ndarray:
    return img @ _GRAY.astype(img.dtype)


def photometric(img: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    """Apply color jitter, random grayscale, and random blur.

    Input and output are float HWC in [0, 1]; each op re-clips so the
    bound holds throughout. Draw order is fixed: brightness, contrast,
    saturation, hue, grayscale coin, blur coin (+ sigma).
    """
    out = img
    if cfg.brightness > 0:
        f = rng.uniform(max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness)
        out = np.clip(out * f, 0.0, 1.0)
    if cfg.contrast > 0:
        f = rng.uniform(max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast)
        out = np.clip(f * out + (1.0 - f) * _grayscale(out).mean(), 0.0, 1.0)
    if cfg.saturation > 0:
        f = rng.uniform(max(0.0, 1.0 - cfg.saturation), 1.0 + cfg.saturation)
        out = np.clip(f * out + (1.0 - f) * _grayscale(out)[..., None], 0.0, 1.0)
    if cfg.hue > 0:
        shift = rng.uniform(-cfg.hue, cfg.hue)
        hsv = rgb_to_hsv(np.clip(out, 0.0, 1.0))
        hsv[..., 0] = (hsv[..., 0] + shift) % 1.0
        out = np.clip(hsv_to_rgb(hsv), 0.0, 1.0).astype(img.dtype)
    if cfg.grayscale_prob > 0 and rng.random() < cfg.grayscale_prob:
        out = np.repeat(_grayscale(out)[..., None], 3, axis=-1).astype(img.dtype)
    if cfg.blur_prob > 0 and rng.random() < cfg.blur_prob:
        sigma = rng.uniform(*cfg.blur_sigma)
        out = np.clip(gaussian_blur(out.astype(np.float32), sigma), 0.0, 1.0)
    return out


def context_aware_crop(
    image: np.ndarray,
    roi: BoundingBox,
    rng: np.random.Generator,
    cfg: AugmentConfig,
) -> tuple[np.ndarray, BoundingBox]:
    """Crop a random window that fully contains the region of interest.

    The window's area fraction is drawn uniformly from ``crop_scale``
    and its sides keep the image's aspect. After ``crop_attempts``
    failed draws (window too small for the roi, or no valid placement)
    the whole image is used. Returns the crop and the roi in crop
    coordinates.
    """
    h, w = image.shape[:2]
    for _ in range(cfg.crop_attempts):
        frac = np.sqrt(rng.uniform(*cfg.crop_scale))
        cw = min(w, max(1, int(round(w * frac))))
        ch = min(h, max(1, int(round(h * frac))))
        if cw < roi.w or ch < roi.h:
            continue
        x_lo = max(0, roi.x + roi.w - cw)
        x_hi = min(roi.x, w - cw)
        y_lo = max(0, roi.y + roi.h - ch)
        y_hi = min(roi.y, h - ch)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        cx = int(rng.integers(x_lo, x_hi + 1))
        cy = int(rng.integers(y_lo, y_hi + 1))
        crop = image[cy : cy + ch, cx : cx + cw]
        return crop, BoundingBox(roi.x - cx, roi.y - cy, roi.w, roi.h)
    return image, roi


def map_box_to_resized(
    box: BoundingBox, in_h: int, in_w: int, out_h: int, out_w: int
) -> tuple[np.ndarray, np.ndarray]:
    """Output-pixel index masks whose resample centers fall inside a box.

    A destination pixel belongs to the box when its source-coordinate
    center lies within the box's pixel span ``[x, x + w - 1]``. Returns
    (row indices, column indices).
    """
    cy = resize_source_centers(in_h, out_h)
    cx = resize_source_centers(in_w, out_w)
    rows = np.nonzero((cy >= box.y) & (cy <= box.y + box.h - 1))[0]
    cols = np.nonzero((cx >= box.x) & (cx <= box.x + box.w - 1))[0]
    return rows, cols


def _normalize(img: np.ndarray, cfg: AugmentConfig) -> np.ndarray:
    mean = np.asarray(cfg.norm_mean, dtype=np.float32)
    std = np.asarray(cfg.norm_std, dtype=np.float32)
    return ((img - mean) / std).astype(np.float32)


def _context_path(
    context: np.ndarray,
    roi: BoundingBox,
    cfg: AugmentConfig,
    rng: np.random.Generator | None,
    flip: bool,
) -> np.ndarray:
    img = context.astype(np.float32) / 255.0
    h, w = img.shape[:2]
    if flip:
        img = img[:, ::-1]
        roi = BoundingBox(w - roi.x - roi.w, roi.y, roi.w, roi.h)
    if rng is not None:
        img, roi = context_aware_crop(img, roi, rng, cfg)
        img = photometric(img, rng, cfg)
    ch, cw = img.shape[:2]
    size = cfg.context_size
    out = bilinear_resize(img, size, size)
    rows, cols = map_box_to_resized(roi, ch, cw, size, size)
    if rows.size and cols.size:
        out[rows[:, None], cols[None, :]] = 0.0
    return _normalize(out, cfg)


def _target_path(
    target: np.ndarray,
    cfg: AugmentConfig,
    rng: np.random.Generator | None,
    flip: bool,
) -> np.ndarray:
    img = target.astype(np.float32) / 255.0
    if flip:
        img = img[:, ::-1]
    if rng is not None:
        img = photometric(img, rng, cfg)
    out = bilinear_resize(img, cfg.target_size, cfg.target_size)
    return _normalize(out, cfg)


def augment_pair(
    pair: ContextObjectPair, rng: np.random.Generator, cfg: AugmentConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Stochastic training views: (target, context), float32 HWC.

    Flip handling draws one coin when ``shared_flip`` is set and applies
    it to both paths; otherwise each path flips independently.
    """
    cfg.validate()
    flip_t = flip_c = cfg.flip_prob > 0 and rng.random() < cfg.flip_prob
    if not cfg.shared_flip:
        flip_c = cfg.flip_prob > 0 and rng.random() < cfg.flip_prob
    tgt = _target_path(pair.target, cfg, rng, flip_t)
    ctx = _context_path(pair.context, pair.roi, cfg, rng, flip_c)
    return tgt, ctx


def context_view(image: np.ndarray, roi: BoundingBox, cfg: AugmentConfig) -> np.ndarray:
    """Deterministic evaluation-time context view.

    Blacks out the region, resizes the full scene, re-zeroes the mapped
    region, and normalizes. No crops, jitter, or flips.
    """
    h, w = image.shape[:2]
    if not roi.within(w, h):
        raise ValueError(f"roi {roi.as_tuple()} outside {w}x{h} image")
    blacked = image.copy()
    blacked[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w] = 0
    return _context_path(blacked, roi, cfg, rng=None, flip=False)


def target_view(image: np.ndarray, roi: BoundingBox, cfg: AugmentConfig) -> np.ndarray:
    """Deterministic evaluation-time target view of one region."""
    h, w = image.shape[:2]
    if not roi.within(w, h):
        raise ValueError(f"roi {roi.as_tuple()} outside {w}x{h} image")
    crop = image[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w]
    return _target_path(crop, cfg, rng=None, flip=False)
