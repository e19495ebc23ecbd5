"""Shared array-image plumbing: resizing, smoothing, color, file IO.

Everything here operates on numpy arrays in HWC layout (or HW for
single-channel maps). Resampling uses the half-pixel-center convention
throughout so that results agree between training-time augmentation,
map rendering, and the evaluation pipelines.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

__all__ = [
    "bilinear_resize",
    "convolve2d_zero",
    "gaussian_kernel1d",
    "gaussian_kernel2d",
    "gaussian_blur",
    "min_max_normalize",
    "rgb_to_hsv",
    "hsv_to_rgb",
    "load_image",
    "save_image",
    "save_heatmap_png",
]


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize HW or HWC array with bilinear interpolation.

    Source coordinates follow the half-pixel convention
    ``src = (dst + 0.5) * (in / out) - 0.5`` with edge clamping, i.e. no
    corner alignment. Output dtype is float64 for float64 input and
    float32 otherwise.
    """
    if image.ndim not in (2, 3):
        raise ValueError(f"expected HW or HWC array, got shape {image.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"invalid output size {(out_h, out_w)}")
    in_h, in_w = image.shape[:2]
    dtype = np.float64 if image.dtype == np.float64 else np.float32
    img = image.astype(dtype, copy=False)

    sy = in_h / out_h
    sx = in_w / out_w
    ys = (np.arange(out_h, dtype=dtype) + dtype(0.5)) * dtype(sy) - dtype(0.5)
    xs = (np.arange(out_w, dtype=dtype) + dtype(0.5)) * dtype(sx) - dtype(0.5)
    ys = np.clip(ys, 0, in_h - 1)
    xs = np.clip(xs, 0, in_w - 1)

    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0).astype(dtype)
    fx = (xs - x0).astype(dtype)

    if image.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
        v00 = img[y0[:, None], x0[None, :]]
        v01 = img[y0[:, None], x1[None, :]]
        v10 = img[y1[:, None], x0[None, :]]
        v11 = img[y1[:, None], x1[None, :]]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
        v00 = img[y0[:, None], x0[None, :]]
        v01 = img[y0[:, None], x1[None, :]]
        v10 = img[y1[:, None], x0[None, :]]
        v11 = img[y1[:, None], x1[None, :]]

    top = (1 - fx) * v00 + fx * v01
    bot = (1 - fx) * v10 + fx * v11
    return (1 - fy) * top + fy * bot


def resize_source_centers(in_size: int, out_size: int) -> np.ndarray:
    """Source-coordinate centers sampled by :func:`bilinear_resize`."""
    scale = in_size / out_size
    return (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5


def convolve2d_zero(grid: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size 2D cross-correlation with zero padding.

    Accumulation runs kernel-tap by kernel-tap in row-major order; for a
    fixed kernel the result is therefore bit-reproducible across runs
    and platforms that share IEEE-754 arithmetic.
    """
    if grid.ndim != 2 or kernel.ndim != 2:
        raise ValueError("grid and kernel must be 2D")
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel sides must be odd, got {kernel.shape}")
    gh, gw = grid.shape
    py, px = kh // 2, kw // 2
    padded = np.zeros((gh + 2 * py, gw + 2 * px), dtype=np.float64)
    padded[py : py + gh, px : px + gw] = grid
    out = np.zeros((gh, gw), dtype=np.float64)
    for ky in range(kh):
        for kx in range(kw):
            out += kernel[ky, kx] * padded[ky : ky + gh, kx : kx + gw]
    return out


def gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian taps at integer offsets from the center."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = size // 2
    offs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(offs**2) / (2.0 * sigma * sigma))
    return k / np.sum(k)


def gaussian_kernel2d(size: int, sigma: float) -> np.ndarray:
    """Normalized 2D isotropic Gaussian kernel."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = size // 2
    offs = np.arange(-half, half + 1, dtype=np.float64)
    dy = offs[:, None]
    dx = offs[None, :]
    k = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    return k / np.sum(k)


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge-replicate padding.

    Kernel radius is ``ceil(3 * sigma)``, matching the usual 99.7%% mass
    cutoff. Works on HW or HWC float arrays.
    """
    if sigma <= 0:
        return image.copy()
    radius = int(np.ceil(3.0 * sigma))
    k = gaussian_kernel1d(2 * radius + 1, sigma).astype(image.dtype)
    squeeze = image.ndim == 2
    img = image[..., None] if squeeze else image

    pad_y = np.pad(img, ((radius, radius), (0, 0), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for i, w in enumerate(k):
        out += w * pad_y[i : i + img.shape[0]]
    pad_x = np.pad(out, ((0, 0), (radius, radius), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for i, w in enumerate(k):
        out += w * pad_x[:, i : i + img.shape[1]]
    return out[..., 0] if squeeze else out


def min_max_normalize(a: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a constant array maps to all zeros."""
    lo = np.min(a)
    hi = np.max(a)
    if hi == lo:
        return np.zeros_like(a, dtype=np.float64)
    return (a.astype(np.float64) - lo) / (hi - lo)


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB [0,1] HWC to HSV [0,1] conversion."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.max(rgb, axis=-1)
    minc = np.min(rgb, axis=-1)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.maximum(maxc, 1e-12), 0.0)

    with np.errstate(invalid="ignore", divide="ignore"):
        dsafe = np.where(delta > 0, delta, 1.0)
        rc = (maxc - r) / dsafe
        gc = (maxc - g) / dsafe
        bc = (maxc - b) / dsafe
    h = np.zeros_like(maxc)
    h = np.where(maxc == r, bc - gc, h)
    h = np.where(maxc == g, 2.0 + rc - bc, h)
    h = np.where(maxc == b, 4.0 + gc - rc, h)
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Vectorized HSV [0,1] HWC to RGB [0,1] conversion."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6

    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    r = np.choose(i, choices_r)
    g = np.choose(i, choices_g)
    b = np.choose(i, choices_b)
    return np.stack([r, g, b], axis=-1)


def load_image(path) -> np.ndarray:
    """Load an image file as uint8 HWC RGB."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(path, image: np.ndarray) -> None:
    """Save a uint8 HWC RGB (or HW grayscale) array as PNG."""
    if image.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {image.dtype}")
    Image.fromarray(image).save(path)


def save_heatmap_png(path, map01: np.ndarray) -> None:
    """Render a [0,1] scalar map through the viridis colormap to PNG."""
    from matplotlib import colormaps

    rgba = colormaps["viridis"](np.clip(map01, 0.0, 1.0))
    save_image(path, (rgba[..., :3] * 255.0).round().astype(np.uint8))
