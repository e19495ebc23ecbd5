"""Resampling, smoothing, and normalization against scalar references."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seco.imageops import (
    bilinear_resize,
    convolve2d_zero,
    gaussian_blur,
    gaussian_kernel1d,
    gaussian_kernel2d,
    hsv_to_rgb,
    min_max_normalize,
    rgb_to_hsv,
)


def scalar_bilinear(img, out_h, out_w):
    in_h, in_w = img.shape[:2]
    sy = in_h / out_h
    sx = in_w / out_w
    out = np.zeros((out_h, out_w) + img.shape[2:], dtype=np.float64)
    for oy in range(out_h):
        ys = min(max((oy + 0.5) * sy - 0.5, 0.0), in_h - 1)
        y0 = int(np.floor(ys))
        y1 = min(y0 + 1, in_h - 1)
        fy = ys - y0
        for ox in range(out_w):
            xs = min(max((ox + 0.5) * sx - 0.5, 0.0), in_w - 1)
            x0 = int(np.floor(xs))
            x1 = min(x0 + 1, in_w - 1)
            fx = xs - x0
            top = (1 - fx) * img[y0, x0] + fx * img[y0, x1]
            bot = (1 - fx) * img[y1, x0] + fx * img[y1, x1]
            out[oy, ox] = (1 - fy) * top + fy * bot
    return out


def test_bilinear_matches_scalar_reference():
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, size=(13, 9)).astype(np.float64)
    got = bilinear_resize(img, 29, 17)
    want = scalar_bilinear(img, 29, 17)
    np.testing.assert_array_equal(got, want)


def test_bilinear_matches_scalar_reference_rgb():
    rng = np.random.default_rng(1)
    img = rng.uniform(0, 1, size=(8, 11, 3)).astype(np.float64)
    got = bilinear_resize(img, 21, 5)
    want = scalar_bilinear(img, 21, 5)
    np.testing.assert_array_equal(got, want)


def test_bilinear_identity_when_size_unchanged():
    rng = np.random.default_rng(2)
    img = rng.uniform(0, 1, size=(7, 7)).astype(np.float64)
    np.testing.assert_allclose(bilinear_resize(img, 7, 7), img, atol=1e-12)


def test_bilinear_constant_image_stays_constant():
    img = np.full((5, 9, 3), 0.37, dtype=np.float32)
    out = bilinear_resize(img, 31, 13)
    np.testing.assert_allclose(out, 0.37, rtol=1e-6)


def test_bilinear_preserves_value_bounds():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 1, size=(16, 16)).astype(np.float64)
    out = bilinear_resize(img, 50, 3)
    assert out.min() >= img.min() - 1e-12
    assert out.max() <= img.max() + 1e-12


def test_bilinear_rejects_bad_shapes():
    with pytest.raises(ValueError):
        bilinear_resize(np.zeros((4,)), 2, 2)
    with pytest.raises(ValueError):
        bilinear_resize(np.zeros((4, 4)), 0, 2)


def test_convolve_matches_scalar_reference():
    rng = np.random.default_rng(4)
    grid = rng.uniform(0, 5, size=(12, 10))
    kernel = rng.uniform(0, 1, size=(5, 3))
    got = convolve2d_zero(grid, kernel)
    gh, gw = grid.shape
    kh, kw = kernel.shape
    py, px = kh // 2, kw // 2
    padded = np.zeros((gh + 2 * py, gw + 2 * px))
    padded[py : py + gh, px : px + gw] = grid
    want = np.zeros_like(grid)
    for y in range(gh):
        for x in range(gw):
            acc = 0.0
            for ky in range(kh):
                for kx in range(kw):
                    acc += kernel[ky, kx] * padded[y + ky, x + kx]
            want[y, x] = acc
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_convolve_identity_kernel():
    rng = np.random.default_rng(5)
    grid = rng.uniform(size=(6, 7))
    kernel = np.zeros((3, 3))
    kernel[1, 1] = 1.0
    np.testing.assert_array_equal(convolve2d_zero(grid, kernel), grid)


def test_convolve_rejects_even_kernels():
    with pytest.raises(ValueError):
        convolve2d_zero(np.zeros((4, 4)), np.zeros((2, 3)))


def test_gaussian_kernel_normalized_and_symmetric():
    k = gaussian_kernel2d(11, 1.5)
    assert k.shape == (11, 11)
    assert abs(k.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(k, k[::-1, :], atol=0)
    np.testing.assert_allclose(k, k[:, ::-1], atol=0)
    np.testing.assert_allclose(k, k.T, atol=0)
    assert k[5, 5] == k.max()


def test_gaussian_kernel_matches_closed_form():
    sigma = 1.5
    k = gaussian_kernel2d(11, sigma)
    raw = np.empty((11, 11))
    for y in range(11):
        for x in range(11):
            raw[y, x] = np.exp(-((x - 5) ** 2 + (y - 5) ** 2) / (2 * sigma**2))
    np.testing.assert_allclose(k, raw / raw.sum(), rtol=1e-12)


def test_gaussian_kernel_rejects_bad_args():
    with pytest.raises(ValueError):
        gaussian_kernel2d(10, 1.5)
    with pytest.raises(ValueError):
        gaussian_kernel2d(11, 0.0)
    with pytest.raises(ValueError):
        gaussian_kernel1d(4, 1.0)


def test_gaussian_blur_preserves_mass_on_interior():
    # away from edges, replicate padding does not matter and mass is conserved
    img = np.zeros((41, 41), dtype=np.float64)
    img[20, 20] = 1.0
    out = gaussian_blur(img, 2.0)
    assert abs(out.sum() - 1.0) < 1e-9


def test_gaussian_blur_constant_invariant():
    img = np.full((15, 18, 3), 0.6, dtype=np.float64)
    np.testing.assert_allclose(gaussian_blur(img, 1.3), img, atol=1e-12)


def test_min_max_normalize_range_and_constant_convention():
    rng = np.random.default_rng(6)
    a = rng.uniform(-3, 7, size=(9, 9))
    out = min_max_normalize(a)
    assert out.min() == 0.0
    assert out.max() == 1.0
    np.testing.assert_array_equal(min_max_normalize(np.full((4, 4), 2.5)), np.zeros((4, 4)))


@given(
    st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=2, max_size=40)
)
def test_min_max_normalize_bounds_property(values):
    a = np.asarray(values, dtype=np.float64)
    out = min_max_normalize(a)
    assert np.all(out >= 0.0) and np.all(out <= 1.0)


@settings(max_examples=50)
@given(st.integers(0, 10_000))
def test_hsv_round_trip(seed):
    rng = np.random.default_rng(seed)
    rgb = rng.uniform(0, 1, size=(4, 5, 3))
    back = hsv_to_rgb(rgb_to_hsv(rgb))
    np.testing.assert_allclose(back, rgb, atol=1e-9)


def test_hsv_known_values():
    # pure red, green, blue, and a gray
    rgb = np.array([[[1, 0, 0], [0, 1, 0], [0, 0, 1], [0.5, 0.5, 0.5]]], dtype=np.float64)
    hsv = rgb_to_hsv(rgb)
    np.testing.assert_allclose(hsv[0, 0], [0.0, 1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(hsv[0, 1], [1 / 3, 1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(hsv[0, 2], [2 / 3, 1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(hsv[0, 3], [0.0, 0.0, 0.5], atol=1e-12)
