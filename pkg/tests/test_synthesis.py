import cv2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blursynth.blurkernel import delta_kernel, gaussian_kernel, linear_motion_kernel, realize_kernel, rotate_kernel
from blursynth.blurkernel import BlurSpec
from blursynth.errors import DegenerateMaskError, UninpaintableError
from blursynth.synthesis import (
    boundary_band_gradient,
    composite,
    convolve,
    inpaint,
    synthesize_halo_free,
    synthesize_naive,
)


def reflect101(i, n):
    while i < 0 or i >= n:
        i = -i if i < 0 else 2 * (n - 1) - i
    return i


def correlate_oracle(img, K):
    h, w, nc = img.shape
    r = K.shape[0] // 2
    out = np.zeros_like(img)
    for c in range(nc):
        for y in range(h):
            for x in range(w):
                acc = 0.0
                for a in range(-r, r + 1):
                    for b in range(-r, r + 1):
                        acc += K[a + r, b + r] * img[reflect101(y + a, h), reflect101(x + b, w), c]
                out[y, x, c] = acc
    return np.clip(out, 0, 1)


def disk_mask(shape, center, radius):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    return (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius ** 2


def test_ramp_with_line_kernel_matches_oracle():
    img = np.tile(np.linspace(0, 1, 5), (5, 1))[:, :, None]
    K = linear_motion_kernel(3)
    np.testing.assert_allclose(convolve(img, K), correlate_oracle(img, K), rtol=0, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(3, 12), st.integers(3, 12), st.sampled_from([1, 3, 5, 7]))
def test_convolution_matches_oracle(seed, h, w, k):
    rng = np.random.default_rng(seed)
    if k >= 2 * min(h, w):
        return
    img = rng.random((h, w, 1))
    K = rng.random((k, k))
    K /= K.sum()
    np.testing.assert_allclose(convolve(img, K), correlate_oracle(img, K), rtol=0, atol=1e-9)


def test_fft_path_matches_oracle(rng):
    img = rng.random((24, 26, 1))
    K = rotate_kernel(linear_motion_kernel(17), 20)  # non-separable, 289 taps
    np.testing.assert_allclose(convolve(img, K), correlate_oracle(img, K), rtol=0, atol=1e-9)


def test_delta_is_bit_exact(rng):
    img = rng.random((9, 11, 3))
    np.testing.assert_array_equal(convolve(img, delta_kernel(1)), img)
    np.testing.assert_array_equal(convolve(img, delta_kernel(5)), img)


@pytest.mark.parametrize("K", [gaussian_kernel(2.0), rotate_kernel(linear_motion_kernel(9), 30),
                               rotate_kernel(linear_motion_kernel(21), 70)])
def test_constant_preserved(K):
    img = np.full((40, 44, 3), 0.37)
    np.testing.assert_allclose(convolve(img, K), 0.37, rtol=0, atol=1e-12)


def test_interior_mean_preserved(rng):
    # a periodic image has exactly the same mean over any full period window
    img = np.tile(rng.random((8, 8, 1)), (8, 8, 1))
    for K in (gaussian_kernel(1.3), rotate_kernel(linear_motion_kernel(7), 40)):
        r = K.shape[0] // 2
        assert r <= 8
        out = convolve(img, K)
        window = (slice(16, 48), slice(16, 48))
        assert abs(out[window].mean() - img[window].mean()) <= 1e-6


def test_kernel_too_large():
    with pytest.raises(ValueError):
        convolve(np.zeros((4, 10, 1)), gaussian_kernel(2.0))  # 13 >= 2 * 4


def test_composite_identities(rng):
    a, b = rng.random((6, 7, 3)), rng.random((6, 7, 3))
    np.testing.assert_array_equal(composite(a, b, np.zeros((6, 7), bool)), a)
    np.testing.assert_array_equal(composite(a, b, np.ones((6, 7), bool)), b)


def test_composite_checkerboard(rng):
    a, b = rng.random((6, 7, 3)), rng.random((6, 7, 3))
    mask = (np.add.outer(np.arange(6), np.arange(7)) % 2).astype(bool)
    out = composite(a, b, mask)
    for i in range(6):
        for j in range(7):
            np.testing.assert_array_equal(out[i, j], b[i, j] if mask[i, j] else a[i, j])
    with pytest.raises(ValueError):
        composite(a, b, np.zeros((5, 7), bool))


def test_inpaint_empty_hole_identity(rng):
    img = rng.random((8, 8, 3))
    np.testing.assert_array_equal(inpaint(img, np.zeros((8, 8), bool)), img)


def test_inpaint_single_pixel_constant():
    img = np.full((9, 9, 3), 0.42)
    hole = np.zeros((9, 9), bool)
    hole[4, 4] = True
    img[4, 4] = 0.0
    np.testing.assert_allclose(inpaint(img, hole), 0.42, atol=1e-12)


def test_inpaint_ramp_continuation():
    w = 32
    ramp = np.tile(np.linspace(0.1, 0.9, w), (24, 1))[:, :, None]
    hole = np.zeros((24, w), bool)
    hole[10:14, 14:18] = True
    damaged = ramp.copy()
    damaged[hole] = 0.0
    out = inpaint(damaged, hole)
    assert np.abs(out[hole] - ramp[hole]).max() <= 0.05
    np.testing.assert_array_equal(out[~hole], ramp[~hole])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32))
def test_inpaint_keeps_known_pixels_and_range(seed):
    rng = np.random.default_rng(seed)
    img = rng.random((20, 20, 3))
    hole = rng.random((20, 20)) < 0.5
    if hole.all():
        return
    out = inpaint(img, hole, radius=3)
    np.testing.assert_array_equal(out[~hole], img[~hole])
    assert out.min() >= 0 and out.max() <= 1


def test_inpaint_close_to_opencv_on_smooth_image():
    # independent implementation of the same method; only broad agreement is expected
    yy, xx = np.mgrid[0:64, 0:64] / 64.0
    img = np.stack([0.5 + 0.3 * np.sin(2 * xx + yy), 0.5 + 0.3 * np.cos(3 * yy - xx), 0.4 + 0.2 * xx * yy], -1)
    hole = disk_mask((64, 64), (32, 30), 9)
    ours = inpaint(img, hole, 5)
    q = np.round(img * 255).astype(np.uint8)
    ref = cv2.inpaint(q, hole.astype(np.uint8), 5, cv2.INPAINT_TELEA) / 255.0
    assert np.abs(ours[hole] - img[hole]).mean() < 0.01
    assert np.abs(ours[hole] - ref[hole]).mean() < 0.03


def test_inpaint_full_hole_rejected():
    with pytest.raises(UninpaintableError):
        inpaint(np.zeros((4, 4, 1)), np.ones((4, 4), bool))
    with pytest.raises(ValueError):
        inpaint(np.zeros((4, 4, 1)), np.zeros((4, 4), bool), radius=0.5)


def test_naive_special_cases(rng):
    img = rng.random((16, 16, 3))
    K = gaussian_kernel(1.0)
    np.testing.assert_array_equal(synthesize_naive(img, np.ones((16, 16), bool), K), convolve(img, K))
    mask = disk_mask((16, 16), (8, 8), 5)
    np.testing.assert_array_equal(synthesize_naive(img, mask, delta_kernel(3)), img)


def test_halo_free_delta_gives_inpainted_region(rng):
    img = rng.random((20, 20, 3))
    mask = ~disk_mask((20, 20), (10, 10), 5)
    out = synthesize_halo_free(img, mask, delta_kernel(1))
    np.testing.assert_array_equal(out[~mask], img[~mask])
    np.testing.assert_array_equal(out[mask], inpaint(img, ~mask)[mask])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.0, 1.0))
def test_halo_free_sharp_region_exact_and_constant_fixed_point(seed, value):
    rng = np.random.default_rng(seed)
    mask = disk_mask((32, 32), rng.integers(6, 26, 2), rng.uniform(3, 10))
    if rng.random() < 0.5:
        mask = ~mask
    spec = BlurSpec("motion", length=int(rng.integers(1, 12)), angle=float(rng.uniform(0, 360)),
                    elastic_amplitude=1.0, elastic_smoothness=2.0, elastic_seed=int(rng.integers(0, 2**31)))
    K = realize_kernel(spec)
    img = rng.random((32, 32, 3))
    out = synthesize_halo_free(img, mask, K)
    np.testing.assert_array_equal(out[~mask], img[~mask])
    flat = np.full((32, 32, 3), value)
    assert np.abs(synthesize_halo_free(flat, mask, K) - value).max() <= 1e-6


def test_halo_free_degenerate_masks():
    img = np.zeros((8, 8, 1))
    for mask in (np.zeros((8, 8), bool), np.ones((8, 8), bool)):
        with pytest.raises(DegenerateMaskError):
            synthesize_halo_free(img, mask, gaussian_kernel(1.0))


def test_disk_on_contrasting_background_halo():
    rng = np.random.default_rng(3)
    img = np.full((64, 64, 3), 0.2) + 0.05 * rng.random((64, 64, 3))
    sharp = disk_mask((64, 64), (32, 32), 12)
    img[sharp] = 0.9
    mask = ~sharp
    K = gaussian_kernel(3.0)
    naive = boundary_band_gradient(synthesize_naive(img, mask, K), mask)
    clean = boundary_band_gradient(synthesize_halo_free(img, mask, K), mask)
    assert clean < naive
