import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffcache import numerics
from diffcache.numerics import (
    PSNR_INF,
    fft2,
    ifft2,
    make_masks,
    merge_frequency,
    mse,
    psnr,
    split_frequency,
    ssim,
)

from conftest import latent, naive_dft2


class TestFFT:
    def test_matches_naive_dft(self):
        x = latent((2, 2, 8, 8), seed=1)
        fast = fft2(x)
        naive = naive_dft2(x)
        scale = np.abs(naive).max()
        assert np.abs(fast - naive).max() <= 1e-6 * max(scale, 1.0)

    def test_matches_naive_dft_rectangular(self):
        x = latent((1, 1, 4, 6), seed=2)
        fast = fft2(x)
        naive = naive_dft2(x)
        scale = np.abs(naive).max()
        assert np.abs(fast - naive).max() <= 1e-6 * max(scale, 1.0)

    def test_dc_component_is_sum(self):
        x = latent((1, 1, 8, 8), seed=3)
        spec = fft2(x)
        assert np.abs(spec[0, 0, 0, 0] - x[0, 0].sum()) <= 1e-4

    def test_roundtrip(self):
        x = latent((2, 3, 8, 8), seed=4)
        np.testing.assert_allclose(ifft2(fft2(x)), x, atol=1e-5)

    def test_parseval(self):
        x = latent((1, 2, 16, 16), seed=5)
        spec = fft2(x).astype(np.complex128)
        lhs = float(np.sum(np.abs(spec) ** 2))
        rhs = 16 * 16 * float(np.sum(np.asarray(x, np.float64) ** 2))
        assert lhs == pytest.approx(rhs, rel=1e-5)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            fft2(np.zeros((4, 4), np.float32))
        with pytest.raises(ValueError):
            fft2(np.full((1, 1, 2, 2), np.nan, np.float32))
        with pytest.raises(ValueError):
            ifft2(np.zeros((4, 4), np.complex64))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 1000), a=st.floats(-2, 2), b=st.floats(-2, 2))
    def test_linearity(self, seed, a, b):
        x = latent((1, 1, 8, 8), seed=seed, index=0)
        y = latent((1, 1, 8, 8), seed=seed, index=1)
        combined = fft2((a * x + b * y).astype(np.float32))
        separate = a * fft2(x) + b * fft2(y)
        assert np.abs(combined - separate).max() <= 1e-4


class TestMasks:
    def test_exact_partition(self):
        m = make_masks(8, 8, 0.4)
        assert np.all(m.low ^ m.high)
        assert not np.any(m.low & m.high)

    def test_cutoff_zero_keeps_only_center(self):
        m = make_masks(8, 8, 0.0)
        expected = np.zeros((8, 8), bool)
        expected[4, 4] = True
        np.testing.assert_array_equal(m.low, expected)

    def test_cutoff_one_keeps_everything(self):
        m = make_masks(8, 8, 1.0)
        assert np.all(m.low)
        assert not np.any(m.high)

    def test_small_enumeration(self):
        m = make_masks(4, 4, 0.5)
        r_max = math.sqrt(2 ** 2 + 2 ** 2)
        for u in range(4):
            for v in range(4):
                radius = math.hypot(u - 2, v - 2)
                assert m.low[u, v] == (radius <= 0.5 * r_max)

    def test_validation(self):
        with pytest.raises(ValueError):
            make_masks(8, 8, 1.5)
        with pytest.raises(ValueError):
            make_masks(0, 8, 0.5)

    @settings(max_examples=25, deadline=None)
    @given(
        h=st.integers(1, 16),
        w=st.integers(1, 16),
        cutoff=st.floats(0, 1),
    )
    def test_partition_property(self, h, w, cutoff):
        m = make_masks(h, w, cutoff)
        assert np.all(m.low | m.high)
        assert not np.any(m.low & m.high)


class TestSplitMerge:
    def test_roundtrip(self):
        x = latent((2, 2, 8, 8), seed=6)
        low, high = split_frequency(x, 0.3)
        np.testing.assert_allclose(merge_frequency(low, high), x, atol=1e-5)

    def test_parts_confined_to_masks(self):
        x = latent((1, 1, 8, 8), seed=7)
        low, high = split_frequency(x, 0.3)
        m = make_masks(8, 8, 0.3)
        assert np.all(low[..., ~m.low] == 0)
        assert np.all(high[..., ~m.high] == 0)

    def test_low_part_alone_is_smooth_dc(self):
        x = np.full((1, 1, 8, 8), 0.5, np.float32)
        low, high = split_frequency(x, 0.1)
        # a constant image is pure DC: the high part must be empty
        assert np.abs(high).max() <= 1e-4


class TestMetrics:
    def test_mse_hand_value(self):
        a = np.zeros((1, 1, 4, 4), np.float32)
        b = np.full((1, 1, 4, 4), 0.5, np.float32)
        assert mse(a, b) == pytest.approx(0.25)

    def test_mse_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 3)))

    def test_psnr_hand_value(self):
        a = np.zeros((1, 1, 4, 4), np.float32)
        b = np.full((1, 1, 4, 4), 0.5, np.float32)
        assert psnr(a, b) == pytest.approx(10 * math.log10(1 / 0.25))

    def test_psnr_identical_is_inf(self):
        a = latent((1, 1, 4, 4), seed=8)
        assert psnr(a, a) == PSNR_INF

    def test_psnr_peak_validation(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 2)), peak=0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 500))
    def test_mse_symmetric_nonnegative(self, seed):
        a = latent((1, 1, 4, 4), seed=seed, index=0)
        b = latent((1, 1, 4, 4), seed=seed, index=1)
        assert mse(a, b) >= 0
        assert mse(a, b) == pytest.approx(mse(b, a))


class TestSSIM:
    def test_identity_is_exactly_one(self):
        a = latent((2, 2, 16, 16), seed=9)
        assert ssim(a, a) == 1.0

    def test_matches_naive_loop(self):
        a = latent((1, 1, 16, 16), seed=10, index=0)
        b = (a + 0.1 * latent((1, 1, 16, 16), seed=10, index=1)).astype(np.float32)
        fast = ssim(a, b)
        naive = self._naive_ssim(a[0, 0].astype(np.float64), b[0, 0].astype(np.float64))
        assert fast == pytest.approx(naive, abs=1e-10)

    @staticmethod
    def _naive_ssim(x, y, peak=1.0):
        k = numerics._gaussian_kernel(11, 1.5)
        c1 = (0.01 * peak) ** 2
        c2 = (0.03 * peak) ** 2
        h, w = x.shape
        vals = []
        for i in range(h - 10):
            for j in range(w - 10):
                wx = x[i:i + 11, j:j + 11]
                wy = y[i:i + 11, j:j + 11]
                mx = float((k * wx).sum())
                my = float((k * wy).sum())
                vx = float((k * wx * wx).sum()) - mx * mx
                vy = float((k * wy * wy).sum()) - my * my
                cov = float((k * wx * wy).sum()) - mx * my
                vals.append(
                    ((2 * mx * my + c1) * (2 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2))
                )
        return sum(vals) / len(vals)

    def test_noise_lowers_ssim(self):
        a = latent((1, 1, 16, 16), seed=11, index=0)
        b = (a + 0.5 * latent((1, 1, 16, 16), seed=11, index=1)).astype(np.float32)
        assert ssim(a, b) < 1.0

    def test_small_spatial_dims_rejected(self):
        a = np.zeros((1, 1, 8, 8), np.float32)
        with pytest.raises(ValueError):
            ssim(a, a)

    def test_peak_validation(self):
        a = np.zeros((1, 1, 16, 16), np.float32)
        with pytest.raises(ValueError):
            ssim(a, a, peak=-1)
