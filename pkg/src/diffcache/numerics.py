"""Dense 4-D tensor numerics: spatial FFT, radial frequency masks, fidelity metrics.

Latent tensors are float32 numpy arrays of shape (frames, channels, height, width).
The FFT convention is unnormalized forward / 1/(H*W) inverse, so
sum |spectrum|^2 == H*W * sum |signal|^2 (Parseval).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PSNR_INF = math.inf  # sentinel for identical inputs

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def check_latent(x: np.ndarray) -> None:
    if x.ndim != 4:
        raise ValueError(f"expected a (F, C, H, W) tensor, got ndim={x.ndim}")
    if x.size == 0:
        raise ValueError("empty tensor")
    if not np.all(np.isfinite(x)):
        raise ValueError("tensor contains NaN or Inf")


def fft2(x: np.ndarray) -> np.ndarray:
    """Per-frame, per-channel 2-D DFT over the spatial plane. DC at (0, 0)."""
    check_latent(x)
    return np.fft.fft2(x, axes=(-2, -1)).astype(np.complex64)


def ifft2(s: np.ndarray) -> np.ndarray:
    """Inverse of fft2. Imaginary residue must be negligible; asserted in debug mode."""
    if s.ndim != 4:
        raise ValueError(f"expected a (F, C, H, W) spectrum, got ndim={s.ndim}")
    if s.size == 0:
        raise ValueError("empty spectrum")
    y = np.fft.ifft2(s, axes=(-2, -1))
    if __debug__:
        scale = max(float(np.abs(y.real).max()), 1.0)
        assert float(np.abs(y.imag).max()) <= 1e-4 * scale, "non-negligible imaginary residue"
    return np.ascontiguousarray(y.real, dtype=np.float32)


@dataclass(frozen=True)
class FrequencyMask:
    """Exact binary partition of the center-shifted spatial frequency plane."""

    height: int
    width: int
    cutoff: float
    low: np.ndarray
    high: np.ndarray


def make_masks(height: int, width: int, cutoff: float) -> FrequencyMask:
    if not 0.0 <= cutoff <= 1.0:
        raise ValueError(f"cutoff fraction must be in [0, 1], got {cutoff}")
    if height < 1 or width < 1:
        raise ValueError("mask dimensions must be >= 1")
    u = np.arange(height, dtype=np.float64) - height // 2
    v = np.arange(width, dtype=np.float64) - width // 2
    radius = np.sqrt(u[:, None] ** 2 + v[None, :] ** 2)
    r_max = math.sqrt((height / 2) ** 2 + (width / 2) ** 2)
    low = radius <= cutoff * r_max
    return FrequencyMask(height, width, cutoff, low, ~low)


def split_frequency(x: np.ndarray, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
    """Center-shifted spectrum split into masked low and high parts."""
    spec = np.fft.fftshift(fft2(x), axes=(-2, -1))
    masks = make_masks(x.shape[-2], x.shape[-1], cutoff)
    return spec * masks.low, spec * masks.high


def merge_frequency(low: np.ndarray, high: np.ndarray) -> np.ndarray:
    """Inverse of split_frequency: unshift and invert the recombined spectrum."""
    return ifft2(np.fft.ifftshift(low + high, axes=(-2, -1)))


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    _check_same_shape(a, b)
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    m = mse(a, b)
    if m == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(peak * peak / m)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2
    k = np.exp(-(r * r) / (2 * sigma * sigma))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


_SSIM_KERNEL = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)


def _window_filter(img: np.ndarray) -> np.ndarray:
    windows = np.lib.stride_tricks.sliding_window_view(img, (SSIM_WINDOW, SSIM_WINDOW))
    return np.einsum("ijkl,kl->ij", windows, _SSIM_KERNEL)


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Gaussian-windowed SSIM, computed per frame/channel and averaged."""
    _check_same_shape(a, b)
    check_latent(a)
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    frames, channels, h, w = a.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"spatial dims must be >= {SSIM_WINDOW}, got {h}x{w}")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    total = 0.0
    for f in range(frames):
        for c in range(channels):
            x = a[f, c].astype(np.float64)
            y = b[f, c].astype(np.float64)
            mu_x = _window_filter(x)
            mu_y = _window_filter(y)
            var_x = _window_filter(x * x) - mu_x * mu_x
            var_y = _window_filter(y * y) - mu_y * mu_y
            cov = _window_filter(x * y) - mu_x * mu_y
            num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
            den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
            total += float(np.mean(num / den))
    return total / (frames * channels)
