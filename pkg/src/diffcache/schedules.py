"""Noise schedules and the forward corruption process."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCHEDULE_KINDS = ("linear_beta", "cosine")

_BETA_MIN = 1e-4
_BETA_MAX = 2e-2
_COSINE_FLOOR = 1e-5


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal coefficients alpha_bar[t] for t = 0..T."""

    alpha_bar: np.ndarray

    @property
    def timesteps(self) -> int:
        return len(self.alpha_bar) - 1

    def __post_init__(self):
        ab = self.alpha_bar
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must be 1")
        if np.any(np.diff(ab) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if ab[-1] <= 0 or np.any(ab > 1.0):
            raise ValueError("alpha_bar values must lie in (0, 1]")


def make_schedule(kind: str, timesteps: int) -> NoiseSchedule:
    if timesteps < 2:
        raise ValueError(f"timesteps must be >= 2, got {timesteps}")
    if kind == "linear_beta":
        betas = np.linspace(_BETA_MIN, _BETA_MAX, timesteps)
        alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    elif kind == "cosine":
        t = np.arange(timesteps + 1, dtype=np.float64)
        f = np.cos((t / timesteps + 0.008) / 1.008 * np.pi / 2) ** 2
        alpha_bar = np.clip(f / f[0], _COSINE_FLOOR, 1.0)
        # clipping can flatten the tail; restore strict decrease
        for i in range(1, timesteps + 1):
            alpha_bar[i] = min(alpha_bar[i], alpha_bar[i - 1] * (1 - 1e-9))
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(alpha_bar)


def q_sample(x0: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Forward corruption: sqrt(ab_t) * x0 + sqrt(1 - ab_t) * noise."""
    if x0.shape != noise.shape:
        raise ValueError(f"shape mismatch: {x0.shape} vs {noise.shape}")
    if not 0 <= t <= sched.timesteps:
        raise ValueError(f"t={t} outside [0, {sched.timesteps}]")
    ab = sched.alpha_bar[t]
    return (np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise).astype(np.float32)
