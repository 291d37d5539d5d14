"""Noise predictors and the layer-hook contract used by the cache machinery.

Every predictor exposes hook points at its cacheable feature sites. A hook in
RECORD mode captures the computed feature without changing it; a hook in
REPLACE mode supplies the feature and the predictor skips computing it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import rng
from .schedules import NoiseSchedule

NULL_CONDITION = 0  # reserved unconditional id

RECORD = "record"
REPLACE = "replace"


class LayerHook:
    __slots__ = ("mode", "replacement", "recorded")

    def __init__(self, mode: str = RECORD, replacement: np.ndarray | None = None):
        if mode not in (RECORD, REPLACE):
            raise ValueError(f"unknown hook mode {mode!r}")
        if mode == REPLACE and replacement is None:
            raise ValueError("replace hook needs a replacement feature")
        self.mode = mode
        self.replacement = replacement
        self.recorded: np.ndarray | None = None

    @property
    def output(self) -> np.ndarray | None:
        """The feature that actually flowed through this hook."""
        return self.replacement if self.mode == REPLACE else self.recorded


def record_hooks(n: int) -> list[LayerHook]:
    return [LayerHook(RECORD) for _ in range(n)]


class NoisePredictor(Protocol):
    layer_count: int
    latent_shape: tuple[int, int, int, int]

    def predict(self, x_t, t, condition_id, hooks=None): ...

    def call_macs(self, reused_attention: bool = False) -> int: ...


def _check_hooks(hooks, layer_count: int):
    if hooks is None:
        return record_hooks(layer_count)
    if len(hooks) != layer_count:
        raise ValueError(f"expected {layer_count} hooks, got {len(hooks)}")
    return hooks


@dataclass(frozen=True)
class GaussianWorld:
    """Gaussian data distribution per condition: x0 ~ N(mean[c], variance * I)."""

    means: dict[int, np.ndarray]
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be >= 0")
        if NULL_CONDITION not in self.means:
            raise ValueError("world must define the null-condition mean")
        null = self.means[NULL_CONDITION]
        if not any(
            c != NULL_CONDITION and not np.array_equal(m, null) for c, m in self.means.items()
        ):
            raise ValueError("at least one conditional mean must differ from the null mean")


def make_gaussian_world(
    shape: tuple[int, int, int, int],
    num_conditions: int = 4,
    seed: int = 7,
    variance: float = 0.25,
) -> GaussianWorld:
    """Smooth low-frequency condition means; the null condition is all-zero."""
    frames, channels, h, w = shape
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    means: dict[int, np.ndarray] = {NULL_CONDITION: np.zeros(shape, dtype=np.float32)}
    for c in range(1, num_conditions):
        g = rng.stream(seed, rng.WORLD_MEANS, c)
        plane = np.zeros((h, w))
        for _ in range(3):
            kx, ky = g.integers(0, 3, size=2)
            amp = g.uniform(0.3, 1.0)
            phase = g.uniform(0, 2 * np.pi)
            plane += amp * np.cos(2 * np.pi * (kx * yy / h + ky * xx / w) + phase)
        scale = g.uniform(0.5, 1.5, size=(frames, channels))
        means[c] = (scale[:, :, None, None] * plane).astype(np.float32)
    return GaussianWorld(means, variance)


@dataclass
class AnalyticDenoiser:
    """Closed-form posterior-mean noise predictor for Gaussian data.

    Exposes one hook layer whose feature is the predicted noise itself, which
    makes the feature-reuse machinery exercisable on an exact oracle model.
    """

    world: GaussianWorld
    sched: NoiseSchedule
    layer_count: int = field(default=1, init=False)

    @property
    def latent_shape(self) -> tuple[int, int, int, int]:
        return next(iter(self.world.means.values())).shape

    def predict(self, x_t, t: int, condition_id: int, hooks=None):
        if not 1 <= t <= self.sched.timesteps:
            raise ValueError(f"t={t} outside [1, {self.sched.timesteps}]")
        hooks = _check_hooks(hooks, self.layer_count)
        hook = hooks[0]
        if hook.mode == REPLACE:
            return np.asarray(hook.replacement, dtype=np.float32)
        ab = self.sched.alpha_bar[t]
        s2 = self.world.variance
        mu = self.world.means[condition_id]
        x0_hat = (s2 * np.sqrt(ab) * x_t + (1.0 - ab) * mu) / (ab * s2 + 1.0 - ab)
        eps = ((x_t - np.sqrt(ab) * x0_hat) / np.sqrt(1.0 - ab)).astype(np.float32)
        hook.recorded = eps
        return eps

    def call_macs(self, reused_attention: bool = False) -> int:
        # nominal cost model: a handful of elementwise passes over the latent
        if reused_attention:
            return 0
        f, c, h, w = self.latent_shape
        return 4 * f * c * h * w
