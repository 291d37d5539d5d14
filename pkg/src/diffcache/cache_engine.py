"""Step planning and attention-feature reuse.

The plan fixes, per sampling step, which CFG branches run fully, which steps
reuse attention features, and where the CFG bias cache is refreshed. Feature
reuse extrapolates from the two most recent fully computed features:
reused = last + (last - prev) * w, with w = 0 reducing to vanilla reuse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .denoisers import LayerHook, record_hooks

WEIGHT_MODES = ("linear", "constant", "none")


@dataclass(frozen=True)
class CacheConfig:
    dfr_interval: int = 2
    dfr_weight_mode: str = "linear"
    constant_weight: float = 0.5
    cfg_start_fraction: float = 1.0 / 3.0
    cfg_interval: int = 5
    alpha1: float = 0.2
    alpha2: float = 0.2
    t0_fraction: float = 0.5
    cutoff: float = 0.25

    def __post_init__(self):
        if self.dfr_interval < 1:
            raise ValueError("dfr_interval must be >= 1")
        if self.cfg_interval < 1:
            raise ValueError("cfg_interval must be >= 1")
        if not 0.0 <= self.cfg_start_fraction < 1.0:
            raise ValueError("cfg_start_fraction must be in [0, 1)")
        if self.dfr_weight_mode not in WEIGHT_MODES:
            raise ValueError(f"unknown weight mode {self.dfr_weight_mode!r}")
        if self.alpha1 < -1 or self.alpha2 < -1:
            raise ValueError("alpha1 and alpha2 must be >= -1")
        if not 0.0 <= self.t0_fraction <= 1.0:
            raise ValueError("t0_fraction must be in [0, 1]")
        if not 0.0 <= self.cutoff <= 1.0:
            raise ValueError("cutoff must be in [0, 1]")


@dataclass(frozen=True)
class StepDirective:
    step: int
    t: int
    cond_full: bool
    uncond_full: bool
    attn_reuse: bool
    record_cfg_bias: bool


@dataclass(frozen=True)
class StepPlan:
    steps: tuple[StepDirective, ...]
    cfg_activation_step: int

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, s: int) -> StepDirective:
        return self.steps[s]

    @property
    def first_attn_reuse_step(self) -> int | None:
        for d in self.steps:
            if d.attn_reuse:
                return d.step
        return None

    def reuse_uncond_steps(self) -> list[int]:
        return [d.step for d in self.steps if not d.uncond_full]

    def full_attention_steps(self) -> list[int]:
        return [d.step for d in self.steps if not d.attn_reuse]

    def csv_rows(self) -> list[dict]:
        return [
            {
                "step": d.step,
                "t": d.t,
                "cond_full": int(d.cond_full),
                "uncond_full": int(d.uncond_full),
                "attn_reuse": int(d.attn_reuse),
                "record_cfg_bias": int(d.record_cfg_bias),
            }
            for d in self.steps
        ]


def timestep_of(step: int, steps: int, timesteps: int) -> int:
    """Fixed sampling-step -> diffusion-timestep mapping, strictly decreasing."""
    return int(round(timesteps * (1.0 - step / steps)))


def build_plan(
    steps: int,
    cfg: CacheConfig,
    timesteps: int = 1000,
    *,
    attention_reuse: bool = True,
    cfg_reuse: bool = True,
) -> StepPlan:
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if timesteps < steps:
        raise ValueError("timesteps must be >= steps for a strictly decreasing mapping")

    activation = math.ceil((steps - 1) * cfg.cfg_start_fraction) if cfg_reuse else steps
    directives = []
    full_attn_seen = 0
    for s in range(steps):
        if s < activation:
            uncond_full, record = True, False
        else:
            refresh = (s - activation) % cfg.cfg_interval == 0
            uncond_full, record = refresh, refresh

        reuse = attention_reuse and s % cfg.dfr_interval != 0 and s > 0
        if reuse and full_attn_seen < 2:
            reuse = False  # warm-up: the cache needs two fully computed steps
        if reuse and record:
            reuse = False  # bias-refresh steps are computed honestly on both branches
        if not reuse:
            full_attn_seen += 1
        directives.append(
            StepDirective(
                step=s,
                t=timestep_of(s, steps, timesteps),
                cond_full=True,
                uncond_full=uncond_full,
                attn_reuse=reuse,
                record_cfg_bias=record,
            )
        )
    return StepPlan(tuple(directives), activation)


def w_of(s: int, s_act: int, steps: int, mode: str, constant_weight: float = 0.5) -> float:
    """Reuse weight at step s; DFR activates at s_act, sampling ends at steps-1."""
    if mode == "none":
        return 0.0
    if mode == "constant":
        return constant_weight
    if mode != "linear":
        raise ValueError(f"unknown weight mode {mode!r}")
    if not s_act <= s <= steps - 1:
        raise ValueError(f"step {s} outside [{s_act}, {steps - 1}]")
    if steps - 1 == s_act:
        return 1.0
    return (s - s_act) / (steps - 1 - s_act)


@dataclass
class CacheEntry:
    last_step: int = -1
    last: np.ndarray | None = None
    prev_step: int = -1
    prev: np.ndarray | None = None

    @property
    def ready(self) -> bool:
        return self.last is not None and self.prev is not None


@dataclass
class FeatureCache:
    """Per-layer store of the two most recent fully computed attention features."""

    layer_count: int
    entries: list[CacheEntry] = field(default_factory=list)

    def __post_init__(self):
        if not self.entries:
            self.entries = [CacheEntry() for _ in range(self.layer_count)]

    def store(self, layer: int, step: int, feature: np.ndarray) -> None:
        e = self.entries[layer]
        if step <= e.last_step:
            raise ValueError(f"cache stores must advance in step order, got {step}")
        e.prev_step, e.prev = e.last_step, e.last
        e.last_step, e.last = step, feature

    @property
    def ready(self) -> bool:
        return all(e.ready for e in self.entries)


def dynamic_reuse(entry: CacheEntry, w: float) -> np.ndarray:
    """First-order extrapolation: last + (last - prev) * w."""
    if not entry.ready:
        raise RuntimeError("feature cache slot missing; the plan should prevent this")
    return (entry.last + (entry.last - entry.prev) * np.float32(w)).astype(np.float32)


def apply_strategy(
    layer_count: int,
    plan: StepPlan,
    cache: FeatureCache,
    s: int,
    *,
    weight_mode: str = "linear",
    constant_weight: float = 0.5,
) -> list[LayerHook]:
    """Hooks for step s: record on full steps, replace on reuse steps."""
    if not plan[s].attn_reuse:
        return record_hooks(layer_count)
    if not cache.ready:
        raise RuntimeError(f"cache underflow at reuse step {s}")
    w = w_of(s, plan.first_attn_reuse_step, len(plan), weight_mode, constant_weight)
    return [
        LayerHook("replace", dynamic_reuse(cache.entries[layer], w))
        for layer in range(layer_count)
    ]


def commit_features(cache: FeatureCache, hooks: list[LayerHook], s: int) -> None:
    """After a fully computed step, rotate the recorded features into the cache."""
    for layer, hook in enumerate(hooks):
        if hook.mode == "record" and hook.recorded is not None:
            cache.store(layer, s, hook.recorded)
