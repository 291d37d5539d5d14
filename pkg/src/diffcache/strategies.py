"""Cache strategies: glue between the step plan, the feature cache, and CFG reuse.

Strategy names:
  no_cache       full inference everywhere (the reference)
  vanilla_fr     attention reuse with w = 0
  dynamic_fr     attention reuse with extrapolation weight w(t)
  cfg_cache_only frequency-split CFG bias reuse only
  fastercache    dynamic_fr + CFG bias reuse
  cond_copy      naive baseline: uncond := cond at the same step
  stale_uncond   naive baseline: uncond := last fully computed uncond
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cache_engine import (
    CacheConfig,
    FeatureCache,
    StepPlan,
    build_plan,
    dynamic_reuse,
    w_of,
)
from .cfg_cache import CfgBiasCache, enhancement_weights, record_bias, reconstruct_uncond
from .denoisers import LayerHook, record_hooks

STRATEGY_NAMES = (
    "no_cache",
    "vanilla_fr",
    "dynamic_fr",
    "cfg_cache_only",
    "fastercache",
    "cond_copy",
    "stale_uncond",
)

_ATTENTION_STRATEGIES = {"vanilla_fr", "dynamic_fr", "fastercache"}
_CFG_STRATEGIES = {"cfg_cache_only", "fastercache", "cond_copy", "stale_uncond"}


@dataclass(frozen=True)
class BranchExec:
    """Per-step execution decisions, fixed by the plan alone."""

    cond_reuse: bool
    uncond_runs: bool
    uncond_reuse: bool


def execution_table(plan: StepPlan, attention_enabled: bool) -> list[BranchExec]:
    """Per-step branch decisions; the run and the MAC predictor follow this exactly.

    When the plan reconstructs the unconditional branch anywhere, its remaining
    real evaluations anchor the CFG bias cache and are computed without
    attention reuse. Otherwise the branch runs every step and mirrors the
    conditional branch: shared reuse error largely cancels inside the guidance
    combination, so symmetric reuse is both cheaper and more faithful.
    """
    uncond_anchored = any(not d.uncond_full for d in plan)
    return [
        BranchExec(
            attention_enabled and d.attn_reuse,
            d.uncond_full,
            attention_enabled and d.attn_reuse and d.uncond_full and not uncond_anchored,
        )
        for d in plan
    ]


class CacheStrategy:
    def __init__(self, name: str, cache_config: CacheConfig | None = None):
        if name not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {name!r}")
        self.name = name
        self.cache_config = cache_config or CacheConfig()
        self.attention_enabled = name in _ATTENTION_STRATEGIES
        self.cfg_enabled = name in _CFG_STRATEGIES
        self.weight_mode = "none" if name == "vanilla_fr" else self.cache_config.dfr_weight_mode
        self.plan: StepPlan | None = None

    def begin(self, model, sampler_config, sched) -> None:
        cc = self.cache_config
        self.layer_count = model.layer_count
        self.steps = sampler_config.steps
        self.plan = build_plan(
            sampler_config.steps,
            cc,
            timesteps=sampler_config.timesteps,
            attention_reuse=self.attention_enabled,
            cfg_reuse=self.cfg_enabled,
        )
        self.table = execution_table(self.plan, self.attention_enabled)
        self.caches = {
            "cond": FeatureCache(self.layer_count),
            "uncond": FeatureCache(self.layer_count),
        }
        self.bias: CfgBiasCache | None = None
        self.stale_uncond: np.ndarray | None = None
        # switching timestep: t0_fraction of the way down the CFG-active span
        t_act = self.plan[self.plan.cfg_activation_step].t if self.cfg_enabled else 0
        t_end = self.plan[self.steps - 1].t
        self.t0 = int(round(t_act - cc.t0_fraction * (t_act - t_end)))

    def hooks_for(self, s: int, branch: str) -> tuple[bool, list[LayerHook]]:
        row = self.table[s]
        reuse = row.cond_reuse if branch == "cond" else row.uncond_reuse
        if not reuse:
            return False, record_hooks(self.layer_count)
        w = w_of(
            s,
            self.plan.first_attn_reuse_step,
            self.steps,
            self.weight_mode,
            self.cache_config.constant_weight,
        )
        cache = self.caches[branch]
        hooks = [
            LayerHook("replace", dynamic_reuse(cache.entries[layer], w))
            for layer in range(self.layer_count)
        ]
        return True, hooks

    def after_full(self, s: int, branch: str, hooks: list[LayerHook]) -> None:
        cache = self.caches[branch]
        for layer, hook in enumerate(hooks):
            if hook.recorded is not None:
                cache.store(layer, s, hook.recorded)

    def note_full_uncond(self, s: int, t: int, eps_c, eps_u) -> None:
        self.stale_uncond = eps_u
        if self.plan[s].record_cfg_bias and self.name in ("cfg_cache_only", "fastercache"):
            self.bias = record_bias(eps_c, eps_u, self.cache_config.cutoff, step=s, t=t)

    def reconstruct_uncond(self, s: int, t: int, eps_c: np.ndarray) -> np.ndarray:
        if self.name == "cond_copy":
            return eps_c
        if self.name == "stale_uncond":
            if self.stale_uncond is None:
                raise RuntimeError("no fully computed unconditional output yet")
            return self.stale_uncond
        if self.bias is None:
            raise RuntimeError("CFG bias cache empty at a reuse step")
        w1, w2 = enhancement_weights(t, self.t0, self.cache_config.alpha1, self.cache_config.alpha2)
        return reconstruct_uncond(eps_c, self.bias, w1, w2)

    # --- analytic accounting, used by the benchmark harness ---

    def predicted_run_macs(self, model) -> int:
        total = 0
        for row in self.table:
            total += model.call_macs(reused_attention=row.cond_reuse)
            if row.uncond_runs:
                total += model.call_macs(reused_attention=row.uncond_reuse)
        return total

    def predicted_counts(self) -> tuple[int, int]:
        """(full attention evals, full uncond evals) implied by the plan."""
        attn = sum(
            (not row.cond_reuse) + (row.uncond_runs and not row.uncond_reuse)
            for row in self.table
        )
        uncond = sum(row.uncond_runs for row in self.table)
        return attn, uncond


def make_strategy(name: str, cache_config: CacheConfig | None = None) -> CacheStrategy:
    return CacheStrategy(name, cache_config)
