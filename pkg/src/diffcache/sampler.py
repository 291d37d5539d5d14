"""Guided reverse sampler: the loop every cache strategy plugs into."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .cache_engine import timestep_of
from .schedules import NoiseSchedule, SCHEDULE_KINDS, make_schedule

SAMPLER_MODES = ("ddim", "ancestral")


@dataclass(frozen=True)
class SamplerConfig:
    steps: int
    guidance_scale: float = 7.5
    seed: int = 0
    condition_id: int = 1
    schedule_kind: str = "linear_beta"
    timesteps: int = 1000
    mode: str = "ddim"

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        if self.guidance_scale < 0:
            raise ValueError("guidance_scale must be >= 0")
        if self.schedule_kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.schedule_kind!r}")
        if self.mode not in SAMPLER_MODES:
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.timesteps < self.steps:
            raise ValueError("timesteps must be >= steps")


def cfg_combine(eps_c: np.ndarray, eps_u: np.ndarray, g: float) -> np.ndarray:
    """(1 + g) * eps_cond - g * eps_uncond."""
    if eps_c.shape != eps_u.shape:
        raise ValueError(f"shape mismatch: {eps_c.shape} vs {eps_u.shape}")
    return ((1.0 + g) * eps_c - g * eps_u).astype(np.float32)


def reverse_step(
    x_t: np.ndarray,
    eps: np.ndarray,
    s: int,
    steps: int,
    sched: NoiseSchedule,
    mode: str = "ddim",
    seed: int = 0,
) -> np.ndarray:
    """One update from timestep t_s to t_{s+1} on the uniform stride over [T, 0]."""
    if eps.shape != x_t.shape:
        raise ValueError(f"shape mismatch: {x_t.shape} vs {eps.shape}")
    t = timestep_of(s, steps, sched.timesteps)
    t_next = timestep_of(s + 1, steps, sched.timesteps)
    ab_t = sched.alpha_bar[t]
    ab_n = sched.alpha_bar[t_next]
    x0_hat = (x_t - np.sqrt(1.0 - ab_t) * eps) / np.sqrt(ab_t)
    if mode == "ddim":
        out = np.sqrt(ab_n) * x0_hat + np.sqrt(1.0 - ab_n) * eps
    elif mode == "ancestral":
        ratio = ab_t / ab_n
        mean = (np.sqrt(ratio) * (1.0 - ab_n) * x_t + np.sqrt(ab_n) * (1.0 - ratio) * x0_hat) / (
            1.0 - ab_t
        )
        var = (1.0 - ab_n) / (1.0 - ab_t) * (1.0 - ratio)
        out = mean
        if t_next > 0:
            out = out + np.sqrt(var) * rng.gaussian(x_t.shape, seed, rng.ANCESTRAL, s)
    else:
        raise ValueError(f"unknown sampler mode {mode!r}")
    return out.astype(np.float32)


def ancestral_posterior(x_t, x0_hat, ab_t, ab_n):
    """Posterior mean and variance for a strided ancestral step (test oracle hook)."""
    ratio = ab_t / ab_n
    mean = (np.sqrt(ratio) * (1.0 - ab_n) * x_t + np.sqrt(ab_n) * (1.0 - ratio) * x0_hat) / (
        1.0 - ab_t
    )
    var = (1.0 - ab_n) / (1.0 - ab_t) * (1.0 - ratio)
    return mean, var


@dataclass
class StepRecord:
    step: int
    t: int
    cond_full: bool
    uncond_full: bool
    attn_reuse: bool
    record_cfg_bias: bool
    eps_cond: np.ndarray
    eps_uncond: np.ndarray
    eps_combined: np.ndarray
    features: list[np.ndarray] = field(default_factory=list)


@dataclass
class RunTotals:
    macs: int = 0
    full_attention_evals: int = 0  # model calls whose attention ran fully
    full_uncond_evals: int = 0
    model_calls: int = 0


def sample(model, config: SamplerConfig, strategy):
    """Run the sampler with the given cache strategy.

    Returns (final latent, trace, totals). The trace records both branch
    outputs, the hook features that flowed through the conditional branch, and
    the per-step execution flags.
    """
    sched = make_schedule(config.schedule_kind, config.timesteps)
    strategy.begin(model, config, sched)
    plan = strategy.plan
    if len(plan) != config.steps:
        raise ValueError("strategy plan length does not match the sampler steps")

    x = rng.gaussian(model.latent_shape, config.seed, rng.INIT_NOISE)
    trace: list[StepRecord] = []
    totals = RunTotals()

    for s in range(config.steps):
        d = plan[s]
        t = d.t

        cond_reuse, hooks_c = strategy.hooks_for(s, "cond")
        eps_c = model.predict(x, t, config.condition_id, hooks_c)
        totals.model_calls += 1
        totals.macs += model.call_macs(reused_attention=cond_reuse)
        if not cond_reuse:
            totals.full_attention_evals += 1
            strategy.after_full(s, "cond", hooks_c)

        if d.uncond_full:
            uncond_reuse, hooks_u = strategy.hooks_for(s, "uncond")
            eps_u = model.predict(x, t, 0, hooks_u)
            totals.model_calls += 1
            totals.full_uncond_evals += 1
            totals.macs += model.call_macs(reused_attention=uncond_reuse)
            if not uncond_reuse:
                totals.full_attention_evals += 1
                strategy.after_full(s, "uncond", hooks_u)
            strategy.note_full_uncond(s, t, eps_c, eps_u)
        else:
            eps_u = strategy.reconstruct_uncond(s, t, eps_c)

        eps = cfg_combine(eps_c, eps_u, config.guidance_scale)
        trace.append(
            StepRecord(
                step=s,
                t=t,
                cond_full=d.cond_full,
                uncond_full=d.uncond_full,
                attn_reuse=cond_reuse,
                record_cfg_bias=d.record_cfg_bias,
                eps_cond=eps_c,
                eps_uncond=eps_u,
                eps_combined=eps,
                features=[h.output.copy() for h in hooks_c if h.output is not None],
            )
        )
        x = reverse_step(x, eps, s, config.steps, sched, config.mode, config.seed)

    return x, trace, totals
