"""Desk-scale diffusion sampling engine with attention-feature and CFG caching."""

from .bench import ExperimentConfig, ModelConfig, ablate, run, sweep
from .cache_engine import CacheConfig, FeatureCache, StepPlan, build_plan, dynamic_reuse, w_of
from .cfg_cache import CfgBiasCache, enhancement_weights, record_bias, reconstruct_uncond
from .denoisers import AnalyticDenoiser, GaussianWorld, make_gaussian_world
from .numerics import fft2, ifft2, make_masks, merge_frequency, mse, psnr, split_frequency, ssim
from .sampler import SamplerConfig, cfg_combine, reverse_step, sample
from .schedules import NoiseSchedule, make_schedule, q_sample
from .strategies import STRATEGY_NAMES, CacheStrategy, make_strategy
from .tiny_dit import TinyDiT, TinyDiTConfig, attention, count_macs

__all__ = [
    "AnalyticDenoiser",
    "CacheConfig",
    "CacheStrategy",
    "CfgBiasCache",
    "ExperimentConfig",
    "FeatureCache",
    "GaussianWorld",
    "ModelConfig",
    "NoiseSchedule",
    "SamplerConfig",
    "StepPlan",
    "STRATEGY_NAMES",
    "StepPlan",
    "TinyDiT",
    "TinyDiTConfig",
    "ablate",
    "attention",
    "build_plan",
    "cfg_combine",
    "count_macs",
    "dynamic_reuse",
    "enhancement_weights",
    "fft2",
    "ifft2",
    "make_gaussian_world",
    "make_masks",
    "make_schedule",
    "make_strategy",
    "merge_frequency",
    "mse",
    "psnr",
    "q_sample",
    "reconstruct_uncond",
    "record_bias",
    "reverse_step",
    "run",
    "sample",
    "split_frequency",
    "ssim",
    "sweep",
    "w_of",
]
