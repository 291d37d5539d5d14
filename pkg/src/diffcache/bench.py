"""Benchmark harness: run strategies against the full-inference reference,
count MACs, time wall clock, and compute fidelity metrics."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cache_engine import CacheConfig, StepPlan, build_plan
from .cfg_cache import bias_frequency_trend
from .denoisers import AnalyticDenoiser, make_gaussian_world
from .numerics import SSIM_WINDOW, mse, psnr, ssim
from .sampler import SamplerConfig, sample
from .schedules import make_schedule
from .strategies import STRATEGY_NAMES, make_strategy
from .tiny_dit import TinyDiT, TinyDiTConfig

SCHEMA_VERSION = 1

MODEL_KINDS = ("analytic", "tiny_dit")

SWEEP_PARAMS = {
    "dfr_interval": ("cache", "dfr_interval", int),
    "cfg_interval": ("cache", "cfg_interval", int),
    "alpha1": ("cache", "alpha1", float),
    "alpha2": ("cache", "alpha2", float),
    "rho": ("cache", "cutoff", float),
    "t0_fraction": ("cache", "t0_fraction", float),
    "g": ("sampler", "guidance_scale", float),
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "analytic"
    frames: int = 8
    channels: int = 4
    height: int = 32
    width: int = 32
    # analytic world
    variance: float = 0.25
    world_seed: int = 7
    num_conditions: int = 4
    # tiny DiT
    layers: int = 4
    embed_dim: int = 32
    heads: int = 4
    patch: int = 4
    condition_vocab: int = 8
    init_seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")

    @property
    def latent_shape(self):
        return (self.frames, self.channels, self.height, self.width)


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "fastercache"
    model: ModelConfig = field(default_factory=ModelConfig)
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(steps=30))
    cache: CacheConfig = field(default_factory=CacheConfig)
    repetitions: int = 5

    def __post_init__(self):
        if self.strategy not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            return cls(
                strategy=d.get("strategy", "fastercache"),
                model=ModelConfig(**d.get("model", {})),
                sampler=SamplerConfig(**{"steps": 30, **d.get("sampler", {})}),
                cache=CacheConfig(**d.get("cache", {})),
                repetitions=d.get("repetitions", 5),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def replace_param(self, name: str, value) -> "ExperimentConfig":
        if name not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {name!r}")
        section, attr, cast = SWEEP_PARAMS[name]
        patched = dataclasses.replace(getattr(self, section), **{attr: cast(value)})
        return dataclasses.replace(self, **{section: patched})


def build_model(mc: ModelConfig, sampler: SamplerConfig):
    if mc.kind == "analytic":
        sched = make_schedule(sampler.schedule_kind, sampler.timesteps)
        world = make_gaussian_world(
            mc.latent_shape, mc.num_conditions, mc.world_seed, mc.variance
        )
        return AnalyticDenoiser(world, sched)
    dit = TinyDiTConfig(
        layers=mc.layers,
        embed_dim=mc.embed_dim,
        heads=mc.heads,
        patch=mc.patch,
        frames=mc.frames,
        channels=mc.channels,
        height=mc.height,
        width=mc.width,
        condition_vocab=mc.condition_vocab,
        init_seed=mc.init_seed,
    )
    return TinyDiT(dit)


@dataclass
class ExecutionResult:
    final: np.ndarray
    trace: list
    totals: object
    strategy: object
    latency_median: float
    latency_stddev: float


def _execute(model, config: ExperimentConfig, strategy_name: str, timed: bool) -> ExecutionResult:
    reps = config.repetitions if timed else 1
    durations = []
    result = None
    total_runs = reps + 1 if timed else 1  # one warm-up before timed repetitions
    for i in range(total_runs):
        strategy = make_strategy(strategy_name, config.cache)
        start = time.perf_counter()
        x, trace, totals = sample(model, config.sampler, strategy)
        elapsed = time.perf_counter() - start
        if not timed or i > 0:
            durations.append(elapsed)
        result = (x, trace, totals, strategy)
    x, trace, totals, strategy = result
    return ExecutionResult(
        final=x,
        trace=trace,
        totals=totals,
        strategy=strategy,
        latency_median=statistics.median(durations),
        latency_stddev=statistics.pstdev(durations) if len(durations) > 1 else 0.0,
    )


def _feature_mse_series(trace, reference_trace) -> list[float]:
    series = []
    for rec, ref in zip(trace, reference_trace):
        pairs = [
            (f, g) for f, g in zip(rec.features, ref.features) if f.shape == g.shape
        ]
        if pairs:
            series.append(sum(mse(f, g) for f, g in pairs) / len(pairs))
        else:
            series.append(None)
    return series


def run(config: ExperimentConfig, _reference: ExecutionResult | None = None) -> dict:
    """Execute the strategy and the no_cache reference with identical seeds."""
    model = build_model(config.model, config.sampler)
    reference = _reference or _execute(model, config, "no_cache", timed=True)
    if config.strategy == "no_cache":
        result = reference
    else:
        result = _execute(model, config, config.strategy, timed=True)

    h, w = config.model.height, config.model.width
    final_psnr = psnr(result.final, reference.final)
    report = {
        "schema_version": SCHEMA_VERSION,
        "strategy": config.strategy,
        "config": config.to_dict(),
        "macs": {
            "total": int(result.totals.macs),
            "no_cache_total": int(reference.totals.macs),
            "predicted_total": int(result.strategy.predicted_run_macs(model)),
            "ratio_vs_no_cache": result.totals.macs / reference.totals.macs,
        },
        "counts": {
            "full_attention_evals": result.totals.full_attention_evals,
            "full_uncond_evals": result.totals.full_uncond_evals,
            "model_calls": result.totals.model_calls,
            "predicted_full_attention_evals": result.strategy.predicted_counts()[0],
            "predicted_full_uncond_evals": result.strategy.predicted_counts()[1],
        },
        "fidelity": {
            "mse_vs_no_cache": mse(result.final, reference.final),
            "psnr_db_vs_no_cache": None if math.isinf(final_psnr) else final_psnr,
            "ssim_vs_no_cache": (
                ssim(result.final, reference.final)
                if h >= SSIM_WINDOW and w >= SSIM_WINDOW
                else None
            ),
        },
        "feature_mse": _feature_mse_series(result.trace, reference.trace),
        "bias_trend": [
            {"t": t, "low_energy": lo, "high_energy": hi}
            for t, lo, hi in bias_frequency_trend(reference.trace, config.cache.cutoff)
        ],
        "timing": {
            "latency_s": result.latency_median,
            "latency_stddev_s": result.latency_stddev,
            "no_cache_latency_s": reference.latency_median,
            "no_cache_latency_stddev_s": reference.latency_stddev,
            "repetitions": config.repetitions,
            "speedup_vs_no_cache": (
                1.0
                if config.strategy == "no_cache"
                else reference.latency_median / result.latency_median
            ),
        },
    }
    return report


def ablate(base: ExperimentConfig, strategies=STRATEGY_NAMES) -> dict[str, dict]:
    """Run the fixed variant grid with shared seeds and a shared reference."""
    model = build_model(base.model, base.sampler)
    reference = _execute(model, base, "no_cache", timed=True)
    reports = {}
    for name in strategies:
        cfg = dataclasses.replace(base, strategy=name)
        reports[name] = run(cfg, _reference=reference)
    return reports


def sweep(param: str, values, base: ExperimentConfig) -> list[dict]:
    reports = []
    for value in values:
        reports.append(run(base.replace_param(param, value)))
    return reports


# --- persistence -----------------------------------------------------------


def report_json(report: dict, include_timing: bool = True) -> str:
    payload = report if include_timing else {k: v for k, v in report.items() if k != "timing"}
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)


def write_report(report: dict, out_dir: str | Path, name: str | None = None) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        stem = name or f"report_{report['strategy']}"
        paths = [out / f"{stem}.json"]
        paths[0].write_text(report_json(report))

        fm = out / f"{stem}_feature_mse.csv"
        with fm.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "feature_mse"])
            for s, v in enumerate(report["feature_mse"]):
                writer.writerow([s, "" if v is None else repr(v)])
        paths.append(fm)

        bt = out / f"{stem}_bias_trend.csv"
        with bt.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "low_energy", "high_energy"])
            for row in report["bias_trend"]:
                writer.writerow([row["t"], repr(row["low_energy"]), repr(row["high_energy"])])
        paths.append(bt)
        return paths
    except OSError as exc:
        raise OSError(f"failed writing report under {out}: {exc}") from exc


def write_summary_csv(reports: list[dict], path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "strategy",
                    "macs_total",
                    "mac_ratio_vs_no_cache",
                    "latency_s",
                    "speedup_vs_no_cache",
                    "mse_vs_no_cache",
                    "psnr_db_vs_no_cache",
                    "ssim_vs_no_cache",
                ]
            )
            for r in reports:
                fid = r["fidelity"]
                writer.writerow(
                    [
                        r["strategy"],
                        r["macs"]["total"],
                        r["macs"]["ratio_vs_no_cache"],
                        r["timing"]["latency_s"],
                        r["timing"]["speedup_vs_no_cache"],
                        fid["mse_vs_no_cache"],
                        "inf" if fid["psnr_db_vs_no_cache"] is None else fid["psnr_db_vs_no_cache"],
                        "" if fid["ssim_vs_no_cache"] is None else fid["ssim_vs_no_cache"],
                    ]
                )
        return path
    except OSError as exc:
        raise OSError(f"failed writing summary to {path}: {exc}") from exc


def plan_for(config: ExperimentConfig) -> StepPlan:
    strategy = make_strategy(config.strategy, config.cache)
    return build_plan(
        config.sampler.steps,
        config.cache,
        timesteps=config.sampler.timesteps,
        attention_reuse=strategy.attention_enabled,
        cfg_reuse=strategy.cfg_enabled,
    )


def plan_csv(plan: StepPlan) -> str:
    lines = ["step,t,cond_full,uncond_full,attn_reuse,record_cfg_bias"]
    for row in plan.csv_rows():
        lines.append(
            f"{row['step']},{row['t']},{row['cond_full']},{row['uncond_full']},"
            f"{row['attn_reuse']},{row['record_cfg_bias']}"
        )
    return "\n".join(lines) + "\n"
