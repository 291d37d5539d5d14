"""HTTP service wrapping the benchmark harness.

The CLI is a thin client of this app; it talks to it either in-process (ASGI
transport) or over the network (uvicorn).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import bench, svgplot
from .bench import ConfigError, ExperimentConfig

app = FastAPI(title="diffcache", version="0.1.0")


class ModelModel(BaseModel):
    kind: str = "analytic"
    frames: int = 8
    channels: int = 4
    height: int = 32
    width: int = 32
    variance: float = 0.25
    world_seed: int = 7
    num_conditions: int = 4
    layers: int = 4
    embed_dim: int = 32
    heads: int = 4
    patch: int = 4
    condition_vocab: int = 8
    init_seed: int = 0


class SamplerModel(BaseModel):
    steps: int = 30
    guidance_scale: float = 7.5
    seed: int = 0
    condition_id: int = 1
    schedule_kind: str = "linear_beta"
    timesteps: int = 1000
    mode: str = "ddim"


class CacheModel(BaseModel):
    dfr_interval: int = 2
    dfr_weight_mode: str = "linear"
    constant_weight: float = 0.5
    cfg_start_fraction: float = 1.0 / 3.0
    cfg_interval: int = 5
    alpha1: float = 0.2
    alpha2: float = 0.2
    t0_fraction: float = 0.5
    cutoff: float = 0.25


class ExperimentModel(BaseModel):
    strategy: str = "fastercache"
    model: ModelModel = Field(default_factory=ModelModel)
    sampler: SamplerModel = Field(default_factory=SamplerModel)
    cache: CacheModel = Field(default_factory=CacheModel)
    repetitions: int = 5

    def to_config(self) -> ExperimentConfig:
        try:
            return ExperimentConfig.from_dict(self.model_dump())
        except (ConfigError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc


class SweepRequest(BaseModel):
    param: str
    values: list[float]
    config: ExperimentModel = Field(default_factory=ExperimentModel)


class PlotRequest(BaseModel):
    reports: list[dict]


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "schema_version": bench.SCHEMA_VERSION}


@app.post("/run")
def run_experiment(request: ExperimentModel) -> dict:
    try:
        return {"report": bench.run(request.to_config())}
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.post("/ablate")
def run_ablation(request: ExperimentModel) -> dict:
    try:
        return {"reports": bench.ablate(request.to_config())}
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.post("/sweep")
def run_sweep(request: SweepRequest) -> dict:
    try:
        return {"reports": bench.sweep(request.param, request.values, request.config.to_config())}
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


@app.post("/plan")
def dump_plan(request: ExperimentModel) -> dict:
    try:
        plan = bench.plan_for(request.to_config())
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return {"rows": plan.csv_rows(), "csv": bench.plan_csv(plan)}


@app.post("/plot")
def render_plots(request: PlotRequest) -> dict:
    if not request.reports:
        raise HTTPException(status_code=400, detail="no reports supplied")
    for r in request.reports:
        if "strategy" not in r or "feature_mse" not in r:
            raise HTTPException(status_code=400, detail="malformed report payload")
    return {"svgs": svgplot.render_report_plots(request.reports)}
