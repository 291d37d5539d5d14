"""Command-line harness: a thin client of the HTTP service.

By default requests are served in-process; pass --server to target a running
instance (see `diffcache serve`). Exit codes: 0 success, 2 configuration
error, 3 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from . import bench
from .bench import ConfigError
from .strategies import STRATEGY_NAMES

OUT_DIR_ENV = "DIFFCACHE_OUT_DIR"

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ServiceClient:
    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient
            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            click.echo(f"error: service request failed: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)
        if response.status_code in (400, 422):
            click.echo(f"error: invalid configuration: {response.text}", err=True)
            sys.exit(EXIT_CONFIG)
        if response.status_code != 200:
            click.echo(f"error: service failure ({response.status_code}): {response.text}", err=True)
            sys.exit(EXIT_RUNTIME)
        return response.json()


def _config_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON experiment config; flags override file values."),
        click.option("--seed", type=int, default=None),
        click.option("--steps", type=int, default=None),
        click.option("--strategy", type=click.Choice(STRATEGY_NAMES), default=None),
        click.option("--model", "model_kind", type=click.Choice(bench.MODEL_KINDS), default=None),
        click.option("--guidance", type=float, default=None, help="CFG guidance scale."),
        click.option("--schedule", type=click.Choice(("linear_beta", "cosine")), default=None),
        click.option("--mode", type=click.Choice(("ddim", "ancestral")), default=None),
        click.option("--repetitions", type=int, default=None),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                     envvar=OUT_DIR_ENV, help=f"Output directory (or ${OUT_DIR_ENV})."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_payload(config_path, seed, steps, strategy, model_kind, guidance,
                   schedule, mode, repetitions, require_core: bool = True) -> dict:
    if config_path:
        try:
            payload = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot read config {config_path}: {exc}")
    else:
        missing = [name for name, value in
                   (("--seed", seed), ("--steps", steps), ("--strategy", strategy))
                   if require_core and value is None]
        if missing:
            raise click.UsageError(f"without --config these flags are required: {', '.join(missing)}")
        payload = {}
    payload.setdefault("sampler", {})
    payload.setdefault("model", {})
    if seed is not None:
        payload["sampler"]["seed"] = seed
    if steps is not None:
        payload["sampler"]["steps"] = steps
    if guidance is not None:
        payload["sampler"]["guidance_scale"] = guidance
    if schedule is not None:
        payload["sampler"]["schedule_kind"] = schedule
    if mode is not None:
        payload["sampler"]["mode"] = mode
    if strategy is not None:
        payload["strategy"] = strategy
    if model_kind is not None:
        payload["model"]["kind"] = model_kind
    if repetitions is not None:
        payload["repetitions"] = repetitions
    return payload


def _resolve_out(out_dir, config_path, require: bool = True) -> Path:
    if out_dir is None and config_path is None and require:
        raise click.UsageError("an output directory is required: pass --out "
                               f"or set ${OUT_DIR_ENV}")
    return Path(out_dir or ".")


def _write(fn, *args):
    try:
        return fn(*args)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Base URL of a running service; defaults to in-process execution.")
@click.pass_context
def main(ctx, server):
    """Diffusion cache benchmark harness."""
    ctx.obj = ServiceClient(server)


@main.command()
@_config_options
@click.pass_obj
def run(client, config_path, seed, steps, strategy, model_kind, guidance,
        schedule, mode, repetitions, out_dir):
    """Run one strategy against the full-inference reference."""
    payload = _build_payload(config_path, seed, steps, strategy, model_kind,
                             guidance, schedule, mode, repetitions)
    out = _resolve_out(out_dir, config_path)
    report = client.post("/run", payload)["report"]
    paths = _write(bench.write_report, report, out)
    fid = report["fidelity"]
    psnr_s = "inf" if fid["psnr_db_vs_no_cache"] is None else f"{fid['psnr_db_vs_no_cache']:.2f}"
    click.echo(f"{report['strategy']}: speedup {report['timing']['speedup_vs_no_cache']:.2f}x, "
               f"MAC ratio {report['macs']['ratio_vs_no_cache']:.3f}, PSNR {psnr_s} dB")
    click.echo(f"wrote {', '.join(str(p) for p in paths)}")


@main.command()
@_config_options
@click.pass_obj
def ablate(client, config_path, seed, steps, strategy, model_kind, guidance,
           schedule, mode, repetitions, out_dir):
    """Run the full strategy grid with shared seeds."""
    payload = _build_payload(config_path, seed, steps, strategy or "fastercache",
                             model_kind, guidance, schedule, mode, repetitions)
    out = _resolve_out(out_dir, config_path)
    reports = client.post("/ablate", payload)["reports"]
    for name, report in reports.items():
        _write(bench.write_report, report, out, f"ablate_{name}")
    path = _write(bench.write_summary_csv, list(reports.values()), out / "ablation.csv")
    click.echo(f"wrote {path}")


@main.command()
@click.option("--param", required=True, type=click.Choice(sorted(bench.SWEEP_PARAMS)))
@click.option("--values", required=True, help="Comma-separated parameter values.")
@_config_options
@click.pass_obj
def sweep(client, param, values, config_path, seed, steps, strategy, model_kind,
          guidance, schedule, mode, repetitions, out_dir):
    """Sweep one parameter, one report per value."""
    payload = _build_payload(config_path, seed, steps, strategy, model_kind,
                             guidance, schedule, mode, repetitions)
    try:
        value_list = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise click.UsageError(f"bad --values: {exc}")
    if not value_list:
        raise click.UsageError("--values is empty")
    out = _resolve_out(out_dir, config_path)
    reports = client.post("/sweep", {"param": param, "values": value_list,
                                     "config": payload})["reports"]
    for value, report in zip(value_list, reports):
        tag = f"{value:g}".replace(".", "p")
        _write(bench.write_report, report, out, f"sweep_{param}_{tag}")
    path = _write(bench.write_summary_csv, reports, out / f"sweep_{param}.csv")
    click.echo(f"wrote {path}")


@main.command("plan-dump")
@_config_options
@click.pass_obj
def plan_dump(client, config_path, seed, steps, strategy, model_kind, guidance,
              schedule, mode, repetitions, out_dir):
    """Write the step plan as CSV for auditability."""
    payload = _build_payload(config_path, seed, steps, strategy, model_kind,
                             guidance, schedule, mode, repetitions)
    out = _resolve_out(out_dir, config_path)
    csv_text = client.post("/plan", payload)["csv"]

    def write():
        out.mkdir(parents=True, exist_ok=True)
        path = out / "plan.csv"
        path.write_text(csv_text)
        return path

    path = _write(write)
    click.echo(f"wrote {path}")


@main.command()
@click.argument("report_paths", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              envvar=OUT_DIR_ENV)
@click.pass_obj
def plot(client, report_paths, out_dir):
    """Render SVG charts from saved report JSON files."""
    reports = []
    for p in report_paths:
        try:
            reports.append(json.loads(Path(p).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            click.echo(f"error: cannot read report {p}: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)
    out = Path(out_dir or ".")
    svgs = client.post("/plot", {"reports": reports})["svgs"]

    def write():
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, svg in svgs.items():
            path = out / name
            path.write_text(svg)
            paths.append(path)
        return paths

    paths = _write(write)
    click.echo(f"wrote {', '.join(str(p) for p in paths)}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Launch the HTTP service."""
    import uvicorn

    uvicorn.run("diffcache.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
