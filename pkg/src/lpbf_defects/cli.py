"""Command-line pipeline driver and thin client for the inference service.

Stage subcommands run locally against the config; ``predict`` can either
load the local index or delegate to a running service via ``--addr``.

Exit codes: 0 success, 1 config error, 2 stage error.
"""

from __future__ import annotations

import json
import sys

import click

from .config import ConfigInvalid, PipelineConfig, load_config
from .core import ToolkitError
from . import pipeline
from .parsing import load_lexicon, parse_baseline, parse_prompt
from .predictor import predict as predict_params
from .service import BindFailure, serve as run_service

_CONFIG_EXIT = 1
_STAGE_EXIT = 2


def _fail(code: int, error: Exception) -> None:
    message = {"error": type(error).__name__, "message": str(error)}
    click.echo(json.dumps(message), err=True)
    sys.exit(code)


def _load(config: str, seed: int | None = None, k: int | None = None, out: str | None = None) -> PipelineConfig:
    try:
        return load_config(config, seed=seed, k=k, out=out)
    except ConfigInvalid as exc:
        _fail(_CONFIG_EXIT, exc)
        raise  # unreachable; keeps type checkers happy


def _run_stage(stage_fn, *args):
    try:
        return stage_fn(*args)
    except (ToolkitError, OSError, ValueError) as exc:
        _fail(_STAGE_EXIT, exc)


_config_option = click.option(
    "--config", "-c", default="pipeline.yaml", show_default=True, help="Pipeline config file."
)
_out_option = click.option("--out", default=None, help="Override the configured output directory.")


@click.group()
def cli() -> None:
    """Melt pool defect dataset and inference toolkit."""


@cli.command()
@_config_option
@_out_option
def ingest(config: str, out: str | None) -> None:
    """Read the configured source tables into record files."""
    cfg = _load(config, out=out)
    reports = _run_stage(pipeline.stage_ingest, cfg)
    click.echo(json.dumps({name: r.to_dict() for name, r in reports.items()}, indent=2))


@cli.command()
@_config_option
@_out_option
def label(config: str, out: str | None) -> None:
    """Populate defect labels from the criteria."""
    cfg = _load(config, out=out)
    counts = _run_stage(pipeline.stage_label, cfg)
    click.echo(json.dumps(counts, indent=2))


@cli.command()
@_config_option
@_out_option
def augment(config: str, out: str | None) -> None:
    """Expand records over the hatch/layer grid."""
    cfg = _load(config, out=out)
    counts = _run_stage(pipeline.stage_augment, cfg)
    click.echo(json.dumps(counts, indent=2))


@cli.command()
@_config_option
@_out_option
@click.option("--seed", type=int, default=None, help="Override the split seed.")
def split(config: str, out: str | None, seed: int | None) -> None:
    """Assign train/test/validation splits per source group."""
    cfg = _load(config, seed=seed, out=out)
    summary = _run_stage(pipeline.stage_split, cfg)
    click.echo(json.dumps(summary, indent=2))


@cli.command("gen-baseline")
@_config_option
@_out_option
def gen_baseline(config: str, out: str | None) -> None:
    """Render the separated-format corpus, one file per split."""
    cfg = _load(config, out=out)
    counts = _run_stage(pipeline.stage_gen_baseline, cfg)
    click.echo(json.dumps(counts, indent=2))


@cli.command("gen-prompt")
@_config_option
@_out_option
def gen_prompt(config: str, out: str | None) -> None:
    """Render the templated prompt corpus, one file per split."""
    cfg = _load(config, out=out)
    counts = _run_stage(pipeline.stage_gen_prompt, cfg)
    click.echo(json.dumps(counts, indent=2))


@cli.command()
@click.option("--prompt", "prompt_text", default=None, help="Free-form prompt to parse.")
@click.option("--baseline", "baseline_text", default=None, help="Separated-format text to parse.")
def parse(prompt_text: str | None, baseline_text: str | None) -> None:
    """Extract process parameters from text and print the parse report."""
    if (prompt_text is None) == (baseline_text is None):
        raise click.UsageError("provide exactly one of --prompt or --baseline")
    try:
        if prompt_text is not None:
            result = parse_prompt(prompt_text, load_lexicon())
        else:
            result = parse_baseline(baseline_text)
    except (ToolkitError, ValueError) as exc:
        _fail(_STAGE_EXIT, exc)
        return
    click.echo(json.dumps(result.to_dict(), indent=2))


@cli.command()
@_config_option
@_out_option
@click.option("--prompt", "prompt_text", default=None, help="Free-form prompt describing the build.")
@click.option("--params", "params_json", default=None, help="Structured parameters as JSON.")
@click.option("--k", type=int, default=None, help="Neighbors to consult (odd).")
@click.option("--addr", default=None, help="Delegate to a running service, e.g. 127.0.0.1:8000.")
def predict(
    config: str,
    out: str | None,
    prompt_text: str | None,
    params_json: str | None,
    k: int | None,
    addr: str | None,
) -> None:
    """Predict defect labels for one build condition."""
    if (prompt_text is None) == (params_json is None):
        raise click.UsageError("provide exactly one of --prompt or --params")

    if addr is not None:
        _predict_remote(addr, prompt_text, params_json)
        return

    cfg = _load(config, k=k, out=out)
    try:
        index = pipeline.build_or_load_index(cfg)
        if prompt_text is not None:
            parsed = parse_prompt(prompt_text, load_lexicon())
            if not parsed.bound_fields():
                raise ToolkitError(f"no process parameters found in prompt: {prompt_text!r}")
        else:
            # same wire schema as the service, so --addr and local agree
            from .service import StructuredParams, params_from_structured

            parsed = params_from_structured(StructuredParams(**json.loads(params_json)))
        prediction = predict_params(parsed.params, index, cfg.k)
    except (ToolkitError, OSError, ValueError, json.JSONDecodeError) as exc:
        _fail(_STAGE_EXIT, exc)
        return
    payload = prediction.to_dict()
    payload["parsed"] = parsed.to_dict()
    click.echo(json.dumps(payload, indent=2))


def _predict_remote(addr: str, prompt_text: str | None, params_json: str | None) -> None:
    import httpx

    if not addr.startswith("http"):
        addr = f"http://{addr}"
    if prompt_text is not None:
        body = {"prompt": prompt_text}
    else:
        try:
            body = {"params": json.loads(params_json)}
        except json.JSONDecodeError as exc:
            _fail(_STAGE_EXIT, exc)
            return
    try:
        response = httpx.post(f"{addr}/predict", json=body, timeout=30.0)
    except httpx.HTTPError as exc:
        _fail(_STAGE_EXIT, exc)
        return
    click.echo(json.dumps(response.json(), indent=2))
    if response.status_code != 200:
        sys.exit(_STAGE_EXIT)


@cli.command("eval")
@_config_option
@_out_option
@click.option("--k", type=int, default=None, help="Neighbors to consult (odd).")
def eval_cmd(config: str, out: str | None, k: int | None) -> None:
    """Score k-NN predictions on the held-out splits."""
    cfg = _load(config, k=k, out=out)
    reports = _run_stage(pipeline.stage_eval, cfg)
    click.echo(json.dumps(reports, indent=2, sort_keys=True))


@cli.command()
@_config_option
@_out_option
def pca(config: str, out: str | None) -> None:
    """Project labeled records onto the top-2 feature components."""
    cfg = _load(config, out=out)
    paths = _run_stage(pipeline.stage_pca, cfg)
    click.echo(json.dumps({"csv": str(paths[0]), "image": str(paths[1])}))


@cli.command()
@_config_option
@_out_option
@click.option("--addr", default="127.0.0.1:8000", show_default=True, help="host:port to bind.")
@click.option("--k", type=int, default=None, help="Neighbors to consult (odd).")
def serve(config: str, out: str | None, addr: str, k: int | None) -> None:
    """Serve the inference endpoint against the built or persisted index."""
    cfg = _load(config, k=k, out=out)
    try:
        index = pipeline.build_or_load_index(cfg)
        run_service(index, load_lexicon(), addr, cfg.k)
    except (BindFailure, ToolkitError, OSError) as exc:
        _fail(_STAGE_EXIT, exc)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
