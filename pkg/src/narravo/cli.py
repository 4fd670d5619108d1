"""Command line entry points: generate, validate, eval, serve."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import NarravoError
from .gateway import BackendConfig, PromptStrategy
from .pipeline import PipelineConfig, evaluate_batch, run_pipeline
from .script import parse_script, validate_script
from .service import ServiceConfig, create_app


@click.group()
def main():
    """Object-driven narrative pipeline and evaluation harness."""


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--strategy", default="s2", type=click.Choice(["s1", "s2", "s3"]))
@click.option("--backend", "backend_kind", default="replay",
              type=click.Choice(["live", "replay"]))
@click.option("--fixtures", default="data/fixtures", type=click.Path(),
              help="Fixture directory for the replay backend.")
@click.option("--model", default=None, help="Model name (and fixture key part).")
@click.option("--endpoint", default=None, help="Live backend URL (or NARRAVO_VLM_URL).")
@click.option("--out", "out_dir", default="bundles", type=click.Path())
@click.option("--max-fragments", default=13, show_default=True)
@click.option("--seed", default="", help="Variation token baked into the prompt.")
@click.option("--threshold", default=0.5, show_default=True,
              help="Anchor match threshold.")
def generate(scene_path, strategy, backend_kind, fixtures, model, endpoint,
             out_dir, max_fragments, seed, threshold):
    """Run the full pipeline for one scene and write a bundle."""
    if backend_kind == "replay":
        backend = BackendConfig.replay(fixtures, model=model or "replay")
    else:
        backend = BackendConfig.live(endpoint=endpoint, model=model or "gpt-4o")
    config = PipelineConfig(
        scene_path=Path(scene_path),
        strategy=PromptStrategy.from_tag(strategy),
        backend=backend,
        output_dir=Path(out_dir) / strategy,
        anchor_threshold=threshold,
        max_fragments=max_fragments,
        seed=seed,
    )
    try:
        bundle = run_pipeline(config)
    except NarravoError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"bundle written to {bundle.output_dir}")
    click.echo(f"objects: {len(bundle.script.objects)}  "
               f"beats: {len(bundle.script.mainstory)}  "
               f"fragments: {len(bundle.script.fragments)}")
    click.echo(f"bound anchors: {len(bundle.anchors.bindings)}  "
               f"unbound: {list(bundle.anchors.unbound) or 'none'}")
    click.echo(f"progressive anchors: {list(bundle.progressive_anchors)}")
    if bundle.validation.warnings:
        for violation in bundle.validation.warnings:
            click.echo(f"warning: {violation.code} at {violation.path}")


@main.command()
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
def validate(script_path):
    """Validate an interchange script; exit 1 on error-severity violations."""
    try:
        script = parse_script(Path(script_path).read_text(encoding="utf-8"))
    except NarravoError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(1)
    report = validate_script(script)
    if report.ok:
        click.echo(
            f"OK: {len(script.objects)} objects, {len(script.mainstory)} beats, "
            f"{len(script.fragments)} fragments"
        )
        return
    for violation in report.violations:
        click.echo(f"{violation.severity}: {violation.code} {violation.path} "
                   f"- {violation.message}")
    if report.errors:
        sys.exit(1)


@main.command("eval")
@click.option("--inputs", "inputs_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def eval_command(inputs_dir, out_dir):
    """Evaluate recorded metric inputs into per-scenario and cross reports."""
    try:
        result = evaluate_batch(inputs_dir, out_dir)
    except NarravoError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(result.cross_report.render_text())
    for file, message in result.errors:
        click.echo(f"skipped {file}: {message}", err=True)


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(port, host, config_path):
    """Start the HTTP service."""
    import uvicorn

    app = create_app(ServiceConfig.from_file(config_path))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
