"""Command line interface.

    ocrflow init <name> --root <root>
    ocrflow run <name> --steps preprocess,segment-dummy,... [--pages ...]
                 [--threads N] [--set step.param=value]
    ocrflow eval <name>
    ocrflow import-model <dir> / export-model <name> <target>
    ocrflow serve <name> --port P
"""

import json

import click

from ocrflow import evaluate as evaluate_mod
from ocrflow import flow as flow_mod
from ocrflow import project as project_mod


@click.group()
def main():
    """Semi-automatic OCR workflow engine."""


@main.command()
@click.argument("name")
@click.option("--root", default=".", show_default=True, help="workspace root")
def init(name, root):
    """Register the scans in <root>/data/NAME/input as pages."""
    proj, page_ids, failures = project_mod.init_project(root, name)
    click.echo(f"initialized {len(page_ids)} pages in {proj.processing_dir}")
    for filename, reason in failures.items():
        click.echo(f"  skipped {filename}: {reason}", err=True)


def _parse_sets(values):
    params = {}
    for item in values:
        key, _, raw = item.partition("=")
        step, _, param = key.partition(".")
        if not step or not param or not raw:
            raise click.BadParameter(f"expected step.param=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        params.setdefault(step, {})[param] = value
    return params


@main.command()
@click.argument("name")
@click.option("--root", default=".", show_default=True)
@click.option("--steps", required=True, help="comma-separated step list")
@click.option("--pages", default="all", help="comma-separated page ids or 'all'")
@click.option("--threads", default=0, type=int, help="0 = available maximum")
@click.option("--set", "sets", multiple=True, help="step.param=value")
def run(name, root, steps, pages, threads, sets):
    """Execute a process flow over the project's pages."""
    proj = project_mod.open_project(root, name)
    config = flow_mod.ProcessFlowConfig(
        steps=[s.strip() for s in steps.split(",") if s.strip()],
        params=_parse_sets(sets),
        pages="all" if pages == "all" else [p.strip() for p in pages.split(",")],
        threads=threads,
    )
    try:
        job = flow_mod.run_flow(proj, config)
    except flow_mod.FlowError as e:
        raise click.ClickException(str(e))
    failed = 0
    for pid, state in job.page_state.items():
        if state["state"] == "failed":
            failed += 1
            click.echo(f"  {pid} failed in {state['step']}: {state['reason']}", err=True)
    click.echo(
        f"job {job.job_id}: {len(job.page_state) - failed} pages done, {failed} failed"
    )
    if failed:
        raise SystemExit(1)


@main.command("eval")
@click.argument("name")
@click.option("--root", default=".", show_default=True)
@click.option("--top-k", default=10, type=int)
def eval_command(name, root, top_k):
    """CER and confusion table over all GT/OCR pairs."""
    proj = project_mod.open_project(root, name)
    try:
        report, table = flow_mod.run_evaluation(proj, top_k=top_k)
    except flow_mod.FlowError as e:
        raise click.ClickException(str(e))
    click.echo(f"CER: {report.cer:.2f}%  ({report.edit_distance} errors / "
               f"{report.gt_chars} GT chars)")
    click.echo(evaluate_mod.render_confusion(table))


@main.command("import-model")
@click.argument("source", type=click.Path(exists=True, file_okay=False))
@click.option("--root", default=".", show_default=True)
@click.option("--name", default=None)
def import_model(source, root, name):
    """Copy an external model directory into <root>/models."""
    from pathlib import Path

    final = project_mod.import_model(Path(root) / "models", source, name)
    click.echo(f"imported as {final}")


@main.command("export-model")
@click.argument("name")
@click.argument("target", type=click.Path(file_okay=False))
@click.option("--root", default=".", show_default=True)
def export_model(name, target, root):
    """Copy a trained model out of <root>/models."""
    from pathlib import Path

    try:
        path = project_mod.export_model(Path(root) / "models", name, target)
    except project_mod.ProjectError as e:
        raise click.ClickException(str(e))
    click.echo(f"exported to {path}")


@main.command()
@click.argument("name")
@click.option("--root", default=".", show_default=True)
@click.option("--port", default=8000, type=int)
@click.option("--host", default="127.0.0.1")
def serve(name, root, port, host):
    """Serve the HTTP API for the correction UI."""
    import uvicorn

    from ocrflow.service import create_app

    proj = project_mod.open_project(root, name)
    uvicorn.run(create_app(proj), host=host, port=port)


if __name__ == "__main__":
    main()
