"""Command-line surface: one subcommand per pipeline stage."""
from __future__ import annotations

import sys

import click

from .pipeline import Config, Engine, PipelineError


def _engine(ctx) -> Engine:
    return Engine(Config.from_yaml(ctx.obj["config"]))


@click.group()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="YAML config; the run seed lives here, never in a flag.")
@click.pass_context
def main(ctx, config_path):
    """Weak-supervision document screening with human-in-the-loop rounds."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config_path


def _run(fn):
    try:
        fn()
    except Exception as exc:  # uniform nonzero exit with a diagnostic
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["jsonl", "tsv"]))
@click.pass_context
def ingest(ctx, input_path, fmt):
    """Load a document corpus into the work directory."""
    def go():
        n = _engine(ctx).ingest(input_path, fmt)
        click.echo(f"ingested {n} documents")
    _run(go)


@main.command("import-labels")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.pass_context
def import_labels(ctx, input_path):
    """Import human annotations from CSV."""
    def go():
        n = _engine(ctx).import_labels(input_path)
        click.echo(f"imported {n} annotation records")
    _run(go)


@main.command()
@click.pass_context
def split(ctx):
    """Assign annotated documents to the eval set and training folds."""
    def go():
        assignment = _engine(ctx).split()
        sizes = [len(f) for f in assignment.folds]
        click.echo(f"eval={len(assignment.eval_set)} folds={sizes}")
    _run(go)


@main.command("train-lfs")
@click.pass_context
def train_lfs(ctx):
    """Train the fold-based feature labeling functions."""
    def go():
        trained, skipped = _engine(ctx).train_lfs()
        click.echo(f"trained {len(trained)} models" + (f", skipped {skipped}" if skipped else ""))
    _run(go)


@main.command()
@click.pass_context
def fit(ctx):
    """Estimate labeling-function accuracies and fit calibration."""
    def go():
        state = _engine(ctx).fit()
        for lf_id, a in zip(state.lf_ids, state.accuracies.accuracies):
            click.echo(f"{lf_id}\t{a:.4f}")
    _run(go)


@main.command()
@click.pass_context
def predict(ctx):
    """Score every document and write predictions.tsv."""
    def go():
        candidates = _engine(ctx).predict()
        click.echo(f"predicted {len(candidates)} documents")
    _run(go)


@main.command()
@click.pass_context
def select(ctx):
    """Pick the next annotation batch by uncertainty."""
    def go():
        batch = _engine(ctx).select()
        click.echo(f"selected {len(batch)} documents")
    _run(go)


@main.command("advance-round")
@click.pass_context
def advance_round(ctx):
    """Complete a full round: split, retrain, refit, predict, select."""
    def go():
        state = _engine(ctx).advance_round()
        click.echo(f"round {state['round']}, positive rate {state['prev_positive_rate']:.4f}")
    _run(go)


@main.command("eval")
@click.option("--threshold", type=float, default=None)
@click.pass_context
def eval_cmd(ctx, threshold):
    """AUC / sensitivity / specificity on the evaluation split."""
    def go():
        result = _engine(ctx).evaluate(threshold)
        click.echo(f"auc\t{result['auc']!r}")
        click.echo(f"sensitivity\t{result['sensitivity']!r}")
        click.echo(f"specificity\t{result['specificity']!r}")
    _run(go)


@main.command()
@click.pass_context
def ablate(ctx):
    """Report the AUC drop from removing each labeling-function group."""
    def go():
        for row in _engine(ctx).ablate():
            if not row.ablatable:
                click.echo(f"{row.group}\tnot ablatable")
            else:
                click.echo(f"{row.group}\t{row.auc_without:.4f}\t{row.delta_from_full:+.4f}")
    _run(go)


@main.command()
@click.pass_context
def terms(ctx):
    """Term-frequency report from the grammar recognizer."""
    def go():
        report = _engine(ctx).term_report()
        for phrase, count in report.counts:
            click.echo(f"{phrase}\t{count}")
    _run(go)


@main.command()
@click.option("--feature", default="entities", type=click.Choice(["entities", "mesh_terms"]))
@click.option("--background", "background_path", default=None, type=click.Path(exists=True))
@click.pass_context
def enrich(ctx, feature, background_path):
    """Feature enrichment of predicted-relevant documents vs background."""
    def go():
        rows = _engine(ctx).enrich(feature, background_path)
        for row in rows:
            click.echo(
                f"{row.feature_id}\t{row.rate_target:.3f}\t{row.rate_background:.3f}"
                f"\t{row.p_value:.3e}"
            )
    _run(go)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.pass_context
def serve(ctx, host, port):
    """Run the annotation queue HTTP service."""
    def go():
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(_engine(ctx)), host=host, port=port)
    _run(go)


if __name__ == "__main__":
    main()
