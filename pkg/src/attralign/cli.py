"""Command-line interface: data prep, training, attribution, and evaluation runs."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__, synth
from .attribution import (
    group_attributions,
    linear_contributions,
    rank_features,
    tree_shap,
)
from .data import load_dataset, prepare, save_dataset
from .harness import load_plan, load_records, run_experiment, stratified_sample
from .models import (
    GbdtParams,
    GbdtSearchSpace,
    LogisticModel,
    evaluate_model,
    fit_gbdt,
    load_model,
    save_model,
    train_gbdt,
    train_logistic,
)
from .report import write_report


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Train credit-risk baselines, attribute predictions, and score LLM rankings."""


@main.command("make-synthetic")
@click.option("--out", type=click.Path(), required=True, help="CSV path to write.")
@click.option("--rows", type=int, default=synth.DEFAULT_ROWS, show_default=True)
@click.option("--seed", type=int, default=20_240_101, show_default=True)
def make_synthetic(out: str, rows: int, seed: int) -> None:
    """Generate the bundled synthetic loan corpus."""
    n = synth.write_corpus(out, n_rows=rows, seed=seed)
    click.echo(f"wrote {n} rows to {out}")


@main.command("prepare-data")
@click.option("--csv", "csv_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="Dataset directory to write.")
@click.option("--ratio", type=float, default=0.7, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--filter-target", is_flag=True,
    help="Drop rows whose outcome is neither declared label instead of failing.",
)
def prepare_data(csv_path, schema_path, out, ratio, seed, filter_target) -> None:
    """Clean, encode, split, and impute a raw CSV into a dataset directory."""
    ds, schema, split, report = prepare(
        csv_path, schema_path, ratio=ratio, seed=seed, filter_target=filter_target
    )
    save_dataset(ds, schema, out, split=split, prep_report=report)
    click.echo(
        f"encoded {ds.n_rows} rows x {ds.n_encoded} columns "
        f"({len(ds.original_names)} features); train={split.train_idx.size} "
        f"test={split.test_idx.size}"
    )
    for col, reason in report["dropped_columns"]:
        click.echo(f"dropped {col}: {reason}")


@main.command()
@click.option("--model", "kind", type=click.Choice(["logistic", "gbdt"]), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--schema", type=click.Path(exists=True), default=None,
              help="Optional schema override; defaults to the dataset's own echo.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--lambda-grid", default="0.01,0.1,1,10,100", show_default=True,
              help="Logistic penalty grid.")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--trials", type=int, default=30, show_default=True,
              help="GBDT random-search budget.")
@click.option("--gbdt-params", default=None,
              help="JSON GbdtParams; skips the hyperparameter search.")
def train(kind, data_dir, schema, seed, out, lambda_grid, folds, trials, gbdt_params) -> None:
    """Train a baseline on the dataset's training split."""
    ds, _, split = load_dataset(data_dir)
    if split is None:
        raise click.ClickException("dataset has no persisted split; rerun prepare-data")
    x = ds.matrix[split.train_idx]
    y = ds.labels[split.train_idx]
    if kind == "logistic":
        grid = [float(v) for v in lambda_grid.split(",")]
        model = train_logistic(x, y, grid, folds=folds, seed=seed)
        click.echo(f"logistic trained: lambda={model.lambda_:g}")
    else:
        if gbdt_params:
            params = GbdtParams(**json.loads(gbdt_params))
            model = fit_gbdt(x, y, params)
            click.echo(f"gbdt fit with fixed params: {params}")
        else:
            model = train_gbdt(x, y, GbdtSearchSpace(), folds=folds, seed=seed, n_trials=trials)
            click.echo(f"gbdt trained: {model.n_rounds} rounds, lr={model.learning_rate:g}")
    save_model(model, out)
    click.echo(f"saved {kind} model to {out}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--split", "which", type=click.Choice(["test", "train"]), default="test",
              show_default=True)
@click.option("--tag", default=None, help="Model name in the report; defaults to the file stem.")
@click.option("--out", type=click.Path(), default=None,
              help="Metrics JSON to create or update.")
def evaluate(model_path, data_dir, threshold, which, tag, out) -> None:
    """Score a trained model and print a metrics row (KS reported x100)."""
    ds, _, split = load_dataset(data_dir)
    if split is None:
        raise click.ClickException("dataset has no persisted split")
    idx = split.test_idx if which == "test" else split.train_idx
    model = load_model(model_path)
    metrics = evaluate_model(model.predict_proba(ds.matrix[idx]), ds.labels[idx], threshold)
    tag = tag or Path(model_path).stem
    click.echo(
        f"{tag}: PR-AUC={metrics.pr_auc:.4f} Macro-F1={metrics.macro_f1:.4f} "
        f"KS={metrics.ks * 100:.2f} (threshold={threshold})"
    )
    if out:
        path = Path(out)
        rows = []
        if path.exists():
            rows = [r for r in json.loads(path.read_text(encoding="utf-8")) if r["model"] != tag]
        rows.append({"model": tag, **metrics.as_dict()})
        path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
        click.echo(f"updated {out}")


def _parse_rows(spec: str, ds, split) -> list[int]:
    if spec == "test":
        return [int(i) for i in split.test_idx]
    if spec == "train":
        return [int(i) for i in split.train_idx]
    if spec == "all":
        return list(range(ds.n_rows))
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(v) for v in spec.split(",")]


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--rows", default="test", show_default=True,
              help="Row spec: 'test', 'train', 'all', 'a:b', or 'i,j,k'.")
@click.option("--out", type=click.Path(), required=True)
def attribute(model_path, data_dir, rows, out) -> None:
    """Write one attribution record per instance (JSON lines)."""
    ds, _, split = load_dataset(data_dir)
    model = load_model(model_path)
    row_ids = _parse_rows(rows, ds, split)
    with Path(out).open("w", encoding="utf-8") as fh:
        for row in row_ids:
            x = ds.matrix[row]
            if isinstance(model, LogisticModel):
                attr = linear_contributions(model, x)
            else:
                attr = tree_shap(model, x)
            grouped = group_attributions(attr, ds.group_index)
            ranking = rank_features(grouped)
            fh.write(
                json.dumps(
                    {
                        "instance_id": row,
                        "baseline": attr.baseline,
                        "model_output": attr.model_output,
                        "grouped": grouped,
                        "ranking": ranking.names,
                    }
                )
                + "\n"
            )
    click.echo(f"wrote {len(row_ids)} attribution records to {out}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--per-cell", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def sample(model_path, data_dir, threshold, per_cell, seed, out) -> None:
    """Stratified confusion-cell sample of test instances."""
    ds, _, split = load_dataset(data_dir)
    if split is None:
        raise click.ClickException("dataset has no persisted split")
    model = load_model(model_path)
    scores = model.predict_proba(ds.matrix[split.test_idx])
    sampled = stratified_sample(
        split.test_idx, scores, ds.labels[split.test_idx], threshold, per_cell, seed
    )
    Path(out).write_text(json.dumps(sampled, indent=2) + "\n", encoding="utf-8")
    total = sum(len(v) for v in sampled.values())
    click.echo(f"sampled {total} instances ({per_cell} per cell) to {out}")


@main.command()
@click.option("--rq", type=click.Choice(["1", "2"]), required=True)
@click.option("--plan", "plan_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["live", "record", "replay"]), required=True)
@click.option("--out", type=click.Path(), required=True, help="Run directory.")
@click.option("--workers", type=int, default=4, show_default=True)
def run(rq, plan_path, mode, out, workers) -> None:
    """Execute an RQ1 or RQ2 evaluation plan."""
    plan, plan_hash = load_plan(plan_path)
    records = run_experiment(
        plan, int(rq), mode, out, plan_hash=plan_hash, max_workers=workers
    )
    n_errors = sum(1 for r in records if r.get("error"))
    click.echo(f"completed {len(records)} records ({n_errors} errors) in {out}")
    if n_errors:
        sys.exit(1)


@main.command()
@click.option("--records", "records_path", type=click.Path(exists=True), required=True,
              help="Run directory or records.jsonl file.")
@click.option("--metrics", "metrics_path", type=click.Path(exists=True), default=None,
              help="Optional model metrics JSON from `evaluate --out`.")
@click.option("--out", type=click.Path(), default=None,
              help="Report directory; defaults to <run>/report.")
def report(records_path, metrics_path, out) -> None:
    """Render tables, markdown, and figures from persisted records."""
    records = load_records(records_path)
    metrics = None
    if metrics_path:
        metrics = json.loads(Path(metrics_path).read_text(encoding="utf-8"))
    base = Path(records_path)
    out_dir = Path(out) if out else (base if base.is_dir() else base.parent) / "report"
    written = write_report(records, out_dir, model_metrics=metrics)
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
