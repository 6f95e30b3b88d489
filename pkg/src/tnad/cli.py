"""Command-line surface.

Subcommands: ``train``, ``score``, ``explain``, ``mi``, ``benchmark``.
Exit codes: 0 on success, 2 on data/usage errors, 3 on numerical
integrity errors.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .benchmark import RunConfig, new_model, run_benchmark
from .data import DatasetSpec, load_csv
from .encoding import LegendreFeatureMap, fit_rescaler
from .errors import NumericalError, TnadError
from .explain import all_to_all_mi, explain_sample
from .metrics import histogram_mi, score_samples
from .persist import load_model, save_model
from .training import fit


def _load_config(path, seed) -> RunConfig:
    config = RunConfig.from_json(path) if path else RunConfig()
    if seed is not None:
        config = replace(config, train=replace(config.train, seed=seed))
    return config


def _dataset_spec(data, label_column, anomaly_labels) -> DatasetSpec:
    return DatasetSpec(
        path=data,
        label_column=label_column,
        anomaly_labels=tuple(anomaly_labels),
    )


@click.group()
def cli():
    """Tensor-network anomaly detection."""


@cli.command()
@click.option("--data", required=True, type=click.Path(exists=True), help="Training CSV.")
@click.option("--model", "model_kind", type=click.Choice(["mps", "ttn"]), default="mps",
              show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON run configuration.")
@click.option("--seed", type=int, default=None, help="Override the training seed.")
@click.option("--label-column", default=None,
              help="Column to drop before training (training is unsupervised).")
@click.option("--out", required=True, type=click.Path(), help="Model file to write.")
def train(data, model_kind, config_path, seed, label_column, out):
    """Train a model on a CSV of raw features (unlabeled)."""
    config = _load_config(config_path, seed)
    features, _ = load_csv(_dataset_spec(data, label_column, ()))
    encoder = LegendreFeatureMap(
        n_functions=config.phys_dim,
        rescaler=fit_rescaler(features, margin=config.margin),
    )
    model = new_model(model_kind, features.shape[1], config, config.train.seed, encoder)
    report = fit(model, encoder.encode_batch(features), config.train)
    save_model(out, model)
    report_path = Path(out).with_suffix(Path(out).suffix + ".report.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=2))
    click.echo(f"model written to {out}")
    click.echo(f"training report written to {report_path}")
    if report.nll_trace:
        click.echo(f"final NLL: {report.nll_trace[-1]:.6f}")


@cli.command()
@click.option("--model-file", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--label-column", default=None, help="Optional truth column echoed to the output.")
@click.option("--anomaly-label", "anomaly_labels", multiple=True,
              help="Label value counting as anomalous (repeatable).")
@click.option("--out", required=True, type=click.Path(), help="Scores CSV to write.")
def score(model_file, data, label_column, anomaly_labels, out):
    """Score samples; higher NLL means more anomalous."""
    model = load_model(model_file)
    features, labels = load_csv(_dataset_spec(data, label_column, anomaly_labels))
    scores = score_samples(model, model.encoder.encode_batch(features))
    with open(out, "w", newline="") as handle:
        writer = csv.writer(handle)
        if labels is None:
            writer.writerow(["sample_id", "nll"])
            writer.writerows((i, f"{s:.10g}") for i, s in enumerate(scores))
        else:
            writer.writerow(["sample_id", "nll", "label"])
            writer.writerows(
                (i, f"{s:.10g}", int(l)) for i, (s, l) in enumerate(zip(scores, labels))
            )
    click.echo(f"scores for {len(scores)} samples written to {out}")


@cli.command()
@click.option("--model-file", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--sample", "sample_id", type=int, default=0, show_default=True,
              help="Row index of the sample to explain.")
@click.option("--k-sigma", type=float, default=1.0, show_default=True,
              help="Flag features deviating more than this many expected std.")
@click.option("--label-column", default=None, help="Column to drop from the features.")
@click.option("--no-conditionals", is_flag=True, help="Skip conditional expected values.")
@click.option("--out", required=True, type=click.Path(), help="Explanation JSON to write.")
def explain(model_file, data, sample_id, k_sigma, label_column, no_conditionals, out):
    """Explain one sample: flags and conditional expected values."""
    model = load_model(model_file)
    features, _ = load_csv(_dataset_spec(data, label_column, ()))
    if not 0 <= sample_id < len(features):
        raise click.ClickException(f"sample {sample_id} out of range (0..{len(features) - 1})")
    explanation = explain_sample(
        model, features[sample_id], k_sigma=k_sigma, sample_id=sample_id,
        with_conditionals=not no_conditionals,
    )
    Path(out).write_text(json.dumps(explanation.to_dict(), indent=2))
    flagged = explanation.flagged_indices()
    click.echo(f"sample {sample_id}: NLL {explanation.nll:.4f}, "
               f"{len(flagged)} flagged feature(s) -> {out}")


@cli.command()
@click.option("--from", "source", type=click.Choice(["model", "data"]), required=True,
              help="Model-side MI or histogram estimate from raw data.")
@click.option("--model-file", type=click.Path(exists=True), default=None)
@click.option("--data", type=click.Path(exists=True), default=None)
@click.option("--label-column", default=None, help="Column to drop from the features.")
@click.option("--display", is_flag=True,
              help="Write the [0, 1]-rescaled display matrix instead of raw values.")
@click.option("--out", required=True, type=click.Path(), help="Matrix CSV to write.")
def mi(source, model_file, data, label_column, display, out):
    """All-to-all feature mutual information matrix."""
    if source == "model":
        if model_file is None:
            raise click.ClickException("--from model needs --model-file")
        model = load_model(model_file)
        matrices = all_to_all_mi(model)
        matrix = matrices.display if display else matrices.raw
    else:
        if data is None:
            raise click.ClickException("--from data needs --data")
        features, _ = load_csv(_dataset_spec(data, label_column, ()))
        n = features.shape[1]
        matrix = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                matrix[i, j] = matrix[j, i] = histogram_mi(features, i, j)
        if display:
            peak = matrix.max()
            matrix = matrix / peak if peak > 0 else matrix
    np.savetxt(out, matrix, delimiter=",", fmt="%.10g")
    click.echo(f"{matrix.shape[0]}x{matrix.shape[1]} MI matrix written to {out}")


@cli.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--label-column", required=True, help="Truth column naming native anomalies.")
@click.option("--anomaly-label", "anomaly_labels", multiple=True, required=True,
              help="Label value counting as anomalous (repeatable).")
@click.option("--model", "model_kind", type=click.Choice(["mps", "ttn"]), default="mps",
              show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Master seed for pollution/folds/training.")
@click.option("--max-folds", type=int, default=None,
              help="Train only the first folds (desk-scale mode).")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
def benchmark(data, label_column, anomaly_labels, model_kind, config_path, seed, max_folds, out):
    """Pollute, fold, train, and report separation/inductive AUCROC."""
    config = RunConfig.from_json(config_path) if config_path else RunConfig()
    spec = _dataset_spec(data, label_column, anomaly_labels)
    result = run_benchmark(spec, model_kind, config, out_dir=out,
                           max_folds=max_folds, seed=seed)
    out_path = Path(out) / f"benchmark_{model_kind}.json"
    out_path.write_text(json.dumps(result.to_dict(), indent=2))
    click.echo(f"separation AUCROC {result.separation_mean:.4f} +- {result.separation_std:.4f}")
    click.echo(f"inductive  AUCROC {result.inductive_mean:.4f} +- {result.inductive_std:.4f}")
    click.echo(f"details written to {out_path}")


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except NumericalError as exc:
        click.echo(f"numerical error: {exc}", err=True)
        sys.exit(3)
    except TnadError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
