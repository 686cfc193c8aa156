"""CLI entry point for the pCR prediction pipeline."""

import dataclasses
import sys
from pathlib import Path

import click
import pandas as pd

from src.analyzers.decomposition import fit_roi_signal
from src.analyzers.evaluation import metrics_report
from src.analyzers.gbt import predict_proba
from src.analyzers.phantom import CohortSpec, generate_cohort
from src.analyzers.pipeline import (
    cohort_matrix,
    decompose_cohort,
    exclusions,
    extract_cohort,
    fit_model,
    run_ablation,
    validate_cohort,
)
from src.models.dwi_study import TimePoint
from src.models.evaluation_report import CSV_COLUMNS
from src.parsers.artifact_parser import load_encoder, load_model, selection_path
from src.parsers.features_parser import (
    FeaturesParserError,
    align,
    read_feature_matrix,
    read_labels,
    read_predictions,
    write_feature_matrix,
    write_predictions,
)
from src.parsers.manifest_parser import ManifestParserError, load_study, read_manifest, save_cohort
from src.reporters.console_reporter import ConsoleReporter
from src.reporters.file_reporter import plot_decay, write_csv, write_json, write_text
from src.utils.config import get_n_jobs, load_cohort_spec, load_run_config
from src.utils.errors import ConfigError, NumericFailure, PipelineDataError
from src.utils.filters import filter_by_patients
from src.utils.log import configure_logging
from src.utils.progress import spinner, track_iter

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
EXIT_INTERNAL = 10


def _fail(kind: str, code: int, message: str) -> None:
    # Exactly one line on stderr so wrappers can parse it
    line = " ".join(str(message).split()) or "unknown error"
    click.echo(f"error[{kind}]: {line}", err=True)
    sys.exit(code)


class PipelineGroup(click.Group):
    """Click group mapping every failure onto the documented exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as exc:
            _fail("usage", EXIT_USAGE, exc.format_message())
        except click.Abort:
            _fail("usage", EXIT_USAGE, "aborted")
        except ConfigError as exc:
            _fail("usage", EXIT_USAGE, str(exc))
        except (NumericFailure, FloatingPointError) as exc:
            _fail("numeric", EXIT_NUMERIC, str(exc))
        except (PipelineDataError, OSError, ValueError) as exc:
            _fail("data", EXIT_DATA, str(exc))
        except KeyError as exc:
            _fail("data", EXIT_DATA, exc.args[0] if exc.args else "missing key")
        except Exception as exc:  # noqa: BLE001
            _fail("internal", EXIT_INTERNAL, f"unexpected error: {type(exc).__name__}: {exc}")
        if not standalone_mode:
            return rv
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


INPUT_FILE = click.Path(dir_okay=False, path_type=Path)
CONFIG_FILE = click.Path(exists=True, dir_okay=False, readable=True, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, writable=True, path_type=Path)
OUTPUT_DIR = click.Path(file_okay=False, path_type=Path)


@click.group(cls=PipelineGroup)
@click.version_option(version="0.1.0")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging on stderr")
def cli(verbose: bool):
    """pCR prediction from multi-time-point DWI: decomposition, radiomics, boosting."""
    configure_logging(verbose)


@cli.command()
@click.option("--spec", "spec_path", type=CONFIG_FILE, help="Cohort spec JSON (default cohort when omitted)")
@click.option("--out", "out_dir", type=OUTPUT_DIR, required=True, help="Directory for volumes, clinical CSV, manifest")
@click.option("--seed", type=int, default=None, help="Override the cohort seed")
def phantom(spec_path: Path | None, out_dir: Path, seed: int | None):
    """Generate a seeded synthetic cohort on disk."""
    reporter = ConsoleReporter()
    spec = load_cohort_spec(spec_path) if spec_path else CohortSpec()
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed)
    with spinner(f"Generating {spec.n_patients} phantom patients"):
        members = generate_cohort(spec, get_n_jobs())
        manifest_path = save_cohort(members, out_dir)
    reporter.print_success(f"Wrote {len(members)} patients ({spec.n_positive} pCR) to {manifest_path}")


def _check_not_input(out_file: Path, *inputs: Path) -> None:
    for p in inputs:
        if p is not None and out_file.resolve() == Path(p).resolve():
            raise click.UsageError(f"refusing to overwrite input file {p}")


@cli.command()
@click.option("--manifest", "manifest_path", type=INPUT_FILE, required=True)
@click.option("--config", "config_path", type=CONFIG_FILE, help="Run config JSON (time points, n_jobs)")
@click.option("--out", "out_dir", type=OUTPUT_DIR, required=True)
@click.option("--strict", is_flag=True, help="Fail instead of excluding patients with invalid studies")
def decompose(manifest_path: Path, config_path: Path | None, out_dir: Path, strict: bool):
    """Write ADC_0_100, ADC_100_800, ADC_0_800 and F volumes per study."""
    reporter = ConsoleReporter()
    run = load_run_config(config_path)
    _check_not_input(out_dir / "manifest.json", manifest_path)
    manifest = read_manifest(manifest_path)
    with spinner("Decomposing studies"):
        out_manifest = decompose_cohort(manifest, run, out_dir, strict)
    reporter.print_success(f"Parameter maps written; manifest {out_manifest}")


@cli.command()
@click.option("--manifest", "manifest_path", type=INPUT_FILE, required=True)
@click.option("--config", "config_path", type=CONFIG_FILE)
@click.option("--out", "out_path", type=OUTPUT_FILE, required=True, help="Feature matrix CSV")
@click.option("--encoder", "encoder_path", type=INPUT_FILE, help="Reuse a fitted clinical encoder")
@click.option("--encoder-out", type=OUTPUT_FILE, help="Save the fitted clinical encoder JSON")
@click.option("--strict", is_flag=True, help="Fail instead of excluding patients with invalid studies")
def extract(
    manifest_path: Path,
    config_path: Path | None,
    out_path: Path,
    encoder_path: Path | None,
    encoder_out: Path | None,
    strict: bool,
):
    """Extract radiomics + clinical features into one matrix."""
    reporter = ConsoleReporter()
    run = load_run_config(config_path)
    _check_not_input(out_path, manifest_path, encoder_path)
    manifest = read_manifest(manifest_path)
    encoder = load_encoder(encoder_path) if encoder_path else None
    with spinner("Extracting radiomics features"):
        cohort = extract_cohort(manifest, run, encoder=encoder, strict=strict)
    X = cohort_matrix(cohort, run)
    write_feature_matrix(X, out_path)
    if encoder_out:
        write_json(encoder_out, cohort.encoder.to_dict())
        reporter.print_info(f"Clinical encoder -> {encoder_out}")
    if cohort.excluded:
        reporter.print_warning(f"Excluded {len(cohort.excluded)} patient(s): {', '.join(cohort.excluded)}")
    reporter.print_success(f"{X.n_rows} patients x {X.n_columns} features -> {out_path}")


@cli.command()
@click.option("--features", "features_path", type=INPUT_FILE, required=True)
@click.option("--config", "config_path", type=CONFIG_FILE)
@click.option("--out", "out_path", type=OUTPUT_FILE, required=True, help="Model JSON")
@click.option("--cv-out", type=OUTPUT_FILE, help="CV results JSON (default <model>.cv.json when a grid runs)")
def train(features_path: Path, config_path: Path | None, out_path: Path, cv_out: Path | None):
    """Select features and train the boosted ensemble (grid CV when configured)."""
    reporter = ConsoleReporter()
    run = load_run_config(config_path)
    _check_not_input(out_path, features_path)
    X = read_feature_matrix(features_path)
    if not X.has_labels():
        raise FeaturesParserError(f"{features_path}: training needs a pcr column")
    with spinner("Training"):
        fitted = fit_model(X, run)
    write_json(out_path, fitted.model.to_dict())
    write_json(selection_path(out_path), fitted.selection.to_dict())
    if fitted.cv is not None:
        write_json(cv_out or out_path.with_name(f"{out_path.stem}.cv.json"), fitted.cv.to_dict())
        reporter.display_cv(fitted.cv)
    reporter.display_selection(fitted.selection)
    reporter.print_success(f"{len(fitted.model.trees)} trees -> {out_path}")


@cli.command()
@click.option("--model", "model_path", type=INPUT_FILE, required=True)
@click.option("--features", "features_path", type=INPUT_FILE, required=True)
@click.option("--out", "out_path", type=OUTPUT_FILE, required=True, help="Predictions CSV")
def predict(model_path: Path, features_path: Path, out_path: Path):
    """Score every patient of a feature matrix."""
    reporter = ConsoleReporter()
    _check_not_input(out_path, model_path, features_path)
    model = load_model(model_path)
    X = read_feature_matrix(features_path)
    write_predictions(X.ids, predict_proba(model, X), out_path)
    reporter.print_success(f"{X.n_rows} predictions -> {out_path}")


@cli.command()
@click.option("--preds", "preds_path", type=INPUT_FILE, required=True)
@click.option("--labels", "labels_path", type=INPUT_FILE, required=True, help="CSV with patient_id and pcr")
@click.option("--out", "out_path", type=OUTPUT_FILE, required=True, help="Metrics JSON")
@click.option("--threshold", type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True), default=0.5, show_default=True)
def evaluate(preds_path: Path, labels_path: Path, out_path: Path, threshold: float):
    """AUC, F1 and Cohen's kappa of predictions against labels."""
    reporter = ConsoleReporter()
    _check_not_input(out_path, preds_path, labels_path)
    _, scores, labels = align(read_predictions(preds_path), read_labels(labels_path))
    metrics = metrics_report(scores, labels, threshold)
    write_json(out_path, metrics.to_dict())
    reporter.display_metrics(metrics)
    reporter.print_info(f"{metrics.n} patients scored -> {out_path}")


@cli.command()
@click.option("--manifest", "manifest_path", type=INPUT_FILE, required=True)
@click.option("--config", "config_path", type=CONFIG_FILE)
@click.option("--out", "out_path", type=OUTPUT_FILE, required=True, help="Report CSV (.json and .md written alongside)")
@click.option("--strict", is_flag=True, help="Fail instead of excluding patients with invalid studies")
def ablate(manifest_path: Path, config_path: Path | None, out_path: Path, strict: bool):
    """Compare map configurations at every time-point prefix."""
    reporter = ConsoleReporter()
    run = load_run_config(config_path)
    _check_not_input(out_path, manifest_path)
    manifest = read_manifest(manifest_path)
    with spinner("Extracting radiomics features"):
        cohort = extract_cohort(manifest, run, maps=run.required_maps(), strict=strict)
    report = run_ablation(cohort, run, track=lambda jobs: track_iter(jobs, "Ablation"))
    write_csv(out_path, pd.DataFrame([r.csv_record() for r in report.rows], columns=list(CSV_COLUMNS)))
    write_json(out_path.with_suffix(".json"), report.to_dict())
    write_text(out_path.with_suffix(".md"), report.to_markdown())
    reporter.display_ablation(report)
    reporter.print_success(f"{len(report.rows)} rows -> {out_path}")


@cli.command("plot-decay")
@click.option("--manifest", "manifest_path", type=INPUT_FILE, required=True)
@click.option("--patient", "patient_id", required=True)
@click.option("--timepoint", type=click.Choice([t.value for t in TimePoint], case_sensitive=False), default="T2", show_default=True)
@click.option("--out", "out_path", type=OUTPUT_FILE, required=True, help="SVG file")
def plot_decay_cmd(manifest_path: Path, patient_id: str, timepoint: str, out_path: Path):
    """Plot the ROI-mean log signal against b with the three regime fits."""
    reporter = ConsoleReporter()
    manifest = read_manifest(manifest_path)
    entry = next(filter_by_patients(manifest.patients, include={patient_id}), None)
    if entry is None:
        raise ManifestParserError(f"patient {patient_id} is not in {manifest_path}")
    tp = TimePoint.parse(timepoint)
    decay = fit_roi_signal(load_study(entry, tp))
    plot_decay(decay, out_path, title=f"{patient_id} {tp.value}")
    reporter.display_decay(decay)
    reporter.print_success(f"Decay plot -> {out_path}")


@cli.command()
@click.option("--manifest", "manifest_path", type=INPUT_FILE, required=True)
@click.option("--config", "config_path", type=CONFIG_FILE)
@click.option("--timepoint", "timepoints", multiple=True, type=click.Choice([t.value for t in TimePoint], case_sensitive=False))
@click.option("--strict", is_flag=True, help="Exit with a data error when any study is invalid")
def validate(manifest_path: Path, config_path: Path | None, timepoints: tuple[str, ...], strict: bool):
    """Check every study of a cohort and list the violations."""
    reporter = ConsoleReporter()
    run = load_run_config(config_path)
    tps = tuple(TimePoint.parse(t) for t in timepoints) or run.timepoint_enums()
    manifest = read_manifest(manifest_path)
    with spinner("Validating studies"):
        issues = validate_cohort(manifest, tps, run.n_jobs)
    reporter.display_validation(issues)
    excluded = exclusions(issues, strict)
    if excluded:
        reporter.print_warning(f"{len(excluded)} patient(s) would be excluded: {', '.join(excluded)}")


def main():
    """Main entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
