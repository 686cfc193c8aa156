"""End-to-end orchestration: cohort ingestion, feature extraction, fitting, ablation."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import train_test_split

from src.analyzers import clinical_encoder, gbt
from src.analyzers.clinical_encoder import ClinicalEncoder
from src.analyzers.decomposition import decompose_study
from src.analyzers.evaluation import ConfigurationPredictions, ablation_report
from src.analyzers.feature_pipeline import assemble, fit_selection
from src.analyzers.radiomics import DiscretizationConfig, extract_all
from src.analyzers.tuning import CVResult, cross_validate, out_of_fold_predictions
from src.models.clinical import ClinicalRecord
from src.models.dwi_study import MAP_NAMES, ParameterMap, StudyIssues, TimePoint, Violation, validate_study
from src.models.evaluation_report import AblationReport
from src.models.features import FeatureMatrix, FeatureVector, PatientFeatures, SelectionReport
from src.models.manifest import CohortManifest, PatientEntry, TimepointEntry
from src.models.run_config import AblationConfig, RunConfig
from src.parsers.clinical_parser import read_clinical_csv
from src.parsers.manifest_parser import load_extra_map, load_study, write_manifest, write_parameter_map
from src.utils.config import expand_grid
from src.utils.errors import PipelineDataError
from src.utils.filters import filter_by_patients, filter_invalid

logger = logging.getLogger(__name__)


class CohortError(PipelineDataError):
    """Raised when a cohort cannot be ingested (strict mode, missing clinical rows, ...)."""


def timepoint_prefixes(timepoints: Sequence[TimePoint]) -> list[tuple[TimePoint, ...]]:
    """[(T0,), (T0, T1), (T0, T1, T2)] for the configured timepoints."""
    ordered = sorted(set(timepoints), key=lambda t: t.order)
    return [tuple(ordered[: i + 1]) for i in range(len(ordered))]


def _study_issues(entry: PatientEntry, timepoints: Sequence[TimePoint]) -> list[StudyIssues]:
    issues: list[StudyIssues] = []
    for tp in timepoints:
        if tp not in entry.timepoints:
            issues.append(StudyIssues(entry.patient_id, tp, [Violation("study", "missing", f"no {tp.value} study")]))
            continue
        study = load_study(entry, tp)
        issues.append(StudyIssues(entry.patient_id, tp, validate_study(study)))
    return issues


def validate_cohort(manifest: CohortManifest, timepoints: Sequence[TimePoint], n_jobs: int = 1) -> list[StudyIssues]:
    """Validation report for every (patient, timepoint), in manifest order."""
    per_patient = Parallel(n_jobs=n_jobs)(delayed(_study_issues)(p, timepoints) for p in manifest.patients)
    return [issue for issues in per_patient for issue in issues]


def exclusions(issues: Sequence[StudyIssues], strict: bool) -> list[str]:
    """Sorted ids of patients with any invalid study; ``strict`` raises instead."""
    bad = list(filter_invalid(issues))
    excluded = sorted({i.patient_id for i in bad})
    for issue in bad:
        detail = "; ".join(str(v) for v in issue.violations)
        logger.warning("excluding %s: %s %s", issue.patient_id, issue.time_point.value, detail)
    if excluded and strict:
        first = bad[0]
        raise CohortError(
            f"{len(excluded)} patient(s) with invalid studies, first {first.patient_id}/{first.time_point.value}: "
            + "; ".join(str(v) for v in first.violations)
        )
    return excluded


def study_maps(entry: PatientEntry, tp: TimePoint, names: Sequence[str]) -> tuple[dict[str, ParameterMap], np.ndarray]:
    """Requested maps for one study plus its tumor mask.

    A map listed under ``extra_maps`` is read from disk (this is how decomposed
    maps and SER are reused); derived maps missing there are recomputed.
    """
    study = load_study(entry, tp)
    tp_entry: TimepointEntry = entry.timepoints[tp]
    maps: dict[str, ParameterMap] = {}
    to_derive = [n for n in names if n in MAP_NAMES and n not in tp_entry.extra_maps]
    if to_derive:
        derived = decompose_study(study)
        maps.update({n: derived[n] for n in to_derive})
    for name in names:
        if name in maps:
            continue
        if name not in tp_entry.extra_maps:
            raise CohortError(f"patient {entry.patient_id} {tp.value}: map {name} is neither derived nor listed in extra_maps")
        pmap = load_extra_map(entry, tp, name)
        if pmap.data.shape != study.mask.shape:
            raise CohortError(f"patient {entry.patient_id} {tp.value}: {name} map {pmap.data.shape} != mask {study.mask.shape}")
        maps[name] = pmap
    return maps, study.mask


def _extract_patient(
    entry: PatientEntry,
    clinical: FeatureVector,
    timepoints: Sequence[TimePoint],
    names: Sequence[str],
    cfg: DiscretizationConfig,
) -> PatientFeatures:
    features: dict[tuple[TimePoint, str], FeatureVector] = {}
    for tp in timepoints:
        maps, mask = study_maps(entry, tp, names)
        for name in names:
            features[(tp, name)] = extract_all(maps[name], mask, cfg)
    return PatientFeatures(entry.patient_id, features, clinical, entry.label)


@dataclass
class CohortFeatures:
    patients: list[PatientFeatures]
    encoder: ClinicalEncoder
    excluded: list[str] = field(default_factory=list)
    issues: list[StudyIssues] = field(default_factory=list)
    records: dict[str, ClinicalRecord] = field(default_factory=dict)


def _clinical_records(manifest: CohortManifest) -> dict[str, ClinicalRecord]:
    if manifest.clinical_csv is None:
        raise CohortError("manifest has no clinical_csv")
    records = {r.patient_id: r for r in read_clinical_csv(manifest.clinical_csv)}
    missing = [p.patient_id for p in manifest.patients if p.patient_id not in records]
    if missing:
        raise CohortError(f"no clinical row for: {', '.join(missing[:10])}")
    return records


def extract_cohort(
    manifest: CohortManifest,
    run: RunConfig,
    maps: Sequence[str] | None = None,
    encoder: ClinicalEncoder | None = None,
    strict: bool = False,
) -> CohortFeatures:
    """Validate, exclude, decompose and extract every patient of ``manifest``.

    ``encoder`` reuses fitted clinical vocabularies; otherwise one is fitted on
    the included patients (label-free, so no outcome leakage).
    """
    timepoints = run.timepoint_enums()
    names = tuple(maps) if maps is not None else run.maps
    issues = validate_cohort(manifest, timepoints, run.n_jobs)
    excluded = exclusions(issues, strict)
    included = list(filter_by_patients(manifest.patients, exclude=set(excluded)))
    if not included:
        raise CohortError("every patient was excluded by study validation")

    records = _clinical_records(manifest)
    if encoder is None:
        encoder = clinical_encoder.fit([records[p.patient_id] for p in included])
    cfg = DiscretizationConfig(run.bin_count)
    patients = Parallel(n_jobs=run.n_jobs)(
        delayed(_extract_patient)(p, encoder.transform(records[p.patient_id]), timepoints, names, cfg) for p in included
    )
    logger.info("extracted %d patients x %d maps x %d timepoints", len(patients), len(names), len(timepoints))
    kept = {p.patient_id: records[p.patient_id] for p in included}
    return CohortFeatures(list(patients), encoder, excluded, issues, kept)


def cohort_matrix(cohort: CohortFeatures, run: RunConfig) -> FeatureMatrix:
    return assemble(cohort.patients, run.maps, run.timepoint_enums())


def encode_clinical(cohort: CohortFeatures, patient_ids: Sequence[str]) -> tuple[ClinicalEncoder, list[PatientFeatures]]:
    """Refit the clinical encoder on ``patient_ids`` only and re-encode every patient with it."""
    missing = [pid for pid in patient_ids if pid not in cohort.records]
    if missing:
        raise CohortError(f"no clinical record kept for: {', '.join(missing[:10])}")
    encoder = clinical_encoder.fit([cohort.records[pid] for pid in patient_ids])
    patients = [replace(p, clinical=encoder.transform(cohort.records[p.patient_id])) for p in cohort.patients]
    return encoder, patients


def _decompose_patient(entry: PatientEntry, timepoints: Sequence[TimePoint], out: Path) -> PatientEntry:
    tps: dict[TimePoint, TimepointEntry] = {}
    for tp in timepoints:
        study = load_study(entry, tp)
        e = entry.timepoints[tp]
        written = {
            name: write_parameter_map(out / entry.patient_id / tp.value / f"{name}.nii", pmap)
            for name, pmap in decompose_study(study).items()
        }
        tps[tp] = TimepointEntry(e.bvalues, e.mask, e.dwi, e.dwi_per_b, {**e.extra_maps, **written})
    return PatientEntry(entry.patient_id, tps, entry.label)


def decompose_cohort(manifest: CohortManifest, run: RunConfig, out_dir: str | Path, strict: bool = False) -> Path:
    """Write ADC/F maps per study and a manifest that lists them as extra maps."""
    out = Path(out_dir).resolve()
    timepoints = run.timepoint_enums()
    issues = validate_cohort(manifest, timepoints, run.n_jobs)
    excluded = set(exclusions(issues, strict))
    entries = list(filter_by_patients(manifest.patients, exclude=excluded))
    patients = Parallel(n_jobs=run.n_jobs)(delayed(_decompose_patient)(p, timepoints, out) for p in entries)
    return write_manifest(CohortManifest(out, tuple(patients), manifest.clinical_csv), out / "manifest.json")


@dataclass(frozen=True, eq=False)
class FittedModel:
    model: gbt.GBTEnsemble
    selection: SelectionReport
    cv: CVResult | None = None


def fit_model(X: FeatureMatrix, run: RunConfig) -> FittedModel:
    """Tune on ``X`` when a grid is configured, then select and train on all of ``X``."""
    cv = None
    cfg = run.train
    if run.grid:
        cv = cross_validate(X, expand_grid(run.train, run.grid), run.folds, run.seed, run.n_jobs)
        cfg = cv.best
    selection = fit_selection(X, cfg.k_features)
    model = gbt.train(selection.apply(X), cfg)
    return FittedModel(model, selection, cv)


def holdout_split(labels: np.ndarray, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified train/test row indices, each sorted."""
    rows = np.arange(labels.size)
    train, test = train_test_split(rows, test_size=test_fraction, stratify=labels, random_state=seed)
    return np.sort(train), np.sort(test)


def _configuration_scores(X: FeatureMatrix, run: RunConfig, split: tuple[np.ndarray, np.ndarray] | None):
    labels = X.require_labels()
    if split is None:
        return X.ids, out_of_fold_predictions(X, run.train, run.folds, run.seed, run.n_jobs), labels
    train, test = split
    fitted = fit_model(X.take(train), run)
    test_X = X.take(test)
    return test_X.ids, gbt.predict_proba(fitted.model, test_X), labels[test]


def run_ablation(
    cohort: CohortFeatures,
    run: RunConfig,
    configurations: Sequence[AblationConfig] | None = None,
    track: Callable[[list], Iterable] = iter,
) -> AblationReport:
    """Every configuration at every timepoint prefix.

    ``cv`` scores pooled out-of-fold predictions with the base train config;
    ``holdout`` tunes and trains on the training split and scores the test split.
    In holdout mode the clinical encoder is refitted on the training split.
    ``track`` wraps the (configuration, prefix) job list, e.g. with a progress bar.
    """
    if any(p.label is None for p in cohort.patients):
        raise CohortError("ablation needs a label for every patient")
    configurations = tuple(configurations or run.configurations)
    split = None
    patients = cohort.patients
    if run.evaluation == "holdout":
        labels = np.array([p.label for p in cohort.patients], dtype=np.int64)
        split = holdout_split(labels, run.test_fraction, run.seed)
        # Test rows must not shape the clinical vocabularies or imputation values
        if cohort.records:
            _, patients = encode_clinical(cohort, [cohort.patients[i].patient_id for i in split[0]])

    jobs = [(c, p) for c in configurations for p in timepoint_prefixes(run.timepoint_enums())]
    results: list[ConfigurationPredictions] = []
    for config, prefix in track(jobs):
        X = assemble(patients, config.maps, prefix)
        ids, scores, labels = _configuration_scores(X, run, split)
        logger.info("%s @ %s: %d rows x %d columns", config.name, "+".join(t.value for t in prefix), X.n_rows, X.n_columns)
        results.append(ConfigurationPredictions(config.name, tuple(t.value for t in prefix), ids, scores, labels))
    return ablation_report(
        results,
        evaluation=run.evaluation,
        reference=run.reference,
        seed=run.seed,
        threshold=run.threshold,
        n_permutations=run.n_permutations,
        excluded_patients=cohort.excluded,
    )
