"""Tests for cohort ingestion, decomposition output and the ablation harness."""

from dataclasses import replace

import numpy as np
import pytest

from src.analyzers import clinical_encoder
from src.analyzers.phantom import ShiftRule, generate_cohort
from src.analyzers.pipeline import (
    CohortError,
    CohortFeatures,
    cohort_matrix,
    decompose_cohort,
    encode_clinical,
    exclusions,
    extract_cohort,
    fit_model,
    holdout_split,
    run_ablation,
    timepoint_prefixes,
    validate_cohort,
)
from src.models.clinical import ClinicalRecord
from src.models.dwi_study import MAP_NAMES, StudyIssues, TimePoint, Violation
from src.models.features import PatientFeatures
from src.models.manifest import CohortManifest, PatientEntry, TimepointEntry
from src.models.run_config import DEFAULT_CONFIGURATIONS, AblationConfig, RunConfig
from src.models.train_config import TrainConfig
from src.parsers.manifest_parser import read_manifest, save_cohort, write_manifest
from src.parsers.nifti_parser import write_volume
from tests.conftest import small_cohort_spec, uniform_study

FAST = TrainConfig(n_rounds=15, max_depth=2, k_features=10)
ALL_MAPS = MAP_NAMES + ("SER",)


def _run(**changes) -> RunConfig:
    base = dict(train=FAST, folds=3, n_permutations=200, maps=ALL_MAPS)
    base.update(changes)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def extracted(cohort_dir):
    return extract_cohort(read_manifest(cohort_dir), _run())


def _two_patient_manifest(tmp_path) -> CohortManifest:
    """Patient A is valid; patient B has an empty tumor mask."""
    study = uniform_study()
    patients = []
    for pid, mask in (("A", study.mask), ("B", np.zeros_like(study.mask))):
        base = tmp_path / pid
        dwi = write_volume(base / "dwi.nii", study.signal.astype(np.float32), study.spacing)
        mask_path = write_volume(base / "mask.nii", mask.astype(np.uint8), study.spacing)
        entries = {tp: TimepointEntry(study.bvalues.values, mask_path, dwi=dwi) for tp in TimePoint}
        patients.append(PatientEntry(pid, entries, 0))
    path = write_manifest(CohortManifest(tmp_path, tuple(patients)), tmp_path / "manifest.json")
    return read_manifest(path)


def test_timepoint_prefixes_are_ordered():
    assert timepoint_prefixes([TimePoint.T2, TimePoint.T0, TimePoint.T1]) == [
        (TimePoint.T0,),
        (TimePoint.T0, TimePoint.T1),
        (TimePoint.T0, TimePoint.T1, TimePoint.T2),
    ]
    assert timepoint_prefixes([TimePoint.T1]) == [(TimePoint.T1,)]


class TestExclusions:
    def test_lenient_lists_patients_once(self):
        bad = Violation("mask", "empty-mask", "mask has no true voxel")
        issues = [
            StudyIssues("B", TimePoint.T0, [bad]),
            StudyIssues("A", TimePoint.T0, []),
            StudyIssues("B", TimePoint.T1, [bad]),
        ]
        assert exclusions(issues, strict=False) == ["B"]

    def test_strict_names_first_violation(self):
        issues = [StudyIssues("B", TimePoint.T1, [Violation("mask", "empty-mask", "mask has no true voxel")])]
        with pytest.raises(CohortError, match="B/T1: mask: empty-mask"):
            exclusions(issues, strict=True)

    def test_invalid_study_on_disk(self, tmp_path):
        manifest = _two_patient_manifest(tmp_path)
        issues = validate_cohort(manifest, [TimePoint.T0])
        assert [i.is_valid() for i in issues] == [True, False]
        assert issues[1].violations[0].rule == "empty-mask"
        assert exclusions(issues, strict=False) == ["B"]

    def test_decompose_skips_excluded(self, tmp_path):
        manifest = _two_patient_manifest(tmp_path / "in")
        out = decompose_cohort(manifest, RunConfig(timepoints=("T0",)), tmp_path / "maps")
        decomposed = read_manifest(out)
        assert [p.patient_id for p in decomposed.patients] == ["A"]
        extra = decomposed.patients[0].timepoints[TimePoint.T0].extra_maps
        assert sorted(extra) == sorted(MAP_NAMES)

    def test_decompose_strict_raises(self, tmp_path):
        manifest = _two_patient_manifest(tmp_path / "in")
        with pytest.raises(CohortError):
            decompose_cohort(manifest, RunConfig(timepoints=("T0",)), tmp_path / "maps", strict=True)


class TestExtract:
    def test_every_patient_is_extracted(self, extracted):
        assert len(extracted.patients) == 20
        assert extracted.excluded == []
        first = extracted.patients[0]
        assert first.patient_id == "P001"
        assert len(first.maps) == 3 * len(ALL_MAPS)

    def test_matrix_layout(self, extracted):
        X = cohort_matrix(extracted, _run(maps=("ADC_0_100", "F")))
        assert X.n_rows == 20
        assert X.n_columns == 3 * 2 * 33 + len(extracted.encoder.feature_names)
        assert X.columns[0] == "T0_ADC_0_100_firstorder_energy"
        assert int(X.labels.sum()) == 6

    def test_decomposed_maps_are_reused(self, cohort_dir, tmp_path):
        manifest = read_manifest(cohort_dir)
        run = _run(maps=("F",), timepoints=("T0",))
        out = decompose_cohort(manifest, run, tmp_path / "maps")
        direct = cohort_matrix(extract_cohort(manifest, run), run)
        reused = cohort_matrix(extract_cohort(read_manifest(out), run), run)
        assert direct.columns == reused.columns
        # Maps are stored as float32, so compare the bin-free statistics only
        firstorder = [c for c in direct.columns if "_firstorder_" in c]
        np.testing.assert_allclose(reused.select(firstorder).values, direct.select(firstorder).values, rtol=1e-5, atol=1e-9)

    def test_fit_model_with_grid(self, extracted):
        run = _run(maps=("ADC_0_100", "F"), grid={"max_depth": [1, 2]})
        fitted = fit_model(cohort_matrix(extracted, run), run)
        assert fitted.cv is not None
        assert len(fitted.cv.configs) == 2
        assert fitted.selection.k == FAST.k_features
        assert fitted.model.feature_names == fitted.selection.chosen


class TestAblation:
    def test_cross_validated_table(self, extracted):
        report = run_ablation(extracted, _run())
        assert len(report.rows) == 18
        assert [r.config for r in report.rows[::3]] == [c.name for c in DEFAULT_CONFIGURATIONS]
        assert {r.timepoints_label for r in report.rows} == {"T0", "T0+T1", "T0+T1+T2"}
        assert all(r.metrics.n == 20 for r in report.rows)
        assert report.evaluation == "cv"

    def test_cross_validated_table_is_reproducible(self, extracted):
        configs = (DEFAULT_CONFIGURATIONS[-1],)
        a = run_ablation(extracted, _run(), configs)
        b = run_ablation(extracted, _run(), configs)
        assert a.to_dict() == b.to_dict()

    def test_holdout_table(self, extracted):
        report = run_ablation(extracted, _run(evaluation="holdout"))
        assert len(report.rows) == 18
        assert all(r.metrics.n == 8 for r in report.rows)
        assert report.evaluation == "holdout"

    def test_holdout_split_is_stratified(self):
        labels = np.array([0] * 14 + [1] * 6)
        train, test = holdout_split(labels, 0.4, seed=3)
        assert sorted(np.concatenate([train, test]).tolist()) == list(range(20))
        assert labels[test].sum() in (2, 3)

    def test_unlabelled_cohort_rejected(self, extracted):
        unlabelled = replace(extracted, patients=[replace(p, label=None) for p in extracted.patients])
        with pytest.raises(CohortError, match="label"):
            run_ablation(unlabelled, _run())


def test_pseudo_diffusion_maps_beat_total_adc(tmp_path):
    spec = small_cohort_spec(n_patients=150, seed=11)
    manifest = read_manifest(save_cohort(generate_cohort(spec), tmp_path))
    configs = (AblationConfig("ADC_0_800-only", ("ADC_0_800",)), AblationConfig("PD-DWI", ("ADC_0_100", "F")))
    run = _run(maps=("ADC_0_800", "ADC_0_100", "F"), configurations=configs, folds=5)
    report = run_ablation(extract_cohort(manifest, run), run)
    full = ("T0", "T1", "T2")
    pd_dwi = report.row("PD-DWI", full).metrics.auc
    assert pd_dwi >= 0.85
    assert pd_dwi - report.row("ADC_0_800-only", full).metrics.auc >= 0.03


def test_no_response_signal_gives_chance_auc(tmp_path):
    spec = small_cohort_spec(n_patients=200, shape=(4, 8, 8), responder_shift=ShiftRule(), seed=13)
    manifest = read_manifest(save_cohort(generate_cohort(spec), tmp_path))
    run = _run(maps=("ADC_0_100", "F"), configurations=(DEFAULT_CONFIGURATIONS[-1],), folds=5)
    report = run_ablation(extract_cohort(manifest, run), run)
    assert report.row("PD-DWI", ("T0", "T1", "T2")).metrics.auc == pytest.approx(0.5, abs=0.1)


class TestHoldoutClinicalEncoding:
    def test_extracted_cohort_keeps_records(self, extracted):
        assert sorted(extracted.records) == [p.patient_id for p in extracted.patients]

    def test_encoder_fitted_on_training_ids_only(self, extracted):
        train_ids = [p.patient_id for p in extracted.patients[:10]]
        encoder, patients = encode_clinical(extracted, train_ids)
        expected = clinical_encoder.fit([extracted.records[pid] for pid in train_ids])
        assert encoder.to_dict() == expected.to_dict()
        assert [p.patient_id for p in patients] == [p.patient_id for p in extracted.patients]
        for refit, original in zip(patients, extracted.patients):
            assert refit.clinical == encoder.transform(extracted.records[refit.patient_id])
            assert refit.maps is original.maps

    def test_test_only_category_encodes_as_zeros(self):
        records = {
            "A": ClinicalRecord("A", 40.0, "white", "single mass", "HR+/HER2-", "High", 2.0),
            "B": ClinicalRecord("B", 50.0, "white", "single mass", "HR-/HER2-", "Low", 4.0),
            "C": ClinicalRecord("C", 60.0, "asian", "single mass", "HR+/HER2+", None, 30.0),
        }
        everyone = clinical_encoder.fit(list(records.values()))
        patients = [PatientFeatures(pid, {}, everyone.transform(r), 0) for pid, r in records.items()]
        cohort = CohortFeatures(patients, everyone, records=records)

        encoder, refit = encode_clinical(cohort, ["A", "B"])
        race = [n for n in encoder.feature_names if n.startswith("clinical_race_")]
        test_row = dict(zip(refit[2].clinical.names, refit[2].clinical.values))
        assert len(race) == 1
        assert all(test_row[n] == 0.0 for n in race)
        # Diameter imputation comes from the training rows only
        assert encoder.median_diameter_cm == pytest.approx(3.0)

    def test_unknown_training_id(self, extracted):
        with pytest.raises(CohortError, match="no clinical record"):
            encode_clinical(extracted, ["nobody"])

    def test_holdout_ablation_uses_refitted_encoder(self, extracted, monkeypatch):
        from src.analyzers import pipeline

        seen = []
        original = pipeline.encode_clinical

        def spy(cohort, ids):
            seen.append(list(ids))
            return original(cohort, ids)

        monkeypatch.setattr(pipeline, "encode_clinical", spy)
        run = _run(evaluation="holdout")
        run_ablation(extracted, run, (DEFAULT_CONFIGURATIONS[-1],))
        labels = np.array([p.label for p in extracted.patients])
        train, _ = holdout_split(labels, run.test_fraction, run.seed)
        assert seen == [[extracted.patients[i].patient_id for i in train]]
