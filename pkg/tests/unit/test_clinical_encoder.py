"""Unit tests for clinical feature encoding."""

import logging

import pytest

from src.analyzers import clinical_encoder
from src.analyzers.clinical_encoder import ClinicalEncoder, ClinicalEncodingError, category_slug
from src.models.clinical import ClinicalRecord, HrHer2Status, TumorGrade


def _record(pid="P1", grade="High", race="white", lesion="single mass", status="HR+/HER2-", diameter=3.2):
    return ClinicalRecord(pid, 45.0, race, lesion, status, grade, diameter)


class TestFit:
    """Vocabulary and imputation statistics learned from training records."""

    def test_modal_grade(self):
        records = [_record(f"H{i}") for i in range(5)]
        records += [_record(f"L{i}", grade="Low") for i in range(3)]
        records.append(_record("M", grade=None))
        assert clinical_encoder.fit(records).modal_grade is TumorGrade.HIGH

    def test_modal_grade_tie_goes_to_high(self):
        records = [_record(f"H{i}") for i in range(3)] + [_record(f"L{i}", grade="Low") for i in range(3)]
        assert clinical_encoder.fit(records).modal_grade is TumorGrade.HIGH

    def test_single_record_gives_singleton_vocabularies(self):
        encoder = clinical_encoder.fit([_record()])
        assert encoder.vocabularies == {"race": ("white",), "lesion_type": ("single_mass",)}

    def test_median_diameter(self):
        records = [_record("A", diameter=2.0), _record("B", diameter=4.0), _record("C", diameter=None)]
        assert clinical_encoder.fit(records).median_diameter_cm == pytest.approx(3.0)

    def test_empty_training_set(self):
        with pytest.raises(ClinicalEncodingError, match="empty"):
            clinical_encoder.fit([])


class TestTransform:
    @pytest.fixture
    def encoder(self) -> ClinicalEncoder:
        records = [
            _record("A", race="white", lesion="single mass"),
            _record("B", race="Black", lesion="non-mass", grade="Low"),
            _record("C", race="asian", lesion="multiple masses", grade="Intermediate"),
        ]
        return clinical_encoder.fit(records)

    def test_receptor_flags(self, encoder):
        vec = encoder.transform(_record(status="HR+/HER2-"))
        assert (vec["clinical_hr"], vec["clinical_her2"]) == (1.0, 0.0)
        vec = encoder.transform(_record(status=HrHer2Status.HR_NEG_HER2_POS))
        assert (vec["clinical_hr"], vec["clinical_her2"]) == (0.0, 1.0)

    def test_ordinal_grade(self, encoder):
        assert encoder.transform(_record(grade="Intermediate"))["clinical_grade"] == 2.0

    def test_missing_grade_is_imputed_with_mode(self, encoder):
        assert encoder.modal_grade is TumorGrade.HIGH
        assert encoder.transform(_record(grade=None))["clinical_grade"] == 3.0

    def test_one_hot_block(self, encoder):
        vec = encoder.transform(_record(race="Black"))
        assert vec["clinical_race_black"] == 1.0
        assert vec["clinical_race_white"] == 0.0
        assert sum(v for n, v in vec.as_dict().items() if n.startswith("clinical_race_")) == 1.0

    def test_unseen_category_is_all_zeros(self, encoder, caplog):
        with caplog.at_level(logging.WARNING):
            vec = encoder.transform(_record(race="pacific islander"))
        assert all(v == 0.0 for n, v in vec.as_dict().items() if n.startswith("clinical_race_"))
        assert "unseen race" in caplog.text

    def test_feature_names_are_stable(self, encoder):
        assert encoder.feature_names[:5] == (
            "clinical_age",
            "clinical_hr",
            "clinical_her2",
            "clinical_grade",
            "clinical_diameter_cm",
        )
        assert encoder.transform(_record()).names == encoder.feature_names

    def test_round_trip(self, encoder):
        restored = ClinicalEncoder.from_dict(encoder.to_dict())
        record = _record(race="asian", grade=None, diameter=None)
        assert restored.transform(record) == encoder.transform(record)

    def test_malformed_payload(self):
        with pytest.raises(ClinicalEncodingError, match="malformed"):
            ClinicalEncoder.from_dict({"vocabularies": {}})


@pytest.mark.parametrize(
    ("raw", "slug"),
    [("Non-mass", "non_mass"), ("  Multiple  NME ", "multiple_nme"), ("???", "unknown")],
)
def test_category_slug(raw, slug):
    assert category_slug(raw) == slug
