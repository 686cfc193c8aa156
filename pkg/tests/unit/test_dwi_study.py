"""Unit tests for the volumetric data types and study validation."""

import numpy as np
import pytest

from src.models.dwi_study import BValueSet, DWIStudy, ParameterMap, TimePoint, validate_study
from tests.conftest import uniform_study


class TestBValueSet:
    def test_canonical(self):
        assert BValueSet.canonical().values == (0.0, 100.0, 600.0, 800.0)

    def test_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            BValueSet((0, 600, 100))

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match=">= 0"):
            BValueSet((-10, 100))

    def test_index_of(self):
        b = BValueSet.canonical()
        assert b.index_of(600) == 2
        assert b.index_of(50) is None


class TestTimePoint:
    def test_parse_is_case_insensitive(self):
        assert TimePoint.parse(" t1 ") is TimePoint.T1

    def test_order(self):
        assert [t.order for t in TimePoint] == [0, 1, 2]

    def test_unknown(self):
        with pytest.raises(ValueError, match="unknown time point"):
            TimePoint.parse("T3")


class TestValidateStudy:
    """validate_study reports violations instead of raising."""

    def test_well_formed_study(self, study):
        assert validate_study(study) == []

    def test_mask_dimension_mismatch(self, study):
        bad = DWIStudy("P1", "T0", study.bvalues, study.signal, np.ones((2, 2, 2), dtype=bool), study.spacing)
        rules = [v.rule for v in validate_study(bad)]
        assert "dim-mismatch" in rules

    def test_missing_b100(self):
        study = uniform_study(bvalues=BValueSet((0.0, 600.0, 800.0)))
        violations = validate_study(study)
        assert [v.rule for v in violations] == ["bvalue-set"]
        assert "<= 100" in violations[0].message

    def test_empty_mask(self, study):
        bad = DWIStudy("P1", "T0", study.bvalues, study.signal, np.zeros(study.shape, dtype=bool), study.spacing)
        assert "empty-mask" in [v.rule for v in validate_study(bad)]

    def test_channel_count(self, study):
        bad = DWIStudy("P1", "T0", BValueSet((0, 100, 600)), study.signal, study.mask, study.spacing)
        assert "channel-count" in [v.rule for v in validate_study(bad)]

    def test_non_finite_signal(self, study):
        signal = study.signal.copy()
        signal[2, 0, 0, 0] = np.nan
        bad = DWIStudy("P1", "T0", study.bvalues, signal, study.mask, study.spacing)
        assert "non-finite-signal" in [v.rule for v in validate_study(bad)]

    def test_negative_signal(self, study):
        signal = study.signal.copy()
        signal[1, 0, 0, 0] = -1.0
        bad = DWIStudy("P1", "T0", study.bvalues, signal, study.mask, study.spacing)
        assert "negative-signal" in [v.rule for v in validate_study(bad)]


def test_study_arrays_are_read_only(study):
    with pytest.raises(ValueError):
        study.signal[0, 0, 0, 0] = 1.0


def test_roi_mean_signal(study):
    assert study.roi_mean_signal()[0] == pytest.approx(1000.0)


def test_f_map_range_is_enforced():
    data = np.full((1, 1, 2), 0.5)
    data[0, 0, 1] = 1.5
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        ParameterMap("F", data, np.ones((1, 1, 2), dtype=bool), (1, 1, 1))
    # invalid voxels may hold anything finite
    valid = np.array([[[True, False]]])
    assert ParameterMap("F", data, valid, (1, 1, 1)).valid.sum() == 1


def test_parameter_map_restriction():
    pmap = ParameterMap("ADC_0_800", np.ones((2, 2, 2)), np.ones((2, 2, 2), dtype=bool), (1, 1, 1))
    mask = np.zeros((2, 2, 2), dtype=bool)
    mask[0] = True
    assert pmap.restricted_to(mask).valid.sum() == 4
