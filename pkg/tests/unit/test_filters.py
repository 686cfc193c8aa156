"""Tests for manifest and validation filters."""

from pathlib import Path

from src.models.dwi_study import StudyIssues, TimePoint, Violation
from src.models.manifest import PatientEntry, TimepointEntry
from src.utils.filters import filter_by_patients, filter_invalid


def _entry(pid: str) -> PatientEntry:
    tp = TimepointEntry((0.0, 100.0), Path("mask.nii"), dwi=Path("dwi.nii"))
    return PatientEntry(pid, {TimePoint.T0: tp})


def test_filter_by_patients_include_and_exclude():
    entries = [_entry("A"), _entry("B"), _entry("C")]
    assert [e.patient_id for e in filter_by_patients(entries)] == ["A", "B", "C"]
    assert [e.patient_id for e in filter_by_patients(entries, include={"A", "C"})] == ["A", "C"]
    assert [e.patient_id for e in filter_by_patients(entries, exclude={"B"})] == ["A", "C"]
    assert [e.patient_id for e in filter_by_patients(entries, include={"A", "B"}, exclude={"A"})] == ["B"]


def test_filter_invalid_keeps_order():
    issues = [
        StudyIssues("A", TimePoint.T0, []),
        StudyIssues("B", TimePoint.T1, [Violation("mask", "empty-mask", "mask selects no voxel")]),
        StudyIssues("C", TimePoint.T0, [Violation("spacing", "spacing", "spacing must be > 0")]),
    ]
    assert [(i.patient_id, i.time_point) for i in filter_invalid(issues)] == [("B", TimePoint.T1), ("C", TimePoint.T0)]
