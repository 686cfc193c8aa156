from __future__ import annotations

from collections.abc import Iterable
from typing import Iterator

from src.models.dwi_study import StudyIssues
from src.models.manifest import PatientEntry


def filter_by_patients(
    entries: Iterable[PatientEntry],
    include: set[str] | None = None,
    exclude: set[str] | None = None,
) -> Iterator[PatientEntry]:
    for e in entries:
        if include and e.patient_id not in include:
            continue
        if exclude and e.patient_id in exclude:
            continue
        yield e


def filter_invalid(issues: Iterable[StudyIssues]) -> Iterator[StudyIssues]:
    for i in issues:
        if not i.is_valid():
            yield i
