from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from src.models.dwi_study import TimePoint


@dataclass(frozen=True)
class TimepointEntry:
    """Files for one (patient, time point).

    DWI comes either as one 4D file (``dwi``, 4th dim = b) or as one 3D file
    per b-value (``dwi_per_b``); exactly one of the two is set.
    """

    bvalues: tuple[float, ...]
    mask: Path
    dwi: Path | None = None
    dwi_per_b: dict[float, Path] = field(default_factory=dict)
    extra_maps: dict[str, Path] = field(default_factory=dict)

    def __post_init__(self):
        if (self.dwi is None) == (not self.dwi_per_b):
            raise ValueError("exactly one of 'dwi' or 'dwi_per_b' must be given")

    def files(self) -> list[Path]:
        paths = [self.mask, *self.extra_maps.values()]
        paths.extend([self.dwi] if self.dwi is not None else self.dwi_per_b.values())
        return paths


@dataclass(frozen=True)
class PatientEntry:
    patient_id: str
    timepoints: dict[TimePoint, TimepointEntry]
    label: int | None = None

    def __post_init__(self):
        if not self.patient_id:
            raise ValueError("patient id must be non-empty")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label for {self.patient_id} must be 0 or 1")


@dataclass(frozen=True)
class CohortManifest:
    """Cohort layout on disk; all paths are resolved to absolute paths at load."""

    root: Path
    patients: tuple[PatientEntry, ...]
    clinical_csv: Path | None = None

    def __post_init__(self):
        ids = [p.patient_id for p in self.patients]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate patient ids in manifest: {', '.join(dupes)}")

    def patient(self, patient_id: str) -> PatientEntry:
        for entry in self.patients:
            if entry.patient_id == patient_id:
                return entry
        raise KeyError(f"patient {patient_id} not in manifest")

    def has_labels(self) -> bool:
        return all(p.label is not None for p in self.patients)
