"""Numeric encoding of clinical records.

HR/HER2 status is split into two binary flags, grade becomes an ordinal
(Low 1, Intermediate 2, High 3) imputed with the training mode, race and
lesion type are one-hot encoded over the vocabulary seen at fit time.
"""

from __future__ import annotations

import logging
import re
import statistics
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from sklearn.preprocessing import OneHotEncoder

from src.models.clinical import ClinicalRecord, TumorGrade
from src.models.features import FeatureVector
from src.utils.errors import PipelineDataError

logger = logging.getLogger(__name__)

ONE_HOT_FIELDS = ("race", "lesion_type")


class ClinicalEncodingError(PipelineDataError):
    """Raised for an empty training set or a malformed persisted encoder."""


def category_slug(value: str) -> str:
    """Lowercase, non-alphanumerics collapsed to ``_`` (``Non-mass`` -> ``non_mass``)."""
    slug = re.sub(r"[^0-9a-z]+", "_", str(value).strip().lower()).strip("_")
    return slug or "unknown"


def _one_hot(vocabulary: Sequence[str]) -> OneHotEncoder:
    encoder = OneHotEncoder(categories=[list(vocabulary)], handle_unknown="ignore", sparse_output=False)
    return encoder.fit(np.array(vocabulary, dtype=object).reshape(-1, 1))


@dataclass(frozen=True, eq=False)
class ClinicalEncoder:
    vocabularies: dict[str, tuple[str, ...]]
    modal_grade: TumorGrade
    median_diameter_cm: float

    def __post_init__(self):
        missing = [f for f in ONE_HOT_FIELDS if f not in self.vocabularies]
        if missing:
            raise ValueError(f"encoder lacks vocabularies for {', '.join(missing)}")
        vocabs = {f: tuple(self.vocabularies[f]) for f in ONE_HOT_FIELDS}
        if any(not v for v in vocabs.values()):
            raise ValueError("encoder vocabularies must be non-empty")
        object.__setattr__(self, "vocabularies", vocabs)
        object.__setattr__(self, "_encoders", {f: _one_hot(v) for f, v in vocabs.items()})

    @property
    def feature_names(self) -> tuple[str, ...]:
        names = ["clinical_age", "clinical_hr", "clinical_her2", "clinical_grade", "clinical_diameter_cm"]
        for field_name in ONE_HOT_FIELDS:
            names.extend(f"clinical_{field_name}_{c}" for c in self.vocabularies[field_name])
        return tuple(names)

    def transform(self, record: ClinicalRecord) -> FeatureVector:
        """Encode one record; never looks at any other record."""
        grade = record.tumor_grade or self.modal_grade
        diameter = record.longest_diameter_cm if record.longest_diameter_cm is not None else self.median_diameter_cm
        values = [
            float(record.age),
            1.0 if record.hr_her2_status.hr_positive else 0.0,
            1.0 if record.hr_her2_status.her2_positive else 0.0,
            float(grade.ordinal),
            float(diameter),
        ]
        for field_name in ONE_HOT_FIELDS:
            category = category_slug(getattr(record, field_name))
            if category not in self.vocabularies[field_name]:
                logger.warning(
                    "patient %s: unseen %s category %r, encoded as all zeros",
                    record.patient_id,
                    field_name,
                    getattr(record, field_name),
                )
            row = self._encoders[field_name].transform(np.array([[category]], dtype=object))
            values.extend(float(v) for v in row[0])
        return FeatureVector(self.feature_names, tuple(values))

    def to_dict(self) -> dict:
        return {
            "vocabularies": {f: list(v) for f, v in self.vocabularies.items()},
            "modal_grade": self.modal_grade.value,
            "median_diameter_cm": self.median_diameter_cm,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ClinicalEncoder":
        try:
            return cls(
                vocabularies={f: tuple(payload["vocabularies"][f]) for f in ONE_HOT_FIELDS},
                modal_grade=TumorGrade.parse(payload["modal_grade"]),
                median_diameter_cm=float(payload["median_diameter_cm"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ClinicalEncodingError(f"malformed clinical encoder: {exc}") from exc


def _modal_grade(records: Sequence[ClinicalRecord]) -> TumorGrade:
    counts = Counter(r.tumor_grade for r in records if r.tumor_grade is not None)
    if not counts:
        return TumorGrade.HIGH
    # Ties resolve to the higher grade
    return max(counts, key=lambda g: (counts[g], g.ordinal))


def fit(records: Sequence[ClinicalRecord]) -> ClinicalEncoder:
    """Learn vocabularies, the modal grade and the median diameter from training records."""
    if not records:
        raise ClinicalEncodingError("cannot fit a clinical encoder on an empty training set")
    vocabularies = {f: tuple(sorted({category_slug(getattr(r, f)) for r in records})) for f in ONE_HOT_FIELDS}
    diameters = [r.longest_diameter_cm for r in records if r.longest_diameter_cm is not None]
    if diameters:
        median = float(statistics.median(diameters))
    else:
        logger.warning("no training diameter available; missing diameters are encoded as 0")
        median = 0.0
    encoder = ClinicalEncoder(vocabularies, _modal_grade(records), median)
    logger.debug("clinical encoder: modal grade %s, vocabularies %s", encoder.modal_grade.value, encoder.vocabularies)
    return encoder


def transform(encoder: ClinicalEncoder, record: ClinicalRecord) -> FeatureVector:
    return encoder.transform(record)
