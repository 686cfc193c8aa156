"""Feature matrix assembly and univariate ANOVA selection."""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Iterable, Mapping, Sequence

import numpy as np
from sklearn.feature_selection import f_classif

from src.models.dwi_study import TimePoint
from src.models.features import FeatureMatrix, PatientFeatures, SelectionReport
from src.utils.errors import PipelineDataError

logger = logging.getLogger(__name__)


class AssemblyError(PipelineDataError):
    """Raised when per-patient features cannot be aligned into one matrix."""


class SelectionError(PipelineDataError):
    """Raised when ANOVA scoring preconditions do not hold."""


def column_name(time_point: TimePoint, map_name: str, feature: str) -> str:
    return f"{time_point.value}_{map_name}_{feature}"


def assemble(
    patients: Sequence[PatientFeatures],
    map_subset: Iterable[str],
    timepoints: Iterable[TimePoint | str],
) -> FeatureMatrix:
    """Rows in input order; columns are timepoints x sorted maps x features, then clinical."""
    if not patients:
        raise AssemblyError("no patients to assemble")
    maps = sorted(set(map_subset))
    tps = sorted({TimePoint.parse(t) for t in timepoints}, key=lambda t: t.order)
    if not maps or not tps:
        raise AssemblyError("map subset and timepoints must be non-empty")

    first = patients[0]
    layout: list[tuple[TimePoint, str, tuple[str, ...]]] = []
    for tp in tps:
        for name in maps:
            vec = first.maps.get((tp, name))
            if vec is None:
                raise AssemblyError(f"patient {first.patient_id} has no {name} features at {tp.value}")
            layout.append((tp, name, vec.names))
    columns = [column_name(tp, name, f) for tp, name, names in layout for f in names]
    columns.extend(first.clinical.names)

    rows: list[list[float]] = []
    for patient in patients:
        row: list[float] = []
        for tp, name, names in layout:
            vec = patient.maps.get((tp, name))
            if vec is None:
                raise AssemblyError(f"patient {patient.patient_id} has no {name} features at {tp.value}")
            if vec.names != names:
                raise AssemblyError(f"patient {patient.patient_id}: {tp.value}/{name} feature names differ from the cohort")
            row.extend(vec.values)
        if patient.clinical.names != first.clinical.names:
            raise AssemblyError(f"patient {patient.patient_id}: clinical feature names differ from the cohort")
        row.extend(patient.clinical.values)
        rows.append(row)

    labelled = [p.label is not None for p in patients]
    if any(labelled) and not all(labelled):
        missing = [p.patient_id for p in patients if p.label is None]
        raise AssemblyError(f"labels missing for: {', '.join(missing)}")
    labels = np.array([p.label for p in patients], dtype=np.int64) if all(labelled) else None
    return FeatureMatrix(tuple(columns), tuple(p.patient_id for p in patients), np.array(rows), labels)


def anova_f_scores(X: FeatureMatrix) -> dict[str, float]:
    """One-way two-group F per column.

    A column whose classes are each constant scores +inf when the class values
    differ and 0 otherwise.
    """
    if X.labels is None:
        raise SelectionError("ANOVA scoring needs labels")
    y = X.labels
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SelectionError(f"ANOVA needs both classes, got {n_neg} negative / {n_pos} positive")
    if n_pos < 2 or n_neg < 2:
        raise SelectionError(f"ANOVA needs >= 2 samples per class, got {n_neg} negative / {n_pos} positive")

    with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore"):
        warnings.simplefilter("ignore")
        raw, _ = f_classif(X.values, y)

    neg, pos = X.values[y == 0], X.values[y == 1]
    constant = (np.ptp(neg, axis=0) == 0) & (np.ptp(pos, axis=0) == 0)
    differ = neg[0] != pos[0]
    scores: dict[str, float] = {}
    for j, name in enumerate(X.columns):
        if constant[j]:
            scores[name] = math.inf if differ[j] else 0.0
        elif not np.isfinite(raw[j]):
            scores[name] = 0.0
        else:
            scores[name] = float(raw[j])
    return scores


def select_top_k(scores: Mapping[str, float], k: int) -> SelectionReport:
    """The ``k`` best columns; equal scores go to the lexicographically earlier name."""
    if k < 1:
        raise SelectionError("k must be >= 1")
    ranked = sorted(scores, key=lambda name: (-scores[name], name))
    return SelectionReport(scores=dict(scores), chosen=tuple(ranked[:k]), k=min(k, len(ranked)))


def fit_selection(X: FeatureMatrix, k: int) -> SelectionReport:
    report = select_top_k(anova_f_scores(X), k)
    logger.debug("selected %d of %d columns, best %s", len(report.chosen), X.n_columns, report.chosen[:3])
    return report
