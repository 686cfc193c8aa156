"""Tabular artifacts: feature matrices, predictions and label files."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pandas as pd

from src.models.features import FeatureMatrix
from src.reporters.file_reporter import write_csv
from src.utils.errors import PipelineDataError

ID_COLUMN = "patient_id"
LABEL_COLUMN = "pcr"
PROBABILITY_COLUMN = "probability"


class FeaturesParserError(PipelineDataError):
    """Exception raised when a tabular artifact is malformed."""


def _read_frame(path: str | Path, what: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    try:
        frame = pd.read_csv(path, dtype={ID_COLUMN: str}, float_precision="round_trip", keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise FeaturesParserError(f"{path}: {exc}") from exc
    if ID_COLUMN not in frame.columns:
        raise FeaturesParserError(f"{path}: missing {ID_COLUMN} column")
    if frame[ID_COLUMN].duplicated().any():
        dupes = sorted(set(frame.loc[frame[ID_COLUMN].duplicated(), ID_COLUMN]))
        raise FeaturesParserError(f"{path}: duplicate patient ids: {', '.join(dupes)}")
    return frame


def _numeric(frame: pd.DataFrame, columns: list[str], path: str | Path) -> np.ndarray:
    try:
        return frame[columns].apply(pd.to_numeric, errors="raise").to_numpy(dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise FeaturesParserError(f"{path}: non-numeric value: {exc}") from exc


def _labels(frame: pd.DataFrame, path: str | Path) -> np.ndarray:
    values = _numeric(frame, [LABEL_COLUMN], path)[:, 0]
    if not np.all(np.isin(values, (0.0, 1.0))):
        bad = frame.loc[~np.isin(values, (0.0, 1.0)), ID_COLUMN].tolist()
        raise FeaturesParserError(f"{path}: {LABEL_COLUMN} must be 0 or 1 (patients {', '.join(map(str, bad))})")
    return values.astype(np.int64)


def read_feature_matrix(path: str | Path) -> FeatureMatrix:
    """Header ``patient_id[,pcr],<features...>``; the ``pcr`` column is optional."""
    frame = _read_frame(path, "Feature matrix")
    columns = [c for c in frame.columns if c not in (ID_COLUMN, LABEL_COLUMN)]
    values = _numeric(frame, columns, path)
    labels = _labels(frame, path) if LABEL_COLUMN in frame.columns else None
    try:
        return FeatureMatrix(tuple(columns), tuple(frame[ID_COLUMN]), values, labels)
    except ValueError as exc:
        raise FeaturesParserError(f"{path}: {exc}") from exc


def write_feature_matrix(matrix: FeatureMatrix, path: str | Path) -> Path:
    frame = pd.DataFrame(matrix.values, columns=list(matrix.columns))
    if matrix.labels is not None:
        frame.insert(0, LABEL_COLUMN, matrix.labels)
    frame.insert(0, ID_COLUMN, list(matrix.ids))
    return write_csv(path, frame)


def write_predictions(ids: tuple[str, ...], probabilities: np.ndarray, path: str | Path) -> Path:
    frame = pd.DataFrame({ID_COLUMN: list(ids), PROBABILITY_COLUMN: np.asarray(probabilities, dtype=np.float64)})
    return write_csv(path, frame)


def read_predictions(path: str | Path) -> pd.Series:
    frame = _read_frame(path, "Predictions")
    if PROBABILITY_COLUMN not in frame.columns:
        raise FeaturesParserError(f"{path}: missing {PROBABILITY_COLUMN} column")
    values = _numeric(frame, [PROBABILITY_COLUMN], path)[:, 0]
    return pd.Series(values, index=frame[ID_COLUMN].tolist(), name=PROBABILITY_COLUMN)


def write_labels(ids: tuple[str, ...], labels: np.ndarray, path: str | Path) -> Path:
    return write_csv(path, pd.DataFrame({ID_COLUMN: list(ids), LABEL_COLUMN: np.asarray(labels, dtype=np.int64)}))


def read_labels(path: str | Path) -> pd.Series:
    """Labels from any CSV with ``patient_id`` and ``pcr`` columns (a feature matrix works too)."""
    frame = _read_frame(path, "Labels")
    if LABEL_COLUMN not in frame.columns:
        raise FeaturesParserError(f"{path}: missing {LABEL_COLUMN} column")
    return pd.Series(_labels(frame, path), index=frame[ID_COLUMN].tolist(), name=LABEL_COLUMN)


def align(predictions: pd.Series, labels: pd.Series) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Join on patient id in prediction order; every predicted patient needs a label."""
    missing = [i for i in predictions.index if i not in labels.index]
    if missing:
        raise FeaturesParserError(f"no label for predicted patients: {', '.join(missing[:10])}")
    ids = list(predictions.index)
    return ids, predictions.to_numpy(dtype=np.float64), labels.loc[ids].to_numpy(dtype=np.int64)
