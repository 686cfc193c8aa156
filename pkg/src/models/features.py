"""Feature containers: per-region vectors, the cohort matrix, selection results."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from src.models.dwi_study import TimePoint


@dataclass(frozen=True)
class FeatureVector:
    """Ordered (name, value) pairs with unique names and finite values."""

    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        names = tuple(self.names)
        values = tuple(float(v) for v in self.values)
        if len(names) != len(values):
            raise ValueError(f"{len(names)} names for {len(values)} values")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        bad = [n for n, v in zip(names, values) if not math.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite feature values: {', '.join(bad)}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, float]]) -> "FeatureVector":
        pairs = list(pairs)
        return cls(tuple(n for n, _ in pairs), tuple(v for _, v in pairs))

    @classmethod
    def concat(cls, *vectors: "FeatureVector") -> "FeatureVector":
        names: list[str] = []
        values: list[float] = []
        for vec in vectors:
            names.extend(vec.names)
            values.extend(vec.values)
        return cls(tuple(names), tuple(values))

    def prefixed(self, prefix: str) -> "FeatureVector":
        return FeatureVector(tuple(f"{prefix}_{n}" for n in self.names), self.values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    def __getitem__(self, name: str) -> float:
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def __len__(self) -> int:
        return len(self.names)


@dataclass
class PatientFeatures:
    """Everything extracted for one patient before matrix assembly."""

    patient_id: str
    maps: dict[tuple[TimePoint, str], FeatureVector]
    clinical: FeatureVector
    label: int | None = None

    def timepoints(self) -> set[TimePoint]:
        return {tp for tp, _ in self.maps}


@dataclass(eq=False)
class FeatureMatrix:
    """Rows are patients, columns stably named features; optional binary labels."""

    columns: tuple[str, ...]
    ids: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.ids = tuple(str(i) for i in self.ids)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(len(self.ids), len(self.columns))
        if len(set(self.columns)) != len(self.columns):
            dupes = sorted({c for c in self.columns if self.columns.count(c) > 1})
            raise ValueError(f"duplicate column names: {', '.join(dupes)}")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate patient ids")
        if not np.all(np.isfinite(self.values)):
            rows, cols = np.nonzero(~np.isfinite(self.values))
            raise ValueError(f"non-finite value at patient {self.ids[rows[0]]}, column {self.columns[cols[0]]}")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (len(self.ids),):
                raise ValueError(f"{labels.shape[0] if labels.ndim else 0} labels for {len(self.ids)} rows")
            if not np.all(np.isin(labels, (0, 1))):
                raise ValueError("labels must be binary 0/1")
            self.labels = labels.astype(np.int64)

    @property
    def n_rows(self) -> int:
        return len(self.ids)

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def has_labels(self) -> bool:
        return self.labels is not None

    def require_labels(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError("feature matrix has no labels")
        return self.labels

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        missing = [c for c in columns if c not in self.columns]
        if missing:
            raise KeyError(f"columns not in feature matrix: {', '.join(missing)}")
        index = {c: i for i, c in enumerate(self.columns)}
        idx = [index[c] for c in columns]
        return FeatureMatrix(tuple(columns), self.ids, self.values[:, idx], self.labels)

    def take(self, rows: Sequence[int] | np.ndarray) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        labels = None if self.labels is None else self.labels[rows]
        return FeatureMatrix(self.columns, tuple(self.ids[i] for i in rows), self.values[rows], labels)

    def with_labels(self, labels: np.ndarray | None) -> "FeatureMatrix":
        return FeatureMatrix(self.columns, self.ids, self.values, labels)

    def equals(self, other: "FeatureMatrix") -> bool:
        if self.columns != other.columns or self.ids != other.ids:
            return False
        if not np.array_equal(self.values, other.values):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return self.labels is None or bool(np.array_equal(self.labels, other.labels))


@dataclass(frozen=True)
class SelectionReport:
    """ANOVA scores for every column and the chosen top-k, best first."""

    scores: Mapping[str, float]
    chosen: tuple[str, ...]
    k: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "scores", dict(self.scores))
        object.__setattr__(self, "chosen", tuple(self.chosen))
        if not self.k:
            object.__setattr__(self, "k", len(self.chosen))
        unknown = [c for c in self.chosen if c not in self.scores]
        if unknown:
            raise ValueError(f"chosen columns without a score: {', '.join(unknown)}")

    def apply(self, matrix: FeatureMatrix) -> FeatureMatrix:
        """Restrict ``matrix`` to the chosen columns; scores are never recomputed."""
        return matrix.select(self.chosen)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "chosen": list(self.chosen),
            "scores": {name: _encode_score(score) for name, score in self.scores.items()},
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "SelectionReport":
        return cls(
            scores={str(n): _decode_score(s) for n, s in payload["scores"].items()},
            chosen=tuple(payload["chosen"]),
            k=int(payload.get("k", 0)),
        )


def _encode_score(score: float) -> float | str:
    return "inf" if math.isinf(score) else score


def _decode_score(value: float | str) -> float:
    return math.inf if value == "inf" else float(value)
