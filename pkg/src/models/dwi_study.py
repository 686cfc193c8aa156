"""Core volumetric data types shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

CANONICAL_BVALUES: tuple[float, ...] = (0.0, 100.0, 600.0, 800.0)

# b-value split between the pseudo-diffusion and diffusion regimes (s/mm^2)
PSEUDO_DIFFUSION_CUTOFF = 100.0

MAP_NAMES: tuple[str, ...] = ("ADC_0_100", "ADC_100_800", "ADC_0_800", "F")


class TimePoint(Enum):
    T0 = "T0"
    T1 = "T1"
    T2 = "T2"

    @classmethod
    def parse(cls, value: "str | TimePoint") -> "TimePoint":
        if isinstance(value, TimePoint):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError as exc:
            raise ValueError(f"unknown time point {value!r}; expected T0, T1 or T2") from exc

    @property
    def order(self) -> int:
        return int(self.value[1])


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class BValueSet:
    """Ordered diffusion weightings in s/mm^2."""

    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(b) for b in self.values)
        object.__setattr__(self, "values", values)
        if len(values) < 2:
            raise ValueError("a b-value set needs at least 2 entries")
        if any(b < 0 for b in values):
            raise ValueError(f"b-values must be >= 0, got {values}")
        if any(b2 <= b1 for b1, b2 in zip(values, values[1:])):
            raise ValueError(f"b-values must be strictly increasing, got {values}")

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @classmethod
    def canonical(cls) -> "BValueSet":
        return cls(CANONICAL_BVALUES)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def indices_between(self, b_min: float, b_max: float) -> list[int]:
        """Channel indices whose b-value lies in the closed range [b_min, b_max]."""
        return [i for i, b in enumerate(self.values) if b_min <= b <= b_max]

    def index_of(self, b: float) -> int | None:
        for i, value in enumerate(self.values):
            if value == b:
                return i
        return None


@dataclass(frozen=True, eq=False)
class DWIStudy:
    """One patient's DWI acquisition at one time point.

    The invariants listed for this type are reported by ``validate_study``
    rather than enforced here, so malformed clinical data can still be loaded
    and described.
    """

    patient_id: str
    time_point: TimePoint
    bvalues: BValueSet
    signal: np.ndarray  # (b, z, y, x)
    mask: np.ndarray  # (z, y, x) bool
    spacing: tuple[float, float, float]  # (dz, dy, dx) mm

    def __post_init__(self):
        if not self.patient_id:
            raise ValueError("patient_id must be non-empty")
        object.__setattr__(self, "time_point", TimePoint.parse(self.time_point))
        object.__setattr__(self, "signal", _readonly(np.asarray(self.signal, dtype=np.float64)))
        object.__setattr__(self, "mask", _readonly(np.asarray(self.mask, dtype=bool)))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.mask.shape)

    def channel(self, b: float) -> np.ndarray:
        idx = self.bvalues.index_of(b)
        if idx is None:
            raise KeyError(f"b={b:g} not acquired for {self.patient_id}/{self.time_point.value}")
        return self.signal[idx]

    def roi_mean_signal(self) -> np.ndarray:
        """Mean signal inside the tumor mask, one value per b-value."""
        return np.array([channel[self.mask].mean() for channel in self.signal])


@dataclass(frozen=True, eq=False)
class ParameterMap:
    """Named 3D scalar map with its validity mask."""

    name: str
    data: np.ndarray
    valid: np.ndarray
    spacing: tuple[float, float, float]

    def __post_init__(self):
        if not self.name:
            raise ValueError("map name must be non-empty")
        data = np.asarray(self.data, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if data.ndim != 3:
            raise ValueError(f"map {self.name} must be 3D, got shape {data.shape}")
        if data.shape != valid.shape:
            raise ValueError(f"map {self.name}: data {data.shape} and valid {valid.shape} differ")
        if not np.all(np.isfinite(data[valid])):
            raise ValueError(f"map {self.name} has non-finite values inside its valid region")
        if self.name == "F" and valid.any():
            f_values = data[valid]
            if f_values.min() < 0.0 or f_values.max() > 1.0:
                raise ValueError("F map values must lie in [0, 1] wherever valid")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "valid", _readonly(valid))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    def restricted_to(self, mask: np.ndarray) -> "ParameterMap":
        return ParameterMap(self.name, self.data, self.valid & np.asarray(mask, dtype=bool), self.spacing)


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}: {self.message}"


def validate_study(study: DWIStudy) -> list[Violation]:
    """Check every DWIStudy invariant and report violations without raising."""
    violations: list[Violation] = []
    signal, mask = study.signal, study.mask

    if signal.ndim != 4:
        violations.append(Violation("signal", "shape", f"signal must be 4D (b, z, y, x), got {signal.ndim}D"))
    if mask.ndim != 3:
        violations.append(Violation("mask", "shape", f"mask must be 3D, got {mask.ndim}D"))
    if signal.ndim == 4 and mask.ndim == 3:
        if signal.shape[1:] != mask.shape:
            violations.append(
                Violation("mask", "dim-mismatch", f"mask {mask.shape} != signal spatial dims {signal.shape[1:]}")
            )
    if signal.ndim >= 1 and signal.shape[0] != len(study.bvalues):
        violations.append(
            Violation(
                "signal",
                "channel-count",
                f"{signal.shape[0]} channels for {len(study.bvalues)} b-values",
            )
        )
    if not mask.any():
        violations.append(Violation("mask", "empty-mask", "mask has no true voxel"))
    if len(study.spacing) != 3 or any(s <= 0 or not np.isfinite(s) for s in study.spacing):
        violations.append(Violation("spacing", "spacing", f"spacing must be 3 positive values, got {study.spacing}"))
    if signal.size:
        if not np.all(np.isfinite(signal)):
            violations.append(Violation("signal", "non-finite-signal", "signal contains NaN or infinite values"))
        elif signal.min() < 0:
            violations.append(Violation("signal", "negative-signal", f"minimum signal {signal.min():g} < 0"))

    violations.extend(_bvalue_violations(study.bvalues))
    return violations


def _bvalue_violations(bvalues: BValueSet) -> list[Violation]:
    out: list[Violation] = []
    if bvalues.index_of(0.0) is None:
        out.append(Violation("bvalues", "bvalue-set", "b=0 image is missing"))
    low = bvalues.indices_between(0.0, PSEUDO_DIFFUSION_CUTOFF)
    high = bvalues.indices_between(PSEUDO_DIFFUSION_CUTOFF, np.inf)
    if len(low) < 2:
        out.append(
            Violation(
                "bvalues",
                "bvalue-set",
                f"need >= 2 b-values <= {PSEUDO_DIFFUSION_CUTOFF:g}, have {[bvalues.values[i] for i in low]}",
            )
        )
    if len(high) < 2:
        out.append(
            Violation(
                "bvalues",
                "bvalue-set",
                f"need >= 2 b-values >= {PSEUDO_DIFFUSION_CUTOFF:g}, have {[bvalues.values[i] for i in high]}",
            )
        )
    return out


@dataclass
class StudyIssues:
    """Violations found for one (patient, time point)."""

    patient_id: str
    time_point: TimePoint
    violations: list[Violation] = field(default_factory=list)

    def is_valid(self) -> bool:
        return not self.violations
