"""Synthetic DWI phantoms and labeled cohorts from the IVIM forward model.

Randomness is derived from ``SeedSequence([seed, *stream])`` with a Philox
generator, so each (patient, time point) draws from its own stream and the
output does not depend on how many workers generate the cohort.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from joblib import Parallel, delayed

from src.analyzers.decomposition import IVIMParams, ivim_signal
from src.models.clinical import ClinicalRecord, HrHer2Status, TumorGrade
from src.models.dwi_study import BValueSet, DWIStudy, ParameterMap, TimePoint

logger = logging.getLogger(__name__)


def _generator(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def _derive_seed(seed: int, *stream: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, stream)]).generate_state(1, np.uint64)[0])


class NoiseKind(Enum):
    NONE = "none"
    RICIAN = "rician"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = NoiseKind.NONE
    snr: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if self.kind is NoiseKind.RICIAN and (self.snr is None or not self.snr > 0):
            raise ValueError("rician noise needs snr > 0")

    @classmethod
    def rician(cls, snr: float) -> "NoiseModel":
        return cls(NoiseKind.RICIAN, snr)


@dataclass(frozen=True)
class EllipsoidRegion:
    """Axis-aligned ellipsoid in voxel coordinates (z, y, x)."""

    center: tuple[float, float, float]
    radii: tuple[float, float, float]
    params: IVIMParams

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if len(self.center) != 3 or len(self.radii) != 3:
            raise ValueError("center and radii need 3 components (z, y, x)")
        if any(r <= 0 for r in self.radii):
            raise ValueError("radii must be > 0")

    def mask(self, shape: tuple[int, int, int]) -> np.ndarray:
        zz, yy, xx = np.indices(shape, dtype=np.float64)
        dist = sum(((axis - c) / r) ** 2 for axis, c, r in zip((zz, yy, xx), self.center, self.radii))
        return dist <= 1.0


@dataclass(frozen=True)
class PhantomSpec:
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    background: IVIMParams
    regions: tuple[EllipsoidRegion, ...]
    bvalues: BValueSet = field(default_factory=BValueSet.canonical)
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    param_jitter: float = 0.0  # relative per-voxel sd of D, D*, F inside regions
    patient_id: str = "PHANTOM"
    time_point: TimePoint = TimePoint.T0

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "regions", tuple(self.regions))
        if len(self.shape) != 3 or any(s < 1 for s in self.shape):
            raise ValueError(f"grid shape must be 3 positive ints, got {self.shape}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError("spacing must be 3 positive values")
        if not self.regions:
            raise ValueError("a phantom needs at least one region")
        for region in self.regions:
            for c, r, n in zip(region.center, region.radii, self.shape):
                if c - r < -0.5 or c + r > n - 0.5:
                    raise ValueError(f"region at {region.center} with radii {region.radii} leaves the grid {self.shape}")
        if not 0.0 <= self.param_jitter < 1.0:
            raise ValueError("param_jitter must be in [0, 1)")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    s0: np.ndarray
    d: np.ndarray
    d_star: np.ndarray
    f: np.ndarray


def generate_phantom(spec: PhantomSpec) -> tuple[DWIStudy, GroundTruth]:
    """Render ``spec`` through the IVIM forward model; later regions overwrite earlier ones."""
    shape = spec.shape
    bg = spec.background
    s0 = np.full(shape, bg.s0)
    d = np.full(shape, bg.d)
    d_star = np.full(shape, bg.d_star)
    f = np.full(shape, bg.f)
    mask = np.zeros(shape, dtype=bool)

    jitter_rng = _generator(spec.seed, 1)
    for region in spec.regions:
        inside = region.mask(shape)
        if not inside.any():
            raise ValueError(f"region at {region.center} covers no voxel center")
        mask |= inside
        p = region.params
        n = int(inside.sum())
        if spec.param_jitter > 0:
            scale = 1.0 + spec.param_jitter * jitter_rng.standard_normal((3, n))
            np.clip(scale, 0.5, 1.5, out=scale)
            d_vals = p.d * scale[0]
            d[inside] = d_vals
            d_star[inside] = np.maximum(p.d_star * scale[1], d_vals)
            f[inside] = np.clip(p.f * scale[2], 0.0, 1.0)
        else:
            d[inside], d_star[inside], f[inside] = p.d, p.d_star, p.f
        s0[inside] = p.s0

    signal = ivim_signal(spec.bvalues.as_array(), s0, d, d_star, f)
    if spec.noise.kind is NoiseKind.RICIAN:
        sigma = bg.s0 / spec.noise.snr
        noise = _generator(spec.seed, 2).normal(0.0, sigma, size=(2, *signal.shape))
        signal = np.hypot(signal + noise[0], noise[1])

    study = DWIStudy(spec.patient_id, spec.time_point, spec.bvalues, signal, mask, spec.spacing)
    return study, GroundTruth(s0, d, d_star, f)


@dataclass(frozen=True)
class ShiftRule:
    """Relative parameter change reached at T2 (half of it at T1)."""

    f: float = 0.0
    d: float = 0.0

    def __post_init__(self):
        if self.f <= -1.0 or self.d <= -1.0:
            raise ValueError("shifts must stay above -100%")

    def factor(self, time_point: TimePoint) -> tuple[float, float]:
        progress = time_point.order / 2.0
        return 1.0 + self.f * progress, 1.0 + self.d * progress


RACES = ("white", "black", "asian", "other")
RACE_WEIGHTS = (0.70, 0.15, 0.10, 0.05)
LESION_TYPES = ("single mass", "multiple masses", "non-mass", "multiple NME")
LESION_WEIGHTS = (0.60, 0.20, 0.15, 0.05)
HR_HER2_WEIGHTS = (0.20, 0.40, 0.15, 0.25)
GRADE_WEIGHTS = (0.10, 0.35, 0.55)


@dataclass(frozen=True)
class CohortSpec:
    """Cohort layout; responders at T2 lose F and gain D by the given fractions.

    The default shifts roughly cancel in the all-b ADC so that only maps that
    separate the pseudo-diffusion regime carry the response signal.
    """

    n_patients: int = 150
    prevalence: float = 0.3
    shape: tuple[int, int, int] = (8, 16, 16)
    spacing: tuple[float, float, float] = (4.0, 2.0, 2.0)
    bvalues: BValueSet = field(default_factory=BValueSet.canonical)
    background: IVIMParams = IVIMParams(s0=1000.0, d=2.0e-3, d_star=15.0e-3, f=0.05)
    tumor_s0: float = 1200.0
    tumor_d: tuple[float, float] = (0.9e-3, 1.3e-3)
    tumor_d_star: tuple[float, float] = (20.0e-3, 40.0e-3)
    tumor_f: tuple[float, float] = (0.12, 0.18)
    responder_shift: ShiftRule = ShiftRule(f=-0.5, d=0.08)
    non_responder_shift: ShiftRule = ShiftRule()
    noise: NoiseModel = NoiseModel(NoiseKind.RICIAN, 50.0)
    voxel_jitter: float = 0.05
    timepoint_jitter: float = 0.03
    missing_grade_rate: float = 0.1
    ser_gain: float = 4.0
    seed: int = 0
    timepoints: tuple[TimePoint, ...] = (TimePoint.T0, TimePoint.T1, TimePoint.T2)

    def __post_init__(self):
        if self.n_patients < 2:
            raise ValueError("n_patients must be >= 2")
        if not 0.0 < self.prevalence < 1.0:
            raise ValueError("prevalence must be in (0, 1)")
        n_pos = self.n_positive
        if n_pos < 1 or n_pos >= self.n_patients:
            raise ValueError(f"prevalence {self.prevalence} leaves a class empty at n={self.n_patients}")
        for name in ("tumor_d", "tumor_d_star", "tumor_f"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is reversed")
        if self.tumor_d[1] > self.tumor_d_star[0]:
            raise ValueError("tumor D range must lie below the D* range")
        if not 0.0 <= self.missing_grade_rate < 1.0:
            raise ValueError("missing_grade_rate must be in [0, 1)")
        object.__setattr__(self, "timepoints", tuple(TimePoint.parse(t) for t in self.timepoints))

    @property
    def n_positive(self) -> int:
        return int(round(self.prevalence * self.n_patients))


@dataclass(frozen=True, eq=False)
class CohortMember:
    patient_id: str
    label: int
    clinical: ClinicalRecord
    studies: dict[TimePoint, DWIStudy]
    extra_maps: dict[TimePoint, dict[str, ParameterMap]]
    truth: dict[TimePoint, GroundTruth]


def assign_labels(n_patients: int, n_positive: int, seed: int) -> np.ndarray:
    """Exactly ``n_positive`` ones in seeded random order."""
    labels = np.zeros(n_patients, dtype=np.int64)
    labels[:n_positive] = 1
    return _generator(seed, 0).permutation(labels)


def _sample_clinical(patient_id: str, rng: np.random.Generator, spec: CohortSpec) -> ClinicalRecord:
    statuses = list(HrHer2Status)
    grades = list(TumorGrade)
    grade = None
    if rng.random() >= spec.missing_grade_rate:
        grade = grades[int(rng.choice(len(grades), p=GRADE_WEIGHTS))]
    return ClinicalRecord(
        patient_id=patient_id,
        age=float(rng.integers(28, 76)),
        race=RACES[int(rng.choice(len(RACES), p=RACE_WEIGHTS))],
        lesion_type=LESION_TYPES[int(rng.choice(len(LESION_TYPES), p=LESION_WEIGHTS))],
        hr_her2_status=statuses[int(rng.choice(len(statuses), p=HR_HER2_WEIGHTS))],
        tumor_grade=grade,
        longest_diameter_cm=round(float(rng.uniform(1.5, 6.0)), 1),
    )


def _generate_member(spec: CohortSpec, index: int, label: int) -> CohortMember:
    patient_id = f"P{index + 1:03d}"
    rng = _generator(spec.seed, 1, index)
    d0 = rng.uniform(*spec.tumor_d)
    d_star = rng.uniform(*spec.tumor_d_star)
    f0 = rng.uniform(*spec.tumor_f)
    z, y, x = spec.shape
    center = (
        (z - 1) / 2.0 + rng.uniform(-0.5, 0.5),
        (y - 1) / 2.0 + rng.uniform(-1.0, 1.0),
        (x - 1) / 2.0 + rng.uniform(-1.0, 1.0),
    )
    radii = (
        min(rng.uniform(0.3, 0.4) * z, center[0] + 0.5, z - 0.5 - center[0]),
        min(rng.uniform(0.25, 0.35) * y, center[1] + 0.5, y - 0.5 - center[1]),
        min(rng.uniform(0.25, 0.35) * x, center[2] + 0.5, x - 0.5 - center[2]),
    )
    clinical = _sample_clinical(patient_id, rng, spec)
    shift = spec.responder_shift if label == 1 else spec.non_responder_shift

    studies: dict[TimePoint, DWIStudy] = {}
    extras: dict[TimePoint, dict[str, ParameterMap]] = {}
    truths: dict[TimePoint, GroundTruth] = {}
    for tp in spec.timepoints:
        f_factor, d_factor = shift.factor(tp)
        wobble = 1.0 + spec.timepoint_jitter * rng.standard_normal(2)
        d = d0 * d_factor * wobble[0]
        f = float(np.clip(f0 * f_factor * wobble[1], 0.0, 1.0))
        params = IVIMParams(s0=spec.tumor_s0, d=d, d_star=max(d_star, d), f=f)
        phantom = PhantomSpec(
            shape=spec.shape,
            spacing=spec.spacing,
            background=spec.background,
            regions=(EllipsoidRegion(center, radii, params),),
            bvalues=spec.bvalues,
            noise=spec.noise,
            seed=_derive_seed(spec.seed, 2, index, tp.order),
            param_jitter=spec.voxel_jitter,
            patient_id=patient_id,
            time_point=tp,
        )
        study, truth = generate_phantom(phantom)
        studies[tp] = study
        truths[tp] = truth
        # DCE-like enhancement surrogate tied to perfusion; not a DCE computation
        ser = 1.0 + spec.ser_gain * truth.f
        extras[tp] = {"SER": ParameterMap("SER", ser, study.mask, spec.spacing)}
    return CohortMember(patient_id, int(label), clinical, studies, extras, truths)


def generate_cohort(spec: CohortSpec, n_jobs: int = 1) -> list[CohortMember]:
    """Labeled cohort; bitwise identical for a given seed regardless of ``n_jobs``."""
    labels = assign_labels(spec.n_patients, spec.n_positive, spec.seed)
    logger.info(
        "generating %d patients (%d pCR) at %s", spec.n_patients, int(labels.sum()), "/".join(t.value for t in spec.timepoints)
    )
    members = Parallel(n_jobs=n_jobs)(
        delayed(_generate_member)(spec, i, int(label)) for i, label in enumerate(labels)
    )
    return list(members)
