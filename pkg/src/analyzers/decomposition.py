"""Physiological decomposition of multi-b-value DWI.

ADC maps are log-linear least-squares fits of the mono-exponential model
``s = s0 * exp(-b * ADC)`` over b-value subsets; the pseudo-diffusion fraction
F comes from the segmented approach: fit the high-b regime, extrapolate its
intercept to b=0 and compare with the measured b=0 signal.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from src.models.dwi_study import (
    PSEUDO_DIFFUSION_CUTOFF,
    BValueSet,
    DWIStudy,
    ParameterMap,
    validate_study,
)
from src.utils.errors import PipelineDataError

logger = logging.getLogger(__name__)


class DecompositionError(PipelineDataError):
    """Raised when a study cannot be decomposed (bad b-values or invalid study)."""


@dataclass(frozen=True)
class MonoExpFit:
    adc: float  # mm^2/s
    log_s0: float
    residual: float  # sum of squared log-domain residuals

    @property
    def s0(self) -> float:
        return float(np.exp(self.log_s0))


@dataclass(frozen=True)
class IVIMParams:
    s0: float
    d: float  # mm^2/s
    d_star: float  # mm^2/s
    f: float

    def __post_init__(self):
        if not self.s0 > 0:
            raise ValueError("s0 must be > 0")
        if self.d < 0:
            raise ValueError("d must be >= 0")
        if self.d_star < self.d:
            raise ValueError("d_star must be >= d")
        if not 0.0 <= self.f <= 1.0:
            raise ValueError("f must be in [0, 1]")


@dataclass(frozen=True)
class RoiDecay:
    """ROI-averaged signal with the three regime fits and the F estimate."""

    bvalues: tuple[float, ...]
    mean_signal: tuple[float, ...]
    fits: dict[str, MonoExpFit | None]
    f: float | None


def _loglinear_ols(b: np.ndarray, log_s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """OLS of ``log_s`` (n, ...) against ``b`` (n,); returns slope, intercept, residual SS."""
    if b.shape[0] == 2:
        # Two points: the closed form is exact
        slope = (log_s[1] - log_s[0]) / (b[1] - b[0])
        intercept = log_s[0] - slope * b[0]
        return slope, intercept, np.zeros_like(slope)
    b_mean = b.mean()
    db = b - b_mean
    y_mean = log_s.mean(axis=0)
    slope = np.tensordot(db, log_s - y_mean, axes=(0, 0)) / np.dot(db, db)
    intercept = y_mean - slope * b_mean
    shape = (-1,) + (1,) * (log_s.ndim - 1)
    resid = log_s - (intercept + slope * b.reshape(shape))
    return slope, intercept, np.sum(resid * resid, axis=0)


def fit_monoexp(signals: Sequence[tuple[float, float]]) -> MonoExpFit | None:
    """Fit ``ln s = log_s0 - b * ADC`` to (b, s) pairs.

    Returns None (voxel-invalid) when any signal is non-positive or non-finite.

    Raises:
        DecompositionError: fewer than 2 pairs or duplicate b-values
    """
    pairs = sorted((float(b), float(s)) for b, s in signals)
    if len(pairs) < 2:
        raise DecompositionError("a mono-exponential fit needs at least 2 (b, s) pairs")
    b = np.array([p[0] for p in pairs])
    s = np.array([p[1] for p in pairs])
    if np.any(np.diff(b) == 0):
        raise DecompositionError(f"duplicate b-values in fit input: {b.tolist()}")
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        return None
    slope, intercept, residual = _loglinear_ols(b, np.log(s))
    return MonoExpFit(adc=float(-slope), log_s0=float(intercept), residual=float(residual))


def ivim_signal(
    bvalues: np.ndarray,
    s0: np.ndarray | float,
    d: np.ndarray | float,
    d_star: np.ndarray | float,
    f: np.ndarray | float,
) -> np.ndarray:
    """Vectorized bi-exponential IVIM signal, shape (len(bvalues), *param_shape)."""
    b = np.asarray(bvalues, dtype=np.float64)
    s0, d, d_star, f = (np.asarray(x, dtype=np.float64) for x in (s0, d, d_star, f))
    b = b.reshape((-1,) + (1,) * np.broadcast(s0, d, d_star, f).nd)
    return s0 * (f * np.exp(-b * (d_star + d)) + (1.0 - f) * np.exp(-b * d))


def ivim_forward(params: IVIMParams, bvalues: BValueSet) -> list[float]:
    out = ivim_signal(bvalues.as_array(), params.s0, params.d, params.d_star, params.f)
    return [float(v) for v in out]


def _subset(study: DWIStudy, b_min: float, b_max: float, label: str) -> list[int]:
    idx = study.bvalues.indices_between(b_min, b_max)
    if len(idx) < 2:
        raise DecompositionError(
            f"subset {label} needs >= 2 b-values in [{b_min:g}, {b_max:g}], "
            f"study {study.patient_id}/{study.time_point.value} has {list(study.bvalues.values)}"
        )
    return idx


def _fit_subset(study: DWIStudy, idx: list[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Voxelwise fit over channels ``idx``; returns (adc, log_s0, fit_ok)."""
    sub = study.signal[idx]
    ok = np.all(np.isfinite(sub) & (sub > 0), axis=0)
    log_s = np.log(np.where(ok, sub, 1.0))
    slope, intercept, _ = _loglinear_ols(study.bvalues.as_array()[idx], log_s)
    ok &= np.isfinite(slope) & np.isfinite(intercept)
    return -slope, intercept, ok


def compute_adc_map(study: DWIStudy, b_min: float, b_max: float, name: str | None = None) -> ParameterMap:
    """ADC over the b-values in [b_min, b_max]; valid inside the mask where all signals > 0."""
    label = name or f"ADC_{b_min:g}_{b_max:g}"
    idx = _subset(study, b_min, b_max, label)
    adc, _, ok = _fit_subset(study, idx)
    valid = ok & study.mask
    n_dropped = int(np.count_nonzero(study.mask & ~ok))
    if n_dropped:
        logger.debug("%s %s/%s: %d masked voxels invalid", label, study.patient_id, study.time_point.value, n_dropped)
    return ParameterMap(label, np.where(valid, adc, 0.0), valid, study.spacing)


def compute_f(study: DWIStudy) -> ParameterMap:
    """Pseudo-diffusion fraction ``clamp((s(0) - s0') / s(0), 0, 1)``.

    ``s0'`` is the b=0 intercept of the mono-exponential fit over b >= 100.
    """
    if study.bvalues.index_of(0.0) is None:
        raise DecompositionError(f"F needs a b=0 image; {study.patient_id}/{study.time_point.value} has none")
    idx = _subset(study, PSEUDO_DIFFUSION_CUTOFF, np.inf, "F")
    _, log_s0, ok = _fit_subset(study, idx)
    s_b0 = study.channel(0.0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        s0_prime = np.exp(log_s0)
        f = (s_b0 - s0_prime) / s_b0
    valid = ok & study.mask & np.isfinite(s_b0) & (s_b0 > 0) & np.isfinite(f)
    f = np.clip(np.where(valid, f, 0.0), 0.0, 1.0)
    return ParameterMap("F", f, valid, study.spacing)


def decompose_study(study: DWIStudy) -> dict[str, ParameterMap]:
    """ADC_0_100, ADC_100_800, ADC_0_800 and F for one study.

    Map names denote the regime (low b, high b, all b) as acquired with the
    standard {0, 100, 600, 800} protocol.
    """
    violations = validate_study(study)
    if violations:
        raise DecompositionError(
            f"invalid study {study.patient_id}/{study.time_point.value}: " + "; ".join(str(v) for v in violations)
        )
    b_max = float(study.bvalues.values[-1])
    b_min = float(study.bvalues.values[0])
    return {
        "ADC_0_100": compute_adc_map(study, b_min, PSEUDO_DIFFUSION_CUTOFF, "ADC_0_100"),
        "ADC_100_800": compute_adc_map(study, PSEUDO_DIFFUSION_CUTOFF, b_max, "ADC_100_800"),
        "ADC_0_800": compute_adc_map(study, b_min, b_max, "ADC_0_800"),
        "F": compute_f(study),
    }


def fit_roi_signal(study: DWIStudy) -> RoiDecay:
    """Fit the three regimes to the ROI-mean signal (what a decay plot shows)."""
    b = study.bvalues.values
    mean = study.roi_mean_signal()
    cut = PSEUDO_DIFFUSION_CUTOFF
    subsets = {
        "ADC_0_100": [i for i, v in enumerate(b) if v <= cut],
        "ADC_100_800": [i for i, v in enumerate(b) if v >= cut],
        "ADC_0_800": list(range(len(b))),
    }
    fits: dict[str, MonoExpFit | None] = {}
    for name, idx in subsets.items():
        fits[name] = fit_monoexp([(b[i], mean[i]) for i in idx]) if len(idx) >= 2 else None
    f = None
    high = fits["ADC_100_800"]
    i0 = study.bvalues.index_of(0.0)
    if high is not None and i0 is not None and mean[i0] > 0:
        f = float(np.clip((mean[i0] - high.s0) / mean[i0], 0.0, 1.0))
    return RoiDecay(tuple(b), tuple(float(m) for m in mean), fits, f)
