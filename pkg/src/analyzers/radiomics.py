"""3D radiomics on a parameter map restricted to the tumor region.

Three feature classes are extracted, always in this order and each sorted by
name: first-order statistics (18), shape (5) and GLCM texture (10).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist

from src.models.dwi_study import ParameterMap
from src.models.features import FeatureVector
from src.utils.errors import PipelineDataError

logger = logging.getLogger(__name__)

FIRSTORDER_NAMES = (
    "energy",
    "entropy",
    "interquartile_range",
    "kurtosis",
    "maximum",
    "mean",
    "mean_absolute_deviation",
    "median",
    "minimum",
    "percentile_10",
    "percentile_90",
    "range",
    "robust_mean_absolute_deviation",
    "root_mean_squared",
    "skewness",
    "total_energy",
    "uniformity",
    "variance",
)
SHAPE_NAMES = ("elongation", "maximum_3d_diameter", "sphericity", "surface_area", "voxel_volume")
GLCM_NAMES = (
    "cluster_tendency",
    "contrast",
    "correlation",
    "dissimilarity",
    "energy",
    "homogeneity",
    "inverse_difference",
    "inverse_difference_moment",
    "joint_entropy",
    "joint_maximum",
)
FEATURE_CLASSES = (("firstorder", FIRSTORDER_NAMES), ("shape", SHAPE_NAMES), ("glcm", GLCM_NAMES))

# 13 unique directions of the 26-neighbourhood; the opposite ones come from symmetry
GLCM_OFFSETS: tuple[tuple[int, int, int], ...] = tuple(
    off for off in itertools.product((-1, 0, 1), repeat=3) if off > (0, 0, 0)
)

_CONSTANT_GLCM = {
    "cluster_tendency": 0.0,
    "contrast": 0.0,
    "correlation": 0.0,
    "dissimilarity": 0.0,
    "energy": 1.0,
    "homogeneity": 1.0,
    "inverse_difference": 1.0,
    "inverse_difference_moment": 1.0,
    "joint_entropy": 0.0,
    "joint_maximum": 1.0,
}


class ExtractionError(PipelineDataError):
    """Raised when a region has nothing to extract from."""


@dataclass(frozen=True)
class DiscretizationConfig:
    bin_count: int = 32

    def __post_init__(self):
        if self.bin_count < 2:
            raise ValueError("bin_count must be >= 2")


def feature_names() -> tuple[str, ...]:
    """Class-prefixed names in extraction order."""
    return tuple(f"{cls}_{name}" for cls, names in FEATURE_CLASSES for name in names)


def _region(pmap: ParameterMap, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != pmap.data.shape:
        raise ExtractionError(f"mask {mask.shape} does not match map {pmap.name} {pmap.data.shape}")
    region = mask & pmap.valid
    if not region.any():
        raise ExtractionError(f"map {pmap.name}: no valid voxel inside the mask")
    return region


def _bin(values: np.ndarray, bin_count: int) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi <= lo:
        return np.ones(values.shape, dtype=np.int64)
    levels = np.ceil((values - lo) * bin_count / (hi - lo)).astype(np.int64)
    return np.clip(levels, 1, bin_count)


def discretize(pmap: ParameterMap, mask: np.ndarray, cfg: DiscretizationConfig) -> np.ndarray:
    """Equal-width levels 1..bin_count over the region's range; 0 outside the region.

    Bins are right-closed so the region maximum lands in the top bin and a
    constant region is entirely level 1.
    """
    region = _region(pmap, mask)
    levels = np.zeros(region.shape, dtype=np.int64)
    levels[region] = _bin(pmap.data[region], cfg.bin_count)
    return levels


def _firstorder(values: np.ndarray, voxel_volume: float, bin_count: int) -> dict[str, float]:
    mean = values.mean()
    variance = values.var()
    p10, p25, median, p75, p90 = np.percentile(values, [10, 25, 50, 75, 90])
    robust = values[(values >= p10) & (values <= p90)]
    _, counts = np.unique(_bin(values, bin_count), return_counts=True)
    p = counts / counts.sum()
    energy = float(np.sum(values * values))
    if variance > 0:
        skewness = float(stats.skew(values, bias=True))
        kurtosis = float(stats.kurtosis(values, fisher=False, bias=True))
    else:
        skewness = kurtosis = 0.0
    return {
        "energy": energy,
        "entropy": float(-np.sum(p * np.log2(p))) + 0.0,
        "interquartile_range": float(p75 - p25),
        "kurtosis": kurtosis,
        "maximum": float(values.max()),
        "mean": float(mean),
        "mean_absolute_deviation": float(np.mean(np.abs(values - mean))),
        "median": float(median),
        "minimum": float(values.min()),
        "percentile_10": float(p10),
        "percentile_90": float(p90),
        "range": float(values.max() - values.min()),
        "robust_mean_absolute_deviation": float(np.mean(np.abs(robust - robust.mean()))),
        "root_mean_squared": float(np.sqrt(energy / values.size)),
        "skewness": skewness,
        "total_energy": energy * voxel_volume,
        "uniformity": float(np.sum(p * p)),
        "variance": float(variance),
    }


def firstorder_features(pmap: ParameterMap, mask: np.ndarray, cfg: DiscretizationConfig | None = None) -> FeatureVector:
    """18 intensity statistics; entropy and uniformity use the discretized histogram."""
    cfg = cfg or DiscretizationConfig()
    region = _region(pmap, mask)
    feats = _firstorder(pmap.data[region], float(np.prod(pmap.spacing)), cfg.bin_count)
    return FeatureVector.from_pairs((name, feats[name]) for name in FIRSTORDER_NAMES)


def shape_features(mask: np.ndarray, spacing: tuple[float, float, float]) -> FeatureVector:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ExtractionError("shape features need a non-empty mask")
    spacing_arr = np.asarray(spacing, dtype=np.float64)
    dz, dy, dx = spacing_arr
    volume = float(np.count_nonzero(mask)) * dz * dy * dx

    padded = np.pad(mask, 1).astype(np.int8)
    face_areas = (dy * dx, dz * dx, dz * dy)
    area = sum(np.count_nonzero(np.diff(padded, axis=a)) * face_areas[a] for a in range(3))

    # Only boundary voxels can be convex-hull vertices of the voxel centers
    interior = np.ones_like(mask)
    for axis in range(3):
        interior &= (np.roll(padded, 1, axis=axis) & np.roll(padded, -1, axis=axis))[1:-1, 1:-1, 1:-1].astype(bool)
    surface = np.argwhere(mask & ~interior) * spacing_arr
    diameter = float(pdist(surface).max()) if len(surface) > 1 else 0.0

    coords = np.argwhere(mask)
    extent = (coords.max(axis=0) - coords.min(axis=0) + 1) * spacing_arr
    feats = {
        "elongation": float(extent.min() / extent.max()),
        "maximum_3d_diameter": diameter,
        "sphericity": float((36.0 * np.pi * volume**2) ** (1.0 / 3.0) / area),
        "surface_area": float(area),
        "voxel_volume": volume,
    }
    return FeatureVector.from_pairs((name, feats[name]) for name in SHAPE_NAMES)


def _shifted_pairs(mask: np.ndarray, offset: tuple[int, int, int]) -> tuple[tuple[slice, ...], tuple[slice, ...]]:
    src, dst = [], []
    for o, n in zip(offset, mask.shape):
        src.append(slice(max(0, -o), n - max(0, o)))
        dst.append(slice(max(0, o), n - max(0, -o)))
    return tuple(src), tuple(dst)


def glcm_matrices(levels: np.ndarray, mask: np.ndarray, bin_count: int) -> list[np.ndarray]:
    """Symmetric normalized co-occurrence matrix per offset with at least one pair."""
    mask = np.asarray(mask, dtype=bool) & (levels > 0)
    out: list[np.ndarray] = []
    for offset in GLCM_OFFSETS:
        src, dst = _shifted_pairs(mask, offset)
        both = mask[src] & mask[dst]
        if not both.any():
            continue
        a = levels[src][both] - 1
        b = levels[dst][both] - 1
        counts = np.bincount(a * bin_count + b, minlength=bin_count * bin_count).reshape(bin_count, bin_count)
        sym = (counts + counts.T).astype(np.float64)
        out.append(sym / sym.sum())
    return out


def _glcm_stats(P: np.ndarray) -> dict[str, float]:
    ng = P.shape[0]
    i, j = np.meshgrid(np.arange(1, ng + 1, dtype=np.float64), np.arange(1, ng + 1, dtype=np.float64), indexing="ij")
    diff = i - j
    px = P.sum(axis=1)
    levels = np.arange(1, ng + 1, dtype=np.float64)
    mu = float(np.sum(levels * px))
    sigma = float(np.sqrt(np.sum((levels - mu) ** 2 * px)))
    nz = P[P > 0]
    correlation = 0.0 if sigma == 0 else float((np.sum(i * j * P) - mu * mu) / (sigma * sigma))
    return {
        "cluster_tendency": float(np.sum((i + j - 2.0 * mu) ** 2 * P)),
        "contrast": float(np.sum(diff**2 * P)),
        "correlation": correlation,
        "dissimilarity": float(np.sum(np.abs(diff) * P)),
        "energy": float(np.sum(P * P)),
        "homogeneity": float(np.sum(P / (1.0 + diff**2))),
        "inverse_difference": float(np.sum(P / (1.0 + np.abs(diff) / ng))),
        "inverse_difference_moment": float(np.sum(P / (1.0 + diff**2 / ng**2))),
        "joint_entropy": float(-np.sum(nz * np.log2(nz))) + 0.0,
        "joint_maximum": float(P.max()),
    }


def glcm_features(levels: np.ndarray, mask: np.ndarray, bin_count: int | None = None) -> FeatureVector:
    """Texture features averaged over the 13 offsets at distance 1.

    A region without any adjacent pair (a single voxel) gets the values of a
    constant region.
    """
    levels = np.asarray(levels)
    ng = int(bin_count if bin_count is not None else max(int(levels.max()), 1))
    matrices = glcm_matrices(levels, mask, ng)
    if not matrices:
        feats = dict(_CONSTANT_GLCM)
    else:
        per_offset = [_glcm_stats(P) for P in matrices]
        feats = {name: float(np.mean([s[name] for s in per_offset])) for name in GLCM_NAMES}
    return FeatureVector.from_pairs((name, feats[name]) for name in GLCM_NAMES)


def extract_all(pmap: ParameterMap, mask: np.ndarray, cfg: DiscretizationConfig | None = None) -> FeatureVector:
    """All 33 features for ``pmap`` inside ``mask ∧ valid``, names prefixed by class."""
    cfg = cfg or DiscretizationConfig()
    region = _region(pmap, mask)
    levels = discretize(pmap, region, cfg)
    vectors = (
        firstorder_features(pmap, region, cfg).prefixed("firstorder"),
        shape_features(region, pmap.spacing).prefixed("shape"),
        glcm_features(levels, region, cfg.bin_count).prefixed("glcm"),
    )
    logger.debug("extracted %s over %d voxels", pmap.name, int(region.sum()))
    return FeatureVector.concat(*vectors)
