"""Second-order gradient-boosted trees for binary classification.

Logistic loss with per-instance weights (``scale_pos_weight`` for positives),
exact greedy split search over all midpoints of consecutive distinct values,
L2-regularized leaf weights and seeded per-round row subsampling.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from src.models.features import FeatureMatrix
from src.models.train_config import TrainConfig
from src.utils.errors import NumericFailure, PipelineDataError

logger = logging.getLogger(__name__)

FORMAT_TAG = "pd-dwi-gbt/1"
LEAF = -1


class TrainingError(PipelineDataError):
    """Raised when training or prediction preconditions fail."""


def compute_scale_pos_weight(labels: np.ndarray) -> float:
    """negatives / positives."""
    labels = np.asarray(labels)
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = int(np.count_nonzero(labels == 0))
    if n_pos == 0:
        raise TrainingError(f"no positive labels ({n_neg} negative / 0 positive)")
    if n_neg == 0:
        raise TrainingError(f"no negative labels (0 negative / {n_pos} positive)")
    return n_neg / n_pos


def instance_weights(labels: np.ndarray, scale_pos_weight: float) -> np.ndarray:
    return np.where(np.asarray(labels) == 1, float(scale_pos_weight), 1.0)


def gradients(labels: np.ndarray, prob: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of the weighted logloss w.r.t. the margin."""
    return weights * (prob - labels), weights * prob * (1.0 - prob)


def weighted_logloss(labels: np.ndarray, margin: np.ndarray, weights: np.ndarray) -> float:
    """Mean of ``w * logloss`` computed from the margin without overflow."""
    y = np.asarray(labels, dtype=np.float64)
    # log(1 + e^m) - y*m
    loss = np.logaddexp(0.0, margin) - y * margin
    return float(np.sum(weights * loss) / np.sum(weights))


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf. Node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature", np.asarray(self.feature, dtype=np.int64))
        object.__setattr__(self, "threshold", np.asarray(self.threshold, dtype=np.float64))
        object.__setattr__(self, "left", np.asarray(self.left, dtype=np.int64))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=np.int64))
        object.__setattr__(self, "value", np.asarray(self.value, dtype=np.float64))
        n = self.feature.shape[0]
        if n == 0 or any(a.shape != (n,) for a in (self.threshold, self.left, self.right, self.value)):
            raise ValueError("tree node arrays must be non-empty and equally long")

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.feature[node] == LEAF:
                return 0
            return 1 + max(walk(int(self.left[node])), walk(int(self.right[node])))

        return walk(0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = np.nonzero(feat != LEAF)[0]
            if active.size == 0:
                return self.value[node]
            at = node[active]
            go_left = X[active, feat[active]] < self.threshold[at]
            node[active] = np.where(go_left, self.left[at], self.right[at])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Tree":
        return cls(payload["feature"], payload["threshold"], payload["left"], payload["right"], payload["value"])


@dataclass(frozen=True, eq=False)
class GBTEnsemble:
    trees: tuple[Tree, ...]
    base_score: float
    feature_names: tuple[str, ...]
    config: TrainConfig
    scale_pos_weight: float

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if not math.isfinite(self.base_score):
            raise ValueError("base_score must be finite")
        for k, tree in enumerate(self.trees):
            if np.any(tree.feature >= len(self.feature_names)):
                raise ValueError(f"tree {k} splits on a feature outside the schema")
            if not np.all(np.isfinite(tree.value)):
                raise ValueError(f"tree {k} has non-finite leaf weights")
            if tree.depth() > self.config.max_depth:
                raise ValueError(f"tree {k} is deeper than max_depth={self.config.max_depth}")

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        margin = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            margin += tree.predict(X)
        return margin

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "feature_names": list(self.feature_names),
            "config": self.config.to_dict(),
            "scale_pos_weight": self.scale_pos_weight,
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GBTEnsemble":
        if payload.get("format") != FORMAT_TAG:
            raise TrainingError(f"unsupported model format {payload.get('format')!r}, expected {FORMAT_TAG}")
        try:
            return cls(
                trees=tuple(Tree.from_dict(t) for t in payload["trees"]),
                base_score=float(payload["base_score"]),
                feature_names=tuple(payload["feature_names"]),
                config=TrainConfig(**payload["config"]),
                scale_pos_weight=float(payload["scale_pos_weight"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TrainingError(f"malformed model: {exc}") from exc


@dataclass
class _SplitResult:
    gain: float
    feature: int
    threshold: float


def _best_split(x: np.ndarray, g: np.ndarray, h: np.ndarray, cfg: TrainConfig) -> _SplitResult | None:
    """Highest positive gain; ties go to the lowest feature, then the lowest threshold."""
    n = x.shape[0]
    if n < 2:
        return None
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    cg = np.cumsum(g[order], axis=0)[:-1]
    ch = np.cumsum(h[order], axis=0)[:-1]
    G, H = g.sum(), h.sum()
    lam = cfg.l2_lambda
    gr, hr = G - cg, H - ch
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (cg**2 / (ch + lam) + gr**2 / (hr + lam) - G**2 / (H + lam))
    ok = (xs[:-1] < xs[1:]) & (ch >= cfg.min_child_weight) & (hr >= cfg.min_child_weight) & np.isfinite(gain)
    gain = np.where(ok, gain, -np.inf)
    # argmax over the transposed array scans feature-major, giving the tie order
    flat = int(np.argmax(gain.T))
    j, k = divmod(flat, n - 1)
    best = gain[k, j]
    if not best > 0:
        return None
    lo, hi = xs[k, j], xs[k + 1, j]
    threshold = lo + (hi - lo) / 2.0
    if not lo < threshold <= hi:
        threshold = hi
    return _SplitResult(float(best), int(j), float(threshold))


def _grow_tree(x: np.ndarray, g: np.ndarray, h: np.ndarray, cfg: TrainConfig) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def build(rows: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        G, H = float(g[rows].sum()), float(h[rows].sum())
        denom = H + cfg.l2_lambda
        weight = -cfg.learning_rate * G / denom if denom > 0 else 0.0
        if not math.isfinite(weight):
            raise NumericFailure(f"non-finite leaf weight (G={G}, H={H})")
        value.append(weight)
        if depth >= cfg.max_depth:
            return node
        split = _best_split(x[rows], g[rows], h[rows], cfg)
        if split is None:
            return node
        goes_left = x[rows, split.feature] < split.threshold
        feature[node] = split.feature
        threshold[node] = split.threshold
        value[node] = 0.0
        left[node] = build(rows[goes_left], depth + 1)
        right[node] = build(rows[~goes_left], depth + 1)
        return node

    build(np.arange(x.shape[0]), 0)
    return Tree(feature, threshold, left, right, value)


def canonical_order(values: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Row permutation sorting lexicographically by features, then label."""
    keys = (labels,) + tuple(values[:, j] for j in reversed(range(values.shape[1])))
    return np.lexsort(keys)


def train(X: FeatureMatrix, cfg: TrainConfig) -> GBTEnsemble:
    """Boost ``cfg.n_rounds`` trees on ``X``; the result does not depend on row order."""
    if X.labels is None:
        raise TrainingError("training needs labels")
    if X.n_rows < 2:
        raise TrainingError(f"training needs >= 2 samples, got {X.n_rows}")
    if X.n_columns < 1:
        raise TrainingError("training needs at least one feature")
    ratio = compute_scale_pos_weight(X.labels)
    spw = cfg.scale_pos_weight if cfg.scale_pos_weight is not None else ratio

    order = canonical_order(X.values, X.labels)
    x = X.values[order]
    y = X.labels[order].astype(np.float64)
    w = instance_weights(y, spw)
    prevalence = float(y.mean())
    base = math.log(prevalence / (1.0 - prevalence))

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    n = x.shape[0]
    n_sub = max(1, int(round(cfg.subsample * n)))
    margin = np.full(n, base)
    trees: list[Tree] = []
    for _ in range(cfg.n_rounds):
        g, h = gradients(y, expit(margin), w)
        if n_sub < n:
            rows = np.sort(rng.choice(n, size=n_sub, replace=False))
            tree = _grow_tree(x[rows], g[rows], h[rows], cfg)
        else:
            tree = _grow_tree(x, g, h, cfg)
        margin += tree.predict(x)
        trees.append(tree)
    if not np.all(np.isfinite(margin)):
        raise NumericFailure("training margins became non-finite")
    logger.debug(
        "trained %d trees on %d x %d (spw=%.4f, loss=%.5f)",
        len(trees),
        n,
        X.n_columns,
        spw,
        weighted_logloss(y, margin, w),
    )
    return GBTEnsemble(tuple(trees), base, X.columns, cfg, float(spw))


def aligned_values(model: GBTEnsemble, X: FeatureMatrix) -> np.ndarray:
    """``X`` values in the model's column order; extra columns are ignored."""
    missing = [c for c in model.feature_names if c not in X.columns]
    if missing:
        shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
        raise TrainingError(f"feature matrix lacks {len(missing)} model columns: {shown}")
    return X.select(model.feature_names).values


def predict_proba(model: GBTEnsemble, X: FeatureMatrix) -> np.ndarray:
    return expit(model.decision_function(aligned_values(model, X)))
