"""Stratified K-fold hyper-parameter tuning with selection refit inside each fold."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold

from src.analyzers import gbt
from src.analyzers.evaluation import auc
from src.analyzers.feature_pipeline import anova_f_scores, select_top_k
from src.models.features import FeatureMatrix
from src.models.train_config import TrainConfig
from src.utils.errors import PipelineDataError

logger = logging.getLogger(__name__)


class TuningError(PipelineDataError):
    """Raised when the cohort cannot be split into usable folds."""


@dataclass(frozen=True)
class CVResult:
    best: TrainConfig
    configs: tuple[TrainConfig, ...]
    mean_auc: tuple[float, ...]
    fold_auc: tuple[tuple[float, ...], ...] = field(default=())

    @property
    def best_index(self) -> int:
        return self.configs.index(self.best)

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "results": [
                {"config": c.to_dict(), "mean_auc": m, "fold_auc": list(f)}
                for c, m, f in zip(self.configs, self.mean_auc, self.fold_auc)
            ],
        }


def stratified_folds(labels: np.ndarray, k_folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if k_folds < 2:
        raise TuningError("k_folds must be >= 2")
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=2)
    if counts.min() < k_folds:
        raise TuningError(
            f"{k_folds}-fold CV needs >= {k_folds} samples per class, got {counts[0]} negative / {counts[1]} positive"
        )
    splitter = StratifiedKFold(n_splits=k_folds, shuffle=True, random_state=seed)
    return [(train, test) for train, test in splitter.split(np.zeros((labels.size, 1)), labels)]


def _fit_predict(train_X: FeatureMatrix, test_X: FeatureMatrix, cfg: TrainConfig, scores: dict[str, float]) -> np.ndarray:
    selection = select_top_k(scores, cfg.k_features)
    model = gbt.train(selection.apply(train_X), cfg)
    return gbt.predict_proba(model, test_X)


def _fold_scores(X: FeatureMatrix, folds: list[tuple[np.ndarray, np.ndarray]]) -> list[dict[str, float]]:
    return [anova_f_scores(X.take(train)) for train, _ in folds]


def cross_validate(
    X: FeatureMatrix,
    grid: Sequence[TrainConfig],
    k_folds: int = 5,
    seed: int = 0,
    n_jobs: int = 1,
) -> CVResult:
    """Mean validation AUC per config; the best is the highest mean, first in grid order on ties."""
    if not grid:
        raise TuningError("the hyper-parameter grid is empty")
    labels = X.require_labels()
    folds = stratified_folds(labels, k_folds, seed)
    for f, (train, test) in enumerate(folds):
        for part, rows in (("training", train), ("validation", test)):
            if np.unique(labels[rows]).size < 2:
                raise TuningError(f"fold {f + 1} {part} rows hold a single class")
    fold_scores = _fold_scores(X, folds)

    jobs = [(c, f) for c in range(len(grid)) for f in range(len(folds))]
    preds = Parallel(n_jobs=n_jobs)(
        delayed(_fit_predict)(X.take(folds[f][0]), X.take(folds[f][1]), grid[c], fold_scores[f]) for c, f in jobs
    )
    fold_auc = np.zeros((len(grid), len(folds)))
    for (c, f), p in zip(jobs, preds):
        fold_auc[c, f] = auc(p, labels[folds[f][1]])
    mean = fold_auc.mean(axis=1)
    best = int(np.argmax(mean))
    logger.info("CV over %d configs x %d folds: best mean AUC %.4f (config %d)", len(grid), len(folds), mean[best], best)
    return CVResult(
        best=grid[best],
        configs=tuple(grid),
        mean_auc=tuple(float(m) for m in mean),
        fold_auc=tuple(tuple(float(a) for a in row) for row in fold_auc),
    )


def out_of_fold_predictions(
    X: FeatureMatrix,
    cfg: TrainConfig,
    k_folds: int = 5,
    seed: int = 0,
    n_jobs: int = 1,
) -> np.ndarray:
    """Pooled validation probabilities, one per row of ``X``, with selection refit per fold."""
    labels = X.require_labels()
    folds = stratified_folds(labels, k_folds, seed)
    fold_scores = _fold_scores(X, folds)
    preds = Parallel(n_jobs=n_jobs)(
        delayed(_fit_predict)(X.take(train), X.take(test), cfg, fold_scores[f])
        for f, (train, test) in enumerate(folds)
    )
    oof = np.empty(X.n_rows)
    for (_, test), p in zip(folds, preds):
        oof[test] = p
    return oof
