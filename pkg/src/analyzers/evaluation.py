"""Classification metrics, paired model comparison and the ablation table."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import cohen_kappa_score, f1_score, roc_auc_score

from src.models.evaluation_report import AblationReport, AblationRow, MetricsReport
from src.utils.errors import PipelineDataError

logger = logging.getLogger(__name__)


class EvaluationError(PipelineDataError):
    """Raised for misaligned inputs or single-class labels."""


def _check(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise EvaluationError(f"{scores.size} scores for {labels.size} labels")
    if not np.all(np.isin(labels, (0, 1))):
        raise EvaluationError("labels must be binary 0/1")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise EvaluationError(f"metrics need both classes, got {labels.size - n_pos} negative / {n_pos} positive")
    if not np.all(np.isfinite(scores)):
        raise EvaluationError("scores must be finite")
    return scores, labels.astype(np.int64)


def auc(scores, labels) -> float:
    """Area under the ROC curve (Mann-Whitney U; tied pairs count one half)."""
    scores, labels = _check(scores, labels)
    return float(roc_auc_score(labels, scores))


def predict_labels(scores, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int64)


def f1(scores, labels, threshold: float = 0.5) -> float:
    scores, labels = _check(scores, labels)
    return float(f1_score(labels, predict_labels(scores, threshold), zero_division=0))


def cohen_kappa(scores, labels, threshold: float = 0.5) -> float:
    """(p_o - p_e) / (1 - p_e), defined as 0 when p_e = 1."""
    scores, labels = _check(scores, labels)
    kappa = float(cohen_kappa_score(labels, predict_labels(scores, threshold)))
    return 0.0 if math.isnan(kappa) else kappa


def metrics_report(scores, labels, threshold: float = 0.5) -> MetricsReport:
    scores, labels = _check(scores, labels)
    return MetricsReport(
        auc=auc(scores, labels),
        f1=f1(scores, labels, threshold),
        kappa=cohen_kappa(scores, labels, threshold),
        n=int(labels.size),
        threshold=threshold,
    )


def _rank_auc(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """AUC of every row of ``scores`` (replicates x samples) via average ranks."""
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    ranks = rankdata(scores, axis=-1)
    return (ranks[..., pos].sum(axis=-1) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def paired_permutation_test(scores_a, scores_b, labels, n_perm: int = 1000, seed: int = 0) -> float:
    """Two-sided p-value for ΔAUC = AUC(a) - AUC(b).

    Each replicate swaps the two models' scores on a random subset of samples;
    p = (1 + #{|Δ*| >= |Δ|}) / (1 + n_perm).
    """
    if n_perm < 100:
        raise EvaluationError("n_perm must be >= 100")
    a, labels = _check(scores_a, labels)
    b, _ = _check(scores_b, labels)
    delta = float(_rank_auc(a, labels) - _rank_auc(b, labels))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    swap = rng.random((n_perm, a.size)) < 0.5
    perm_a = np.where(swap, b, a)
    perm_b = np.where(swap, a, b)
    deltas = _rank_auc(perm_a, labels) - _rank_auc(perm_b, labels)
    # Tolerance absorbs rank-sum rounding so identical models give p = 1
    extreme = int(np.count_nonzero(np.abs(deltas) >= abs(delta) - 1e-12))
    return (1 + extreme) / (1 + n_perm)


@dataclass(frozen=True, eq=False)
class ConfigurationPredictions:
    """Scores of one configuration on one timepoint prefix, aligned with ``labels``."""

    config: str
    timepoints: tuple[str, ...]
    patient_ids: tuple[str, ...]
    scores: np.ndarray
    labels: np.ndarray


def ablation_report(
    results: Sequence[ConfigurationPredictions],
    *,
    evaluation: str = "cv",
    reference: str = "PD-DWI",
    seed: int = 0,
    threshold: float = 0.5,
    n_permutations: int = 1000,
    excluded_patients: Sequence[str] = (),
) -> AblationReport:
    """One row per (configuration, timepoint prefix) in input order.

    Rows other than the reference carry the permutation p-value of their ΔAUC
    against the reference configuration at the same timepoints.
    """
    refs = {r.timepoints: r for r in results if r.config == reference}
    if not refs:
        logger.warning("reference configuration %s not evaluated; p-values omitted", reference)
    rows: list[AblationRow] = []
    for r in results:
        metrics = metrics_report(r.scores, r.labels, threshold)
        p_value = None
        ref = refs.get(r.timepoints)
        if ref is not None and r.config != reference:
            if ref.patient_ids != r.patient_ids:
                raise EvaluationError(f"{r.config} and {reference} were scored on different patients")
            p_value = paired_permutation_test(r.scores, ref.scores, r.labels, n_permutations, seed)
        rows.append(AblationRow(r.config, tuple(r.timepoints), metrics, p_value))
    return AblationReport(evaluation, reference, seed, rows, list(excluded_patients))
