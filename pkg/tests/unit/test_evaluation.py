"""Unit tests for metrics, the paired permutation test and the ablation table."""

import numpy as np
import pytest

from src.analyzers.evaluation import (
    ConfigurationPredictions,
    EvaluationError,
    ablation_report,
    auc,
    cohen_kappa,
    f1,
    metrics_report,
    paired_permutation_test,
)
from src.models.evaluation_report import AblationReport, MetricsReport
from src.models.run_config import DEFAULT_CONFIGURATIONS
from tests.unit import reference_impls as ref


def _confusion(tp, tn, fp, fn):
    """Scores/labels pairs with the given counts at threshold 0.5."""
    labels = [1] * tp + [0] * tn + [0] * fp + [1] * fn
    scores = [0.9] * tp + [0.1] * tn + [0.9] * fp + [0.1] * fn
    return np.array(scores), np.array(labels)


class TestAuc:
    def test_perfect_ranking(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_three_of_four_pairs(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_all_ties(self):
        assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_matches_pair_counting(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(2, 30))
            labels = np.concatenate([[0, 1], rng.integers(0, 2, n)])
            # Coarse rounding forces tied scores
            scores = np.round(rng.random(labels.size), int(rng.integers(1, 4)))
            expected = ref.pairwise_auc(scores.tolist(), labels.tolist())
            assert auc(scores, labels) == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_complement_and_monotone_transform(self):
        rng = np.random.default_rng(1)
        labels = np.array([0, 1] * 20)
        scores = rng.random(40)
        assert auc(scores, labels) + auc(-scores, labels) == pytest.approx(1.0)
        assert auc(np.exp(3 * scores), labels) == pytest.approx(auc(scores, labels))

    def test_order_invariant(self):
        scores, labels = np.array([0.2, 0.7, 0.4, 0.9, 0.5]), np.array([0, 1, 0, 1, 1])
        perm = [4, 2, 0, 3, 1]
        assert auc(scores[perm], labels[perm]) == auc(scores, labels)

    def test_single_class(self):
        with pytest.raises(EvaluationError, match="both classes"):
            auc([0.1, 0.2], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError, match="3 scores for 2 labels"):
            auc([0.1, 0.2, 0.3], [0, 1])


class TestThresholdMetrics:
    def test_perfect(self):
        scores, labels = _confusion(5, 5, 0, 0)
        assert f1(scores, labels) == 1.0
        assert cohen_kappa(scores, labels) == 1.0

    def test_f1_formula(self):
        scores, labels = _confusion(2, 3, 1, 1)
        assert f1(scores, labels) == pytest.approx(4 / 6)

    def test_no_positive_predictions(self):
        scores, labels = _confusion(0, 5, 0, 3)
        assert f1(scores, labels) == 0.0

    def test_kappa_formula(self):
        scores, labels = _confusion(20, 50, 10, 20)
        assert cohen_kappa(scores, labels) == pytest.approx(0.16 / 0.46, abs=1e-4)
        assert cohen_kappa(scores, labels) == pytest.approx(0.3478, abs=1e-4)

    def test_random_contingency_tables(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            tp, tn, fp, fn = (int(v) for v in rng.integers(0, 15, 4))
            tp, tn = tp + 1, tn + 1
            n = tp + tn + fp + fn
            scores, labels = _confusion(tp, tn, fp, fn)
            p_o = (tp + tn) / n
            p_e = ((tp + fn) * (tp + fp) + (tn + fp) * (tn + fn)) / n**2
            assert f1(scores, labels) == pytest.approx(2 * tp / (2 * tp + fp + fn), rel=1e-12)
            assert cohen_kappa(scores, labels) == pytest.approx((p_o - p_e) / (1 - p_e), rel=1e-9, abs=1e-12)

    def test_kappa_zero_for_independent_predictions(self):
        scores, labels = _confusion(10, 10, 10, 10)
        assert cohen_kappa(scores, labels) == pytest.approx(0.0, abs=1e-12)

    def test_kappa_bounded_by_accuracy(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            labels = np.array([0, 1] + list(rng.integers(0, 2, 30)))
            scores = rng.random(32)
            accuracy = np.mean((scores >= 0.5) == labels)
            assert cohen_kappa(scores, labels) <= accuracy + 1e-12

    def test_custom_threshold(self):
        scores, labels = np.array([0.3, 0.35, 0.2, 0.1]), np.array([1, 1, 0, 0])
        assert f1(scores, labels, threshold=0.5) == 0.0
        assert f1(scores, labels, threshold=0.25) == 1.0

    def test_metrics_report(self):
        scores, labels = _confusion(2, 3, 1, 1)
        report = metrics_report(scores, labels)
        assert isinstance(report, MetricsReport)
        assert report.n == 7
        assert report.threshold == 0.5
        assert MetricsReport.from_dict(report.to_dict()) == report


class TestPermutationTest:
    def test_identical_models(self):
        rng = np.random.default_rng(3)
        scores, labels = rng.random(60), np.array([0, 1] * 30)
        assert paired_permutation_test(scores, scores.copy(), labels, n_perm=200, seed=1) == 1.0

    def test_strongly_separated_models(self):
        rng = np.random.default_rng(4)
        labels = np.array([0, 1] * 100)
        good = labels + rng.normal(0, 0.3, 200)
        noise = rng.random(200)
        assert paired_permutation_test(good, noise, labels, n_perm=500, seed=2) < 0.05

    def test_seeded(self):
        rng = np.random.default_rng(5)
        labels = np.array([0, 1] * 25)
        a, b = labels + rng.normal(0, 1, 50), rng.random(50)
        assert paired_permutation_test(a, b, labels, 300, 7) == paired_permutation_test(a, b, labels, 300, 7)

    def test_misaligned(self):
        with pytest.raises(EvaluationError):
            paired_permutation_test([0.1, 0.9], [0.1, 0.9, 0.5], [0, 1], n_perm=100)

    def test_minimum_permutations(self):
        with pytest.raises(EvaluationError, match="n_perm"):
            paired_permutation_test([0.1, 0.9], [0.2, 0.8], [0, 1], n_perm=10)


def _predictions(config: str, timepoints: tuple[str, ...], scores: np.ndarray, labels: np.ndarray):
    ids = tuple(f"P{i}" for i in range(labels.size))
    return ConfigurationPredictions(config, timepoints, ids, scores, labels)


class TestAblationReport:
    PREFIXES = (("T0",), ("T0", "T1"), ("T0", "T1", "T2"))

    def test_six_configurations_three_prefixes(self):
        rng = np.random.default_rng(6)
        labels = np.array([0, 1] * 15)
        results = [
            _predictions(c.name, tps, rng.random(30), labels) for c in DEFAULT_CONFIGURATIONS for tps in self.PREFIXES
        ]
        report = ablation_report(results, n_permutations=100)
        assert len(report.rows) == 18
        assert [r.config for r in report.rows[:3]] == ["Baseline"] * 3
        assert report.row("PD-DWI", ("T0",)).p_value_vs_reference is None
        assert all(r.p_value_vs_reference is not None for r in report.rows if r.config != "PD-DWI")

    def test_duplicated_configuration_gives_identical_rows(self):
        rng = np.random.default_rng(7)
        labels = np.array([0, 1] * 10)
        scores = rng.random(20)
        report = ablation_report(
            [_predictions("PD-DWI", ("T0",), scores, labels), _predictions("PD-DWI copy", ("T0",), scores, labels)],
            n_permutations=100,
        )
        assert report.rows[0].metrics == report.rows[1].metrics
        assert report.rows[1].p_value_vs_reference == 1.0

    def test_missing_reference_omits_p_values(self):
        labels = np.array([0, 1, 0, 1])
        report = ablation_report([_predictions("F-only", ("T0",), np.array([0.1, 0.8, 0.3, 0.6]), labels)])
        assert report.rows[0].p_value_vs_reference is None

    def test_misaligned_patients(self):
        labels = np.array([0, 1, 0, 1])
        ref_row = _predictions("PD-DWI", ("T0",), np.array([0.1, 0.8, 0.3, 0.6]), labels)
        other = ConfigurationPredictions("F-only", ("T0",), ("A", "B", "C", "D"), np.array([0.2, 0.7, 0.4, 0.5]), labels)
        with pytest.raises(EvaluationError, match="different patients"):
            ablation_report([ref_row, other])

    def test_serialized_forms(self):
        labels = np.array([0, 1, 0, 1])
        report = ablation_report(
            [_predictions("PD-DWI", ("T0", "T1"), np.array([0.1, 0.8, 0.3, 0.6]), labels)],
            excluded_patients=["P9"],
        )
        assert isinstance(report, AblationReport)
        assert report.rows[0].csv_record() == {
            "config": "PD-DWI",
            "timepoints": "T0+T1",
            "auc": 1.0,
            "f1": 1.0,
            "kappa": 1.0,
            "n": 4,
        }
        payload = report.to_dict()
        assert payload["excluded_patients"] == ["P9"]
        assert "| PD-DWI | T0+T1 | 1.0000 |" in report.to_markdown()
