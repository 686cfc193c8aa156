"""Unit tests for re-loading pipeline artifacts."""

import math

import numpy as np
import pytest

from src.analyzers import clinical_encoder, gbt
from src.models.clinical import ClinicalRecord
from src.models.features import FeatureMatrix, SelectionReport
from src.models.train_config import TrainConfig
from src.parsers.artifact_parser import (
    ArtifactParserError,
    load_encoder,
    load_json,
    load_model,
    load_selection,
    selection_path,
)
from src.reporters.file_reporter import write_json


def _matrix(n=40, d=3, seed=0) -> FeatureMatrix:
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < 0.4).astype(int)
    values = rng.normal(size=(n, d)) + labels[:, None]
    return FeatureMatrix(tuple(f"x{j}" for j in range(d)), tuple(f"P{i}" for i in range(n)), values, labels)


def test_selection_path_sits_next_to_model(tmp_path):
    assert selection_path(tmp_path / "model.json") == tmp_path / "model.selection.json"


class TestSelection:
    def test_reloads_equal(self, tmp_path):
        report = SelectionReport({"a": 4.5, "b": math.inf, "c": 0.25}, ("b", "a"))
        path = selection_path(tmp_path / "model.json")
        write_json(path, report.to_dict())

        loaded = load_selection(path)
        assert loaded.chosen == ("b", "a")
        assert loaded.k == 2
        assert loaded.scores == report.scores
        assert math.isinf(loaded.scores["b"])

    def test_reloaded_selection_restricts_matrix(self, tmp_path):
        matrix = _matrix()
        path = tmp_path / "run.selection.json"
        write_json(path, SelectionReport({"x0": 1.0, "x1": 3.0, "x2": 2.0}, ("x1", "x2")).to_dict())
        restricted = load_selection(path).apply(matrix)
        assert restricted.columns == ("x1", "x2")
        np.testing.assert_array_equal(restricted.values, matrix.values[:, [1, 2]])

    def test_chosen_without_score(self, tmp_path):
        path = tmp_path / "bad.selection.json"
        write_json(path, {"k": 1, "chosen": ["z"], "scores": {"a": 1.0}})
        with pytest.raises(ArtifactParserError, match="malformed selection report"):
            load_selection(path)

    def test_missing_scores_key(self, tmp_path):
        path = tmp_path / "bad.selection.json"
        write_json(path, {"chosen": []})
        with pytest.raises(ArtifactParserError, match="malformed selection report"):
            load_selection(path)


class TestModel:
    def test_reloaded_model_predicts_identically(self, tmp_path):
        matrix = _matrix()
        model = gbt.train(matrix, TrainConfig(n_rounds=10, max_depth=2))
        path = tmp_path / "model.json"
        write_json(path, model.to_dict())

        loaded = load_model(path)
        assert loaded.feature_names == model.feature_names
        assert loaded.to_dict() == model.to_dict()
        np.testing.assert_array_equal(gbt.predict_proba(loaded, matrix), gbt.predict_proba(model, matrix))


class TestEncoder:
    def test_reloaded_encoder_transforms_identically(self, tmp_path):
        records = [
            ClinicalRecord("P1", 40.0, "white", "single mass", "HR+/HER2-", "High", 2.5),
            ClinicalRecord("P2", 52.0, "asian", "multiple masses", "HR-/HER2+", None, None),
            ClinicalRecord("P3", 61.0, "white", "single mass", "HR-/HER2-", "Low", 4.0),
        ]
        encoder = clinical_encoder.fit(records)
        path = tmp_path / "encoder.json"
        write_json(path, encoder.to_dict())

        loaded = load_encoder(path)
        assert loaded.feature_names == encoder.feature_names
        for record in records:
            assert loaded.transform(record) == encoder.transform(record)


class TestLoadJson:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="Model not found"):
            load_json(tmp_path / "absent.json", "Model")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ArtifactParserError, match="broken.json"):
            load_json(path)
