"""Loaders for JSON artifacts written by the pipeline (model, selection, encoder)."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

from src.analyzers.clinical_encoder import ClinicalEncoder
from src.analyzers.gbt import GBTEnsemble
from src.models.features import SelectionReport
from src.utils.errors import PipelineDataError


class ArtifactParserError(PipelineDataError):
    """Exception raised when a JSON artifact cannot be loaded."""


def load_json(path: str | Path, what: str = "JSON file") -> Any:
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactParserError(f"{path}: {exc}") from exc


def load_model(path: str | Path) -> GBTEnsemble:
    return GBTEnsemble.from_dict(load_json(path, "Model"))


def selection_path(model_path: str | Path) -> Path:
    """``model.json`` -> ``model.selection.json``."""
    model_path = Path(model_path)
    return model_path.with_name(f"{model_path.stem}.selection.json")


def load_selection(path: str | Path) -> SelectionReport:
    payload = load_json(path, "Selection report")
    try:
        return SelectionReport.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactParserError(f"{path}: malformed selection report: {exc}") from exc


def load_encoder(path: str | Path) -> ClinicalEncoder:
    return ClinicalEncoder.from_dict(load_json(path, "Clinical encoder"))
