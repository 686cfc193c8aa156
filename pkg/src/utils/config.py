"""Configuration helpers: environment settings and run-config loading."""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import fields
from pathlib import Path
from typing import Any

from src.analyzers.decomposition import IVIMParams
from src.analyzers.phantom import CohortSpec, NoiseKind, NoiseModel, ShiftRule
from src.models.dwi_study import BValueSet, TimePoint
from src.models.run_config import AblationConfig, RunConfig
from src.models.train_config import DEFAULT_GRID, TrainConfig
from src.utils.errors import ConfigError


def get_n_jobs() -> int:
    """Worker count from ``PDDWI_N_JOBS``.

    Returns:
        Number of parallel workers (default: 1)
    """
    try:
        n_jobs = int(os.getenv("PDDWI_N_JOBS", "1"))
        return max(1, min(n_jobs, 64))  # Clamp between 1 and 64 workers
    except ValueError:
        return 1


def get_log_level() -> str:
    """Return the log level name from ``PDDWI_LOG_LEVEL`` (default WARNING)."""
    level = os.getenv("PDDWI_LOG_LEVEL", "WARNING").strip().upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        return "WARNING"
    return level


def _read_json_object(path: str | Path, what: str) -> dict[str, Any]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {what}: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} is not valid JSON: {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{what} must be a JSON object")
    return raw


def load_run_config(path: str | Path | None) -> RunConfig:
    """Load a RunConfig from JSON. ``None`` yields the defaults.

    Unknown keys are rejected so typos do not silently fall back to defaults.
    """
    if path is None:
        return RunConfig(n_jobs=get_n_jobs())
    return run_config_from_dict(_read_json_object(path, "run config"))


def run_config_from_dict(raw: dict[str, Any]) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown run config keys: {', '.join(unknown)}")

    data = dict(raw)
    if "train" in data:
        data["train"] = train_config_from_dict(data["train"])
    data["grid"] = _grid_from_raw(data.get("grid"))
    data.setdefault("n_jobs", get_n_jobs())
    try:
        if "configurations" in data:
            data["configurations"] = tuple(
                AblationConfig(name=str(c["name"]), maps=tuple(c["maps"])) for c in data["configurations"]
            )
        for key in ("maps", "timepoints"):
            if key in data:
                data[key] = tuple(data[key])
        return RunConfig(**data)
    except KeyError as exc:
        raise ConfigError(f"invalid run config: missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid run config: {exc}") from exc


def _grid_from_raw(raw: Any) -> dict[str, list] | None:
    """``"default"`` selects DEFAULT_GRID; otherwise a field -> values mapping or null."""
    if raw is None:
        return None
    if raw == "default":
        return {k: list(v) for k, v in DEFAULT_GRID.items()}
    if not isinstance(raw, dict):
        raise ConfigError(f"grid must be a mapping, null or \"default\", got {raw!r}")
    try:
        return {str(k): list(v) for k, v in raw.items()}
    except TypeError as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


def train_config_from_dict(raw: dict[str, Any]) -> TrainConfig:
    known = {f.name for f in fields(TrainConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown train config keys: {', '.join(unknown)}")
    try:
        return TrainConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid train config: {exc}") from exc


def expand_grid(base: TrainConfig, grid: dict[str, list[Any]] | None) -> list[TrainConfig]:
    """Cartesian product of ``grid`` over ``base``, keys in sorted order.

    The returned order is the tie-break order used by cross-validation.
    """
    if not grid:
        return [base]
    keys = sorted(grid)
    known = {f.name for f in fields(TrainConfig)}
    bad = [k for k in keys if k not in known]
    if bad:
        raise ConfigError(f"grid keys are not TrainConfig fields: {', '.join(bad)}")
    configs: list[TrainConfig] = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        try:
            configs.append(base.replace(**dict(zip(keys, combo))))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid grid value: {exc}") from exc
    return configs


def load_cohort_spec(path: str | Path) -> CohortSpec:
    """Phantom cohort description for ``phantom --spec``; ``{}`` gives the default cohort."""
    return cohort_spec_from_dict(_read_json_object(path, "cohort spec"))


def _pair(value: Any) -> tuple[float, float]:
    lo, hi = value
    return float(lo), float(hi)


def cohort_spec_from_dict(raw: dict[str, Any]) -> CohortSpec:
    known = {f.name for f in fields(CohortSpec)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown cohort spec keys: {', '.join(unknown)}")

    data = dict(raw)
    try:
        if "shape" in data:
            data["shape"] = tuple(int(v) for v in data["shape"])
        if "spacing" in data:
            data["spacing"] = tuple(float(v) for v in data["spacing"])
        if "bvalues" in data:
            data["bvalues"] = BValueSet(tuple(data["bvalues"]))
        if "background" in data:
            data["background"] = IVIMParams(**data["background"])
        for key in ("tumor_d", "tumor_d_star", "tumor_f"):
            if key in data:
                data[key] = _pair(data[key])
        for key in ("responder_shift", "non_responder_shift"):
            if key in data:
                data[key] = ShiftRule(**data[key])
        if "noise" in data:
            noise = data["noise"] or {}
            data["noise"] = NoiseModel(NoiseKind(noise.get("kind", "none")), noise.get("snr"))
        if "timepoints" in data:
            data["timepoints"] = tuple(TimePoint.parse(t) for t in data["timepoints"])
        return CohortSpec(**data)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid cohort spec: {exc}") from exc
