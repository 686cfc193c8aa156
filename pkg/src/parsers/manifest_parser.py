"""Cohort manifest (JSON) reading, writing and study loading.

Example::

    {
      "version": 1,
      "clinical_csv": "clinical.csv",
      "patients": [
        {"patient_id": "P001", "label": 1,
         "timepoints": {"T0": {"bvalues": [0, 100, 600, 800],
                               "dwi": "P001/T0/dwi.nii",
                               "mask": "P001/T0/mask.nii",
                               "extra_maps": {"SER": "P001/T0/SER.nii"}}}}
      ]
    }

``dwi`` may be replaced by ``dwi_per_b`` (``{"0": "b0.nii", "100": ...}``).
Relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from src.models.dwi_study import BValueSet, DWIStudy, ParameterMap, TimePoint
from src.models.manifest import CohortManifest, PatientEntry, TimepointEntry
from src.parsers.artifact_parser import load_json
from src.parsers.clinical_parser import write_clinical_csv
from src.parsers.nifti_parser import read_volume, write_volume
from src.reporters.file_reporter import write_json
from src.utils.errors import PipelineDataError

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class ManifestParserError(PipelineDataError):
    """Exception raised when a manifest is malformed or references missing files."""


class ManifestParser:
    def parse(self, file_path: str | Path) -> CohortManifest:
        """Parse a manifest and check that every referenced file exists.

        Raises:
            FileNotFoundError: If the manifest itself does not exist
            ManifestParserError: Malformed entries or missing referenced files
        """
        path = Path(file_path)
        raw = load_json(path, "Manifest")
        if not isinstance(raw, dict) or not isinstance(raw.get("patients"), list):
            raise ManifestParserError(f"{path}: manifest needs a 'patients' list")
        root = path.resolve().parent
        patients = tuple(self._patient(p, root, i) for i, p in enumerate(raw["patients"]))
        clinical = raw.get("clinical_csv")
        try:
            manifest = CohortManifest(root, patients, self._resolve(root, clinical) if clinical else None)
        except ValueError as exc:
            raise ManifestParserError(f"{path}: {exc}") from exc

        missing = [str(f) for p in manifest.patients for e in p.timepoints.values() for f in e.files() if not f.exists()]
        if manifest.clinical_csv is not None and not manifest.clinical_csv.exists():
            missing.append(str(manifest.clinical_csv))
        if missing:
            shown = ", ".join(missing[:5]) + (f" (+{len(missing) - 5} more)" if len(missing) > 5 else "")
            raise ManifestParserError(f"{path}: {len(missing)} referenced file(s) missing: {shown}")
        return manifest

    @staticmethod
    def _resolve(root: Path, value: Any) -> Path:
        p = Path(str(value))
        return p if p.is_absolute() else root / p

    def _patient(self, raw: Any, root: Path, index: int) -> PatientEntry:
        where = f"patients[{index}]"
        if not isinstance(raw, dict) or "patient_id" not in raw:
            raise ManifestParserError(f"{where}: entry needs a patient_id")
        pid = str(raw["patient_id"])
        label = raw.get("label")
        timepoints: dict[TimePoint, TimepointEntry] = {}
        for tp_name, tp_raw in (raw.get("timepoints") or {}).items():
            try:
                tp = TimePoint.parse(tp_name)
                timepoints[tp] = self._timepoint(tp_raw, root)
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestParserError(f"{where} ({pid}) timepoint {tp_name}: {exc}") from None
        if not timepoints:
            raise ManifestParserError(f"{where} ({pid}): no timepoints")
        try:
            return PatientEntry(pid, timepoints, None if label is None else int(label))
        except ValueError as exc:
            raise ManifestParserError(f"{where}: {exc}") from None

    def _timepoint(self, raw: dict, root: Path) -> TimepointEntry:
        bvalues = tuple(float(b) for b in raw["bvalues"])
        BValueSet(bvalues)
        per_b = {float(b): self._resolve(root, p) for b, p in (raw.get("dwi_per_b") or {}).items()}
        if per_b and sorted(per_b) != sorted(bvalues):
            raise ValueError(f"dwi_per_b keys {sorted(per_b)} do not match bvalues {list(bvalues)}")
        return TimepointEntry(
            bvalues=bvalues,
            mask=self._resolve(root, raw["mask"]),
            dwi=self._resolve(root, raw["dwi"]) if raw.get("dwi") else None,
            dwi_per_b=per_b,
            extra_maps={str(k): self._resolve(root, v) for k, v in (raw.get("extra_maps") or {}).items()},
        )


def read_manifest(path: str | Path) -> CohortManifest:
    return ManifestParser().parse(path)


def load_study(entry: PatientEntry, time_point: TimePoint) -> DWIStudy:
    """Read one study from disk; invariants are left to ``validate_study``."""
    tp_entry = entry.timepoints.get(time_point)
    if tp_entry is None:
        raise ManifestParserError(f"patient {entry.patient_id} has no {time_point.value} study")
    bvalues = BValueSet(tp_entry.bvalues)
    if tp_entry.dwi is not None:
        volume = read_volume(tp_entry.dwi)
        if volume.data.ndim == 3:
            raise ManifestParserError(f"{tp_entry.dwi}: DWI file is 3D; use dwi_per_b for one file per b-value")
        signal, spacing = volume.data, volume.spacing
    else:
        channels = [read_volume(tp_entry.dwi_per_b[b]) for b in bvalues.values]
        shapes = {c.data.shape for c in channels}
        if len(shapes) != 1 or channels[0].data.ndim != 3:
            raise ManifestParserError(
                f"patient {entry.patient_id} {time_point.value}: per-b volumes must be 3D and equally shaped, got {sorted(shapes)}"
            )
        signal = np.stack([c.data for c in channels])
        spacing = channels[0].spacing
    mask = read_volume(tp_entry.mask).data
    if mask.ndim != 3:
        raise ManifestParserError(f"{tp_entry.mask}: mask must be 3D")
    return DWIStudy(entry.patient_id, time_point, bvalues, signal, mask > 0, spacing)


def load_extra_map(entry: PatientEntry, time_point: TimePoint, name: str) -> ParameterMap:
    """External map (e.g. SER); non-finite voxels are invalid."""
    tp_entry = entry.timepoints.get(time_point)
    if tp_entry is None or name not in tp_entry.extra_maps:
        raise ManifestParserError(f"patient {entry.patient_id} has no {name} map at {time_point.value}")
    volume = read_volume(tp_entry.extra_maps[name])
    if volume.data.ndim != 3:
        raise ManifestParserError(f"{tp_entry.extra_maps[name]}: {name} map must be 3D")
    data = volume.data.astype(np.float64)
    valid = np.isfinite(data)
    return ParameterMap(name, np.where(valid, data, 0.0), valid, volume.spacing)


def write_parameter_map(path: str | Path, pmap: ParameterMap) -> Path:
    """float32 volume with NaN outside the valid region (read back by ``load_extra_map``)."""
    data = np.where(pmap.valid, pmap.data, np.nan).astype(np.float32)
    return write_volume(path, data, pmap.spacing)


def _relative(path: Path, root: Path) -> str:
    try:
        return path.relative_to(root).as_posix()
    except ValueError:
        return str(path)


def manifest_to_dict(manifest: CohortManifest, root: Path) -> dict:
    patients = []
    for p in manifest.patients:
        tps = {}
        for tp in sorted(p.timepoints, key=lambda t: t.order):
            e = p.timepoints[tp]
            item: dict[str, Any] = {"bvalues": list(e.bvalues)}
            if e.dwi is not None:
                item["dwi"] = _relative(e.dwi, root)
            else:
                item["dwi_per_b"] = {f"{b:g}": _relative(f, root) for b, f in e.dwi_per_b.items()}
            item["mask"] = _relative(e.mask, root)
            if e.extra_maps:
                item["extra_maps"] = {k: _relative(v, root) for k, v in sorted(e.extra_maps.items())}
            tps[tp.value] = item
        entry: dict[str, Any] = {"patient_id": p.patient_id}
        if p.label is not None:
            entry["label"] = p.label
        entry["timepoints"] = tps
        patients.append(entry)
    payload: dict[str, Any] = {"version": MANIFEST_VERSION}
    if manifest.clinical_csv is not None:
        payload["clinical_csv"] = _relative(manifest.clinical_csv, root)
    payload["patients"] = patients
    return payload


def write_manifest(manifest: CohortManifest, path: str | Path) -> Path:
    path = Path(path)
    return write_json(path, manifest_to_dict(manifest, path.resolve().parent))


def save_cohort(members: Sequence, out_dir: str | Path) -> Path:
    """Write a generated cohort (volumes, clinical CSV, manifest); returns the manifest path.

    ``members`` are :class:`src.analyzers.phantom.CohortMember` objects.
    """
    out = Path(out_dir).resolve()
    patients: list[PatientEntry] = []
    for member in members:
        timepoints: dict[TimePoint, TimepointEntry] = {}
        for tp, study in member.studies.items():
            base = out / member.patient_id / tp.value
            dwi = write_volume(base / "dwi.nii", study.signal.astype(np.float32), study.spacing)
            mask = write_volume(base / "mask.nii", study.mask.astype(np.uint8), study.spacing)
            extras = {
                name: write_parameter_map(base / f"{name}.nii", pmap)
                for name, pmap in member.extra_maps.get(tp, {}).items()
            }
            timepoints[tp] = TimepointEntry(study.bvalues.values, mask, dwi=dwi, extra_maps=extras)
        patients.append(PatientEntry(member.patient_id, timepoints, member.label))
    clinical = out / "clinical.csv"
    write_clinical_csv([m.clinical for m in members], clinical)
    manifest = CohortManifest(out, tuple(patients), clinical)
    path = write_manifest(manifest, out / "manifest.json")
    logger.info("wrote %d patients to %s", len(patients), out)
    return path
