"""Parser for the clinical CSV (one row per patient)."""

from __future__ import annotations

import math
import os
from pathlib import Path

import pandas as pd

from src.models.clinical import ClinicalRecord, HrHer2Status, TumorGrade
from src.reporters.file_reporter import write_csv
from src.utils.errors import PipelineDataError

CLINICAL_COLUMNS = ("patient_id", "age", "race", "lesion_type", "hr_her2", "grade", "diameter_cm")
OPTIONAL_COLUMNS = ("grade", "diameter_cm")


class ClinicalParserError(PipelineDataError):
    """Exception raised when the clinical CSV is malformed."""


def _number(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ClinicalParserError(f"line {line}, column {column}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise ClinicalParserError(f"line {line}, column {column}: {text!r} is not a finite number")
    return value


class ClinicalParser:
    """Reads clinical records; empty or absent ``grade`` / ``diameter_cm`` cells mean missing."""

    def parse(self, file_path: str | Path) -> list[ClinicalRecord]:
        """Parse a clinical CSV.

        Raises:
            FileNotFoundError: If the file does not exist
            ClinicalParserError: Missing column, bad value or duplicate patient (row-addressed)
        """
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"Clinical CSV not found: {file_path}")
        try:
            frame = pd.read_csv(file_path, dtype=str, keep_default_na=False, skipinitialspace=True)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise ClinicalParserError(f"{file_path}: {exc}") from exc

        frame.columns = [c.strip() for c in frame.columns]
        missing = [c for c in CLINICAL_COLUMNS if c not in frame.columns and c not in OPTIONAL_COLUMNS]
        if missing:
            raise ClinicalParserError(f"{file_path}: missing required column(s): {', '.join(missing)}")

        records: list[ClinicalRecord] = []
        seen: set[str] = set()
        for i, row in enumerate(frame.itertuples(index=False)):
            line = i + 2  # header is line 1
            values = row._asdict()
            cells = {c: str(values.get(c, "")).strip() for c in CLINICAL_COLUMNS}
            for column in CLINICAL_COLUMNS:
                if column not in OPTIONAL_COLUMNS and not cells[column]:
                    raise ClinicalParserError(f"line {line}, column {column}: value is required")
            if cells["patient_id"] in seen:
                raise ClinicalParserError(f"line {line}, column patient_id: duplicate patient {cells['patient_id']}")
            seen.add(cells["patient_id"])
            records.append(self._record(cells, line))
        return records

    @staticmethod
    def _record(cells: dict[str, str], line: int) -> ClinicalRecord:
        age = _number(cells["age"], line, "age")
        diameter = _number(cells["diameter_cm"], line, "diameter_cm") if cells["diameter_cm"] else None
        try:
            status = HrHer2Status.parse(cells["hr_her2"])
        except ValueError as exc:
            raise ClinicalParserError(f"line {line}, column hr_her2: {exc}") from None
        try:
            grade = TumorGrade.parse(cells["grade"]) if cells["grade"] else None
        except ValueError as exc:
            raise ClinicalParserError(f"line {line}, column grade: {exc}") from None
        try:
            return ClinicalRecord(
                patient_id=cells["patient_id"],
                age=age,
                race=cells["race"],
                lesion_type=cells["lesion_type"],
                hr_her2_status=status,
                tumor_grade=grade,
                longest_diameter_cm=diameter,
            )
        except ValueError as exc:
            raise ClinicalParserError(f"line {line}: {exc}") from None


def read_clinical_csv(path: str | Path) -> list[ClinicalRecord]:
    return ClinicalParser().parse(path)


def write_clinical_csv(records: list[ClinicalRecord], path: str | Path) -> None:
    rows = [
        {
            "patient_id": r.patient_id,
            "age": f"{r.age:g}",
            "race": r.race,
            "lesion_type": r.lesion_type,
            "hr_her2": r.hr_her2_status.value,
            "grade": r.tumor_grade.value if r.tumor_grade else "",
            "diameter_cm": "" if r.longest_diameter_cm is None else f"{r.longest_diameter_cm:g}",
        }
        for r in records
    ]
    write_csv(path, pd.DataFrame(rows, columns=list(CLINICAL_COLUMNS)))
