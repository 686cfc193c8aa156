from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class HrHer2Status(Enum):
    HR_POS_HER2_POS = "HR+/HER2+"
    HR_POS_HER2_NEG = "HR+/HER2-"
    HR_NEG_HER2_POS = "HR-/HER2+"
    HR_NEG_HER2_NEG = "HR-/HER2-"

    @classmethod
    def parse(cls, value: "str | HrHer2Status") -> "HrHer2Status":
        if isinstance(value, HrHer2Status):
            return value
        # Accept unicode minus and loose spacing as exported by spreadsheets
        text = str(value).strip().upper().replace("−", "-").replace(" ", "")
        for member in cls:
            if member.value.upper() == text:
                return member
        raise ValueError(f"unknown HR/HER2 status {value!r}")

    @property
    def hr_positive(self) -> bool:
        return self.value.startswith("HR+")

    @property
    def her2_positive(self) -> bool:
        return self.value.endswith("HER2+")


class TumorGrade(Enum):
    LOW = "Low"
    INTERMEDIATE = "Intermediate"
    HIGH = "High"

    @classmethod
    def parse(cls, value: "str | TumorGrade") -> "TumorGrade":
        if isinstance(value, TumorGrade):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == text:
                return member
        raise ValueError(f"unknown tumor grade {value!r}; expected Low, Intermediate or High")

    @property
    def ordinal(self) -> int:
        return {"Low": 1, "Intermediate": 2, "High": 3}[self.value]


@dataclass(frozen=True)
class ClinicalRecord:
    """Non-imaging variables for one patient."""

    patient_id: str
    age: float
    race: str
    lesion_type: str
    hr_her2_status: HrHer2Status
    tumor_grade: TumorGrade | None = None
    longest_diameter_cm: float | None = None

    def __post_init__(self):
        if not self.patient_id:
            raise ValueError("patient_id must be non-empty")
        if not self.race:
            raise ValueError("race must be non-empty")
        if not self.lesion_type:
            raise ValueError("lesion_type must be non-empty")
        object.__setattr__(self, "hr_her2_status", HrHer2Status.parse(self.hr_her2_status))
        if self.tumor_grade is not None:
            object.__setattr__(self, "tumor_grade", TumorGrade.parse(self.tumor_grade))
        if self.age < 0:
            raise ValueError("age must be >= 0")
        if self.longest_diameter_cm is not None and self.longest_diameter_cm <= 0:
            raise ValueError("longest_diameter_cm must be greater than 0")

    def has_grade(self) -> bool:
        return self.tumor_grade is not None
