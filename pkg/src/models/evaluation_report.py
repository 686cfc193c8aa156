from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional


@dataclass(frozen=True)
class MetricsReport:
    auc: float
    f1: float
    kappa: float
    n: int
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError(f"auc must be in [0, 1], got {self.auc}")
        if not 0.0 <= self.f1 <= 1.0:
            raise ValueError(f"f1 must be in [0, 1], got {self.f1}")
        if not -1.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must be in [-1, 1], got {self.kappa}")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricsReport":
        return cls(
            auc=float(payload["auc"]),
            f1=float(payload["f1"]),
            kappa=float(payload["kappa"]),
            n=int(payload["n"]),
            threshold=float(payload.get("threshold", 0.5)),
        )


@dataclass(frozen=True)
class AblationRow:
    config: str
    timepoints: tuple[str, ...]
    metrics: MetricsReport
    p_value_vs_reference: Optional[float] = None

    @property
    def timepoints_label(self) -> str:
        return "+".join(self.timepoints)

    def csv_record(self) -> dict:
        return {
            "config": self.config,
            "timepoints": self.timepoints_label,
            "auc": self.metrics.auc,
            "f1": self.metrics.f1,
            "kappa": self.metrics.kappa,
            "n": self.metrics.n,
        }


CSV_COLUMNS = ("config", "timepoints", "auc", "f1", "kappa", "n")


@dataclass
class AblationReport:
    evaluation: str
    reference: str
    seed: int
    rows: List[AblationRow] = field(default_factory=list)
    excluded_patients: List[str] = field(default_factory=list)

    def row(self, config: str, timepoints: tuple[str, ...]) -> AblationRow:
        for r in self.rows:
            if r.config == config and r.timepoints == tuple(timepoints):
                return r
        raise KeyError(f"no ablation row for {config} at {'+'.join(timepoints)}")

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "evaluation": self.evaluation,
            "reference": self.reference,
            "seed": self.seed,
            "excluded_patients": list(self.excluded_patients),
            "rows": [
                {**r.csv_record(), "threshold": r.metrics.threshold, "p_value_vs_reference": r.p_value_vs_reference}
                for r in self.rows
            ],
        }

    def to_markdown(self) -> str:
        lines: list[str] = []
        lines.append("# pCR Prediction Ablation Report")
        lines.append("")
        lines.append(f"**Evaluation**: {self.evaluation}")
        lines.append(f"**Reference configuration**: {self.reference}")
        lines.append(f"**Seed**: {self.seed}")
        if self.excluded_patients:
            lines.append(f"**Excluded patients**: {', '.join(self.excluded_patients)}")
        lines.append("")
        lines.append("| Configuration | Time points | AUC | F1 | κ | n | p vs reference |")
        lines.append("|---|---|---|---|---|---|---|")
        for r in self.rows:
            p = "" if r.p_value_vs_reference is None else f"{r.p_value_vs_reference:.4f}"
            m = r.metrics
            lines.append(
                f"| {r.config} | {r.timepoints_label} | {m.auc:.4f} | {m.f1:.4f} | {m.kappa:.4f} | {m.n} | {p} |"
            )
        lines.append("")
        return "\n".join(lines)
