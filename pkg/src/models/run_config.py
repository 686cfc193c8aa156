from __future__ import annotations

from dataclasses import dataclass, field

from src.models.dwi_study import MAP_NAMES, TimePoint
from src.models.train_config import TrainConfig


@dataclass(frozen=True)
class AblationConfig:
    """A named map subset evaluated by the ablation harness."""

    name: str
    maps: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("configuration name must be non-empty")
        maps = tuple(self.maps)
        if not maps:
            raise ValueError(f"configuration {self.name} selects no maps")
        object.__setattr__(self, "maps", maps)


DEFAULT_CONFIGURATIONS: tuple[AblationConfig, ...] = (
    AblationConfig("Baseline", ("ADC_0_800", "SER")),
    AblationConfig("ADC_0_100-only", ("ADC_0_100",)),
    AblationConfig("ADC_100_800-only", ("ADC_100_800",)),
    AblationConfig("ADC_0_800-only", ("ADC_0_800",)),
    AblationConfig("F-only", ("F",)),
    AblationConfig("PD-DWI", ("ADC_0_100", "F")),
)

EVALUATION_MODES = ("cv", "holdout")


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs besides its input files."""

    maps: tuple[str, ...] = ("ADC_0_100", "F")
    timepoints: tuple[str, ...] = ("T0", "T1", "T2")
    bin_count: int = 32
    k_features: int | None = None
    folds: int = 5
    seed: int = 0
    threshold: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)
    grid: dict[str, list] | None = None
    configurations: tuple[AblationConfig, ...] = DEFAULT_CONFIGURATIONS
    evaluation: str = "cv"
    test_fraction: float = 0.4
    n_permutations: int = 1000
    reference: str = "PD-DWI"
    n_jobs: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        if not self.maps:
            raise ValueError("maps must name at least one parameter map")
        object.__setattr__(self, "maps", tuple(self.maps))
        tps = tuple(TimePoint.parse(t).value for t in self.timepoints)
        if not tps:
            raise ValueError("timepoints must not be empty")
        object.__setattr__(self, "timepoints", tps)
        if self.bin_count < 2:
            raise ValueError("bin_count must be >= 2")
        if self.k_features is not None:
            # A top-level k overrides the train block so configs stay short
            object.__setattr__(self, "train", self.train.replace(k_features=self.k_features))
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if self.evaluation not in EVALUATION_MODES:
            raise ValueError(f"evaluation must be one of {EVALUATION_MODES}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.n_permutations < 100:
            raise ValueError("n_permutations must be >= 100")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")
        names = [c.name for c in self.configurations]
        if len(set(names)) != len(names):
            raise ValueError("configuration names must be unique")

    def timepoint_enums(self) -> tuple[TimePoint, ...]:
        return tuple(sorted((TimePoint(t) for t in self.timepoints), key=lambda t: t.order))

    def required_maps(self) -> tuple[str, ...]:
        """Union of maps any command of this run may need, in stable order."""
        names = set(self.maps)
        for cfg in self.configurations:
            names.update(cfg.maps)
        derived = [m for m in MAP_NAMES if m in names]
        extra = sorted(names - set(MAP_NAMES))
        return tuple(derived + extra)
