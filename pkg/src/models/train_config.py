from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyper-parameters plus the selection size used around the model.

    ``scale_pos_weight=None`` means "derive from the training labels"
    (negatives / positives).
    """

    n_rounds: int = 200
    learning_rate: float = 0.1
    max_depth: int = 3
    min_child_weight: float = 1.0
    subsample: float = 1.0
    l2_lambda: float = 1.0
    scale_pos_weight: float | None = None
    seed: int = 0
    k_features: int = 100

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must be in (0, 1]")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.scale_pos_weight is not None and self.scale_pos_weight <= 0:
            raise ValueError("scale_pos_weight must be > 0")
        if self.k_features < 1:
            raise ValueError("k_features must be >= 1")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# Hyper-parameter grid focused on tree size and row subsampling
DEFAULT_GRID: dict[str, list] = {
    "min_child_weight": [1.0, 3.0, 5.0],
    "max_depth": [2, 3, 4],
    "subsample": [0.6, 0.8, 1.0],
    "k_features": [50, 100, 150],
}
