"""
Result models produced by training and evaluation.
"""

import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np

from .config_models import ModelConfig, TrainConfig


@dataclass
class EpochMetrics:
    """One line of the metrics stream."""
    epoch: int
    lr: float
    train_loss: float
    val_accuracy: float
    val_macro_f1: float
    wall_seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epoch": int(self.epoch),
            "lr": float(self.lr),
            "train_loss": float(self.train_loss),
            "val_acc": float(self.val_accuracy),
            "val_f1": float(self.val_macro_f1),
            "seconds": float(self.wall_seconds),
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EpochMetrics":
        return cls(data["epoch"], data["lr"], data["train_loss"], data["val_acc"], data["val_f1"], data["seconds"])


@dataclass
class EvaluationReport:
    """Window-level (or clip-level) classification quality on one split."""
    accuracy: float
    macro_f1: float
    confusion: np.ndarray
    per_class_f1: List[float] = field(default_factory=list)
    level: str = "window"

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "acc": float(self.accuracy),
            "macro_f1": float(self.macro_f1),
            "confusion": self.confusion.astype(int).tolist(),
            "per_class_f1": [float(f) for f in self.per_class_f1],
            "level": self.level,
        }


@dataclass
class TrainingResult:
    """
    Contains the metric history and final state of a training run.
    """
    history: List[EpochMetrics] = field(default_factory=list)
    best_epoch: Optional[int] = None
    start_time: Optional[datetime] = None
    end_time: Optional[datetime] = None

    @property
    def epochs_completed(self) -> int:
        return len(self.history)

    @property
    def duration(self) -> Optional[float]:
        """Calculate duration in seconds if both start and end times are available."""
        if self.start_time and self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        return None


@dataclass
class Checkpoint:
    """Everything needed to resume or evaluate a run."""
    model_config: ModelConfig
    train_config: TrainConfig
    arrays: Dict[str, np.ndarray]
    epoch: int = 0
    lr: float = 0.0
    rng_state: Optional[Dict[str, Any]] = None
    history: List[EpochMetrics] = field(default_factory=list)
    vocabulary: List[str] = field(default_factory=list)
