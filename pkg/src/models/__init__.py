"""
Models package for WaDeNet.
Contains dataclass models for configuration, data and results.
"""

from .config_models import (
    ValidationResult,
    ModelConfig,
    TrainConfig,
    DataConfig,
    RunSpec,
)
from .data_models import (
    Split,
    AudioClip,
    WindowedExample,
    Manifest,
    WindowedDataset,
)
from .training_models import (
    EpochMetrics,
    EvaluationReport,
    TrainingResult,
    Checkpoint,
)

__all__ = [
    'ValidationResult',
    'ModelConfig',
    'TrainConfig',
    'DataConfig',
    'RunSpec',
    'Split',
    'AudioClip',
    'WindowedExample',
    'Manifest',
    'WindowedDataset',
    'EpochMetrics',
    'EvaluationReport',
    'TrainingResult',
    'Checkpoint',
]
