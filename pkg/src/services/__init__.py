"""
Services package for WaDeNet.
Contains the preprocessing, corpus, synthesis and training business logic.
"""

from .preprocessing_service import PreprocessingService, split_stratified
from .training_service import TrainingService, evaluate
from .synth_service import synth_dataset
from .corpus_adapters import CORPUS_ADAPTERS

__all__ = [
    'PreprocessingService',
    'split_stratified',
    'TrainingService',
    'evaluate',
    'synth_dataset',
    'CORPUS_ADAPTERS',
]
