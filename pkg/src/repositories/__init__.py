"""
Repositories for the on-disk artifacts: WAV clips, manifests, window caches
and checkpoints.
"""

from .base_repository import BaseRepository
from .checkpoint_repository import CheckpointRepository
from .manifest_repository import ManifestRepository
from .repository_factory import RepositoryFactory
from .wav_repository import read_wav, write_wav
from .window_cache_repository import WindowCacheRepository

__all__ = [
    'BaseRepository',
    'CheckpointRepository',
    'ManifestRepository',
    'RepositoryFactory',
    'WindowCacheRepository',
    'read_wav',
    'write_wav',
]
