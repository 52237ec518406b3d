from typing import Dict, Type

from src.exceptions import ConfigurationError
from .base_repository import BaseRepository
from .checkpoint_repository import CheckpointRepository
from .manifest_repository import ManifestRepository
from .window_cache_repository import WindowCacheRepository


class RepositoryFactory:
    """Factory for creating and sharing repository instances."""

    _types: Dict[str, Type[BaseRepository]] = {
        "manifest": ManifestRepository,
        "window_cache": WindowCacheRepository,
        "checkpoint": CheckpointRepository,
    }
    _repositories: Dict[str, BaseRepository] = {}

    @classmethod
    def get_repository(cls, repository_type: str) -> BaseRepository:
        """Get or create a repository instance."""
        if repository_type not in cls._repositories:
            if repository_type not in cls._types:
                raise ConfigurationError(f"unknown repository type {repository_type!r}")
            cls._repositories[repository_type] = cls._types[repository_type]()
        return cls._repositories[repository_type]

    @classmethod
    def clear_repositories(cls):
        """Clear all repository instances."""
        cls._repositories.clear()
